#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fedcost {

/// Uplink scheduling strategies for one round.
///   kOptimalTs  clients upload one at a time in ascending computation order,
///               each as soon as it is done and the channel is free
///   kWaitAllTs  uploads start only after every sampled client has finished
///   kStaticFs   the band is split equally for the whole round
enum class Strategy { kOptimalTs = 0, kWaitAllTs = 1, kStaticFs = 2 };

inline constexpr Strategy kAllStrategies[] = {Strategy::kOptimalTs, Strategy::kWaitAllTs,
                                              Strategy::kStaticFs};

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

/// One round's sampled clients. `comp` is the E-fold computation time,
/// `comm` the full-bandwidth upload time. `ids` (optional) break ties in
/// computation time; positions are used when absent.
struct RoundJob {
  std::vector<double> comp;
  std::vector<double> comm;
  std::vector<int> ids;

  std::size_t size() const { return comp.size(); }
};

/// Completion time of sequential uploads in the given order:
/// T_k = max(comp_k, T_{k-1}) + comm_k, T_0 = 0.
double sequential_upload_time(const RoundJob& job, const std::vector<std::size_t>& order);

/// Ascending computation time, ties by id.
std::vector<std::size_t> optimal_order(const RoundJob& job);

double round_time(const RoundJob& job, Strategy strategy);

struct BruteForceResult {
  double time = 0.0;
  std::vector<std::size_t> order;
};

inline constexpr std::size_t kMaxBruteForceClients = 9;

/// Minimum of sequential_upload_time over every permutation. The first
/// minimiser in lexicographic order is returned. Throws for K > 9.
BruteForceResult brute_force_min_time(const RoundJob& job);

/// CSV corpus of jobs: job,client,comp,comm
void write_jobs_csv(std::ostream& out, const std::vector<RoundJob>& jobs);
std::vector<RoundJob> read_jobs_csv(std::istream& in);

}  // namespace fedcost
