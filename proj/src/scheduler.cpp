#include "fedcost/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fedcost {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kOptimalTs:
      return "optimal_ts";
    case Strategy::kWaitAllTs:
      return "wait_all_ts";
    case Strategy::kStaticFs:
      return "static_fs";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

namespace {

void check_job(const RoundJob& job) {
  if (job.comp.empty()) throw std::invalid_argument("round job has no clients");
  if (job.comm.size() != job.comp.size())
    throw std::invalid_argument("round job comp/comm length mismatch");
  if (!job.ids.empty() && job.ids.size() != job.comp.size())
    throw std::invalid_argument("round job ids length mismatch");
  for (std::size_t i = 0; i < job.comp.size(); ++i) {
    if (!(job.comp[i] >= 0.0 && job.comm[i] >= 0.0) || !std::isfinite(job.comp[i]) ||
        !std::isfinite(job.comm[i]))
      throw std::invalid_argument("round job times must be finite and >= 0");
  }
}

}  // namespace

double sequential_upload_time(const RoundJob& job, const std::vector<std::size_t>& order) {
  double t = 0.0;
  for (std::size_t idx : order) t = std::max(job.comp[idx], t) + job.comm[idx];
  return t;
}

std::vector<std::size_t> optimal_order(const RoundJob& job) {
  check_job(job);
  std::vector<std::size_t> order(job.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (job.comp[a] != job.comp[b]) return job.comp[a] < job.comp[b];
    if (!job.ids.empty()) return job.ids[a] < job.ids[b];
    return a < b;
  });
  return order;
}

double round_time(const RoundJob& job, Strategy strategy) {
  check_job(job);
  switch (strategy) {
    case Strategy::kOptimalTs:
      return sequential_upload_time(job, optimal_order(job));
    case Strategy::kWaitAllTs: {
      const double slowest = *std::max_element(job.comp.begin(), job.comp.end());
      return slowest + std::accumulate(job.comm.begin(), job.comm.end(), 0.0);
    }
    case Strategy::kStaticFs: {
      const double k = static_cast<double>(job.size());
      double t = 0.0;
      for (std::size_t i = 0; i < job.size(); ++i) t = std::max(t, job.comp[i] + k * job.comm[i]);
      return t;
    }
  }
  throw std::invalid_argument("unknown strategy");
}

BruteForceResult brute_force_min_time(const RoundJob& job) {
  check_job(job);
  if (job.size() > kMaxBruteForceClients)
    throw std::invalid_argument("brute force limited to " +
                                std::to_string(kMaxBruteForceClients) + " clients, got " +
                                std::to_string(job.size()));
  std::vector<std::size_t> perm(job.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  BruteForceResult best{sequential_upload_time(job, perm), perm};
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double t = sequential_upload_time(job, perm);
    if (t < best.time) best = {t, perm};
  }
  return best;
}

void write_jobs_csv(std::ostream& out, const std::vector<RoundJob>& jobs) {
  out << "job,client,comp,comm\n" << std::setprecision(17);
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (std::size_t i = 0; i < jobs[j].size(); ++i) {
      const int id = jobs[j].ids.empty() ? static_cast<int>(i) : jobs[j].ids[i];
      out << j << ',' << id << ',' << jobs[j].comp[i] << ',' << jobs[j].comm[i] << '\n';
    }
  }
}

std::vector<RoundJob> read_jobs_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "job,client,comp,comm")
    throw std::invalid_argument("jobs csv: bad header");
  std::vector<RoundJob> jobs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell[4];
    for (auto& c : cell) {
      if (!std::getline(row, c, ',')) throw std::invalid_argument("jobs csv: short row");
    }
    const auto job = static_cast<std::size_t>(std::stoul(cell[0]));
    if (job > jobs.size()) throw std::invalid_argument("jobs csv: job index gap");
    if (job == jobs.size()) jobs.emplace_back();
    jobs[job].ids.push_back(std::stoi(cell[1]));
    jobs[job].comp.push_back(std::stod(cell[2]));
    jobs[job].comm.push_back(std::stod(cell[3]));
  }
  return jobs;
}

}  // namespace fedcost
