#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedcost/rng.hpp"

namespace fedcost {

/// Per-client cost parameters of a heterogeneous edge system.
///   t_comp[k]            seconds per local iteration
///   e_comp[k]            joules per local iteration
///   comm_time_mean[k]    mean upload time per round (s)
///   comm_energy_mean[k]  mean upload energy per round (J)
///   jitter               relative std of per-round communication draws
struct SystemProfile {
  std::vector<double> t_comp;
  std::vector<double> e_comp;
  std::vector<double> comm_time_mean;
  std::vector<double> comm_energy_mean;
  double jitter = 0.0;

  int num_clients() const { return static_cast<int>(t_comp.size()); }

  /// Throws std::invalid_argument unless all arrays share one length and are
  /// strictly positive.
  void validate() const;
};

/// Population means used by the analytic cost model.
struct AveragedCosts {
  double t_p = 0.0;
  double t_m = 0.0;
  double e_p = 0.0;
  double e_m = 0.0;
  double gamma = 0.0;
  int n = 1;
};

AveragedCosts averaged_costs(const SystemProfile& profile, double gamma);

struct ProfileSpec {
  int n_clients = 100;
  double t_p_mean = 0.5;
  double t_p_std = 0.1;
  double e_p_mean = 0.01;
  double e_p_std = -1.0;  // negative: same coefficient of variation as t_p
  double t_m_mean = 0.2;
  double e_m_mean = 0.02;
  double comm_spread = 0.2;  // log-normal sigma of per-client comm means
  double jitter = 0.1;
  std::uint64_t seed = 0;
};

/// Truncated-normal computation costs and log-normal communication means
/// rescaled so their population means equal t_m_mean / e_m_mean.
SystemProfile sample_profile(const ProfileSpec& spec);

struct RoundCommCosts {
  std::vector<double> time;
  std::vector<double> energy;
};

/// Per-round upload costs of the given clients. One truncated-normal channel
/// factor (mean 1, std = jitter) per client scales both time and energy.
RoundCommCosts draw_round_costs(const SystemProfile& profile, std::span<const int> client_ids,
                                Rng& rng);

/// Upload time Omega / (B log2(1 + p h / N0)) in seconds.
double shannon_comm_time(double model_bits, double bandwidth_hz, double tx_power,
                         double channel_gain, double noise_power);

std::string profile_to_json(const SystemProfile& profile);
SystemProfile profile_from_json(const std::string& text);

}  // namespace fedcost
