#include "fedcost/system.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace fedcost {

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void require_positive(const std::vector<double>& v, const char* name) {
  for (double x : v) {
    if (!(x > 0.0) || !std::isfinite(x))
      throw std::invalid_argument(std::string(name) + " entries must be finite and > 0");
  }
}

}  // namespace

void SystemProfile::validate() const {
  const auto n = t_comp.size();
  if (n == 0) throw std::invalid_argument("system profile has no clients");
  if (e_comp.size() != n || comm_time_mean.size() != n || comm_energy_mean.size() != n)
    throw std::invalid_argument("system profile arrays differ in length");
  require_positive(t_comp, "t_comp");
  require_positive(e_comp, "e_comp");
  require_positive(comm_time_mean, "comm_time_mean");
  require_positive(comm_energy_mean, "comm_energy_mean");
  if (!(jitter >= 0.0) || !std::isfinite(jitter))
    throw std::invalid_argument("jitter must be finite and >= 0");
}

AveragedCosts averaged_costs(const SystemProfile& profile, double gamma) {
  profile.validate();
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0,1]");
  AveragedCosts c;
  c.t_p = mean_of(profile.t_comp);
  c.t_m = mean_of(profile.comm_time_mean);
  c.e_p = mean_of(profile.e_comp);
  c.e_m = mean_of(profile.comm_energy_mean);
  c.gamma = gamma;
  c.n = profile.num_clients();
  return c;
}

SystemProfile sample_profile(const ProfileSpec& spec) {
  if (spec.n_clients < 1) throw std::invalid_argument("n_clients must be >= 1");
  for (double v : {spec.t_p_mean, spec.e_p_mean, spec.t_m_mean, spec.e_m_mean}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("cost means must be > 0");
  }
  if (!(spec.t_p_std >= 0.0) || !(spec.comm_spread >= 0.0) || !(spec.jitter >= 0.0))
    throw std::invalid_argument("spreads must be >= 0");

  const auto n = static_cast<std::size_t>(spec.n_clients);
  const double cv = spec.t_p_std / spec.t_p_mean;
  const double e_p_std = spec.e_p_std < 0.0 ? cv * spec.e_p_mean : spec.e_p_std;

  SystemProfile p;
  p.jitter = spec.jitter;
  p.t_comp.resize(n);
  p.e_comp.resize(n);
  p.comm_time_mean.resize(n);
  p.comm_energy_mean.resize(n);

  Rng comp_rng = make_stream(spec.seed, "profile/compute");
  for (std::size_t k = 0; k < n; ++k) {
    p.t_comp[k] = truncated_normal(comp_rng, spec.t_p_mean, spec.t_p_std);
    p.e_comp[k] = truncated_normal(comp_rng, spec.e_p_mean, e_p_std);
  }

  Rng comm_rng = make_stream(spec.seed, "profile/comm");
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::vector<double> factor(n);
  for (auto& f : factor) f = std::exp(spec.comm_spread * std_normal(comm_rng));
  const double factor_mean = mean_of(factor);
  for (std::size_t k = 0; k < n; ++k) {
    const double rel = factor[k] / factor_mean;
    p.comm_time_mean[k] = spec.t_m_mean * rel;
    p.comm_energy_mean[k] = spec.e_m_mean * rel;
  }
  return p;
}

RoundCommCosts draw_round_costs(const SystemProfile& profile, std::span<const int> client_ids,
                                Rng& rng) {
  RoundCommCosts out;
  out.time.reserve(client_ids.size());
  out.energy.reserve(client_ids.size());
  for (int id : client_ids) {
    if (id < 0 || id >= profile.num_clients())
      throw std::out_of_range("client id " + std::to_string(id) + " not in profile");
    const double f = truncated_normal(rng, 1.0, profile.jitter);
    out.time.push_back(profile.comm_time_mean[id] * f);
    out.energy.push_back(profile.comm_energy_mean[id] * f);
  }
  return out;
}

double shannon_comm_time(double model_bits, double bandwidth_hz, double tx_power,
                         double channel_gain, double noise_power) {
  if (!(model_bits > 0.0) || !(bandwidth_hz > 0.0) || !(tx_power > 0.0) ||
      !(channel_gain > 0.0) || !(noise_power > 0.0))
    throw std::invalid_argument("shannon_comm_time: all arguments must be positive");
  const double snr = tx_power * channel_gain / noise_power;
  const double spectral = std::log2(1.0 + snr);
  if (!(spectral > 0.0)) throw std::domain_error("shannon_comm_time: zero SNR");
  return model_bits / (bandwidth_hz * spectral);
}

std::string profile_to_json(const SystemProfile& profile) {
  nlohmann::ordered_json j;
  j["n_clients"] = profile.num_clients();
  j["t_comp"] = profile.t_comp;
  j["e_comp"] = profile.e_comp;
  j["comm_time_mean"] = profile.comm_time_mean;
  j["comm_energy_mean"] = profile.comm_energy_mean;
  j["jitter"] = profile.jitter;
  return j.dump(2);
}

SystemProfile profile_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  static const char* kKeys[] = {"n_clients", "t_comp", "e_comp", "comm_time_mean",
                                "comm_energy_mean", "jitter"};
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kKeys) known = known || key == k;
    if (!known) throw std::invalid_argument("unknown profile key '" + key + "'");
  }
  SystemProfile p;
  p.t_comp = j.at("t_comp").get<std::vector<double>>();
  p.e_comp = j.at("e_comp").get<std::vector<double>>();
  p.comm_time_mean = j.at("comm_time_mean").get<std::vector<double>>();
  p.comm_energy_mean = j.at("comm_energy_mean").get<std::vector<double>>();
  p.jitter = j.at("jitter").get<double>();
  if (j.contains("n_clients") && j.at("n_clients").get<int>() != p.num_clients())
    throw std::invalid_argument("n_clients does not match array lengths");
  p.validate();
  return p;
}

}  // namespace fedcost
