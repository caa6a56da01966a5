#include "fedcost/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace fedcost {

namespace {

void check_inputs(const AveragedCosts& costs, const ConvergenceCoeffs& coeffs) {
  for (double v : {costs.t_p, costs.t_m, costs.e_p, costs.e_m, costs.gamma, coeffs.rho}) {
    if (!std::isfinite(v)) throw std::invalid_argument("optimizer inputs must be finite");
  }
  if (costs.n < 1) throw std::invalid_argument("optimizer needs N >= 1");
  if (!(costs.gamma >= 0.0 && costs.gamma <= 1.0))
    throw std::invalid_argument("gamma must lie in [0,1]");
  if (!(coeffs.rho > 0.0)) throw std::invalid_argument("rho must be > 0");
}

// Positive root of phi (2 a E^3 + b E^2) = rho b, or +inf if above e_max.
double stationary_e(double k, const AveragedCosts& costs, const ConvergenceCoeffs& coeffs,
                    double e_max) {
  const double g = costs.gamma;
  const double a = (1.0 - g) * costs.t_p + g * k * costs.e_p;
  const double b = (1.0 - g) * costs.t_m * k + g * k * costs.e_m;
  const double phi = sampling_penalty(k, costs.n);
  if (b <= 0.0) return 0.0;
  auto excess = [&](double e) { return phi * (2.0 * a * e * e * e + b * e * e) - coeffs.rho * b; };

  double lo = 1e-6;
  double hi = e_max;
  if (excess(lo) >= 0.0) return lo;
  if (excess(hi) < 0.0) return std::numeric_limits<double>::infinity();
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double solve_k_given_e(double e, const AveragedCosts& costs, const ConvergenceCoeffs& coeffs) {
  check_inputs(costs, coeffs);
  if (!(e >= 1.0) || !std::isfinite(e)) throw std::invalid_argument("solve_k_given_e: need E >= 1");
  const double g = costs.gamma;
  const int n = costs.n;
  if (g >= 1.0 || n == 1) return 1.0;

  // Objective in K is (A + cK)(G + H/K); its stationary point is sqrt(AH / (cG)).
  const double a = (1.0 - g) * costs.t_p * e;
  const double c = (1.0 - g) * costs.t_m + g * (costs.e_p * e + costs.e_m);
  const double g_term = coeffs.rho / e + (n - 2.0) * e / (n - 1.0);
  const double h_term = n * e / (n - 1.0);
  const double denom = c * g_term;
  if (denom <= 0.0) return static_cast<double>(n);
  const double k = std::sqrt(a * h_term / denom);
  return std::clamp(k, 1.0, static_cast<double>(n));
}

CeilingError::CeilingError(double ceiling)
    : std::runtime_error([&] {
        std::ostringstream msg;
        msg << "optimal E exceeds the search ceiling E_max = " << ceiling;
        return msg.str();
      }()),
      ceiling_(ceiling) {}

double solve_e_given_k(double k, const AveragedCosts& costs, const ConvergenceCoeffs& coeffs,
                       double e_max) {
  check_inputs(costs, coeffs);
  if (!(k >= 1.0 && k <= costs.n)) throw std::invalid_argument("solve_e_given_k: need 1 <= K <= N");
  if (!(e_max > 1e-6)) throw std::invalid_argument("solve_e_given_k: bad E ceiling");
  const double e = stationary_e(k, costs, coeffs, e_max);
  if (std::isinf(e)) throw CeilingError(e_max);
  return std::max(1.0, e);
}

namespace {

Solution finish_solution(int k, int e, double objective, const AveragedCosts& costs,
                         const ConvergenceCoeffs& coeffs) {
  Solution s;
  s.k = k;
  s.e = e;
  s.objective = objective;
  s.rounds = static_cast<int>(std::ceil(rounds_needed(k, e, costs.n, coeffs) - 1e-9));
  s.rounds = std::max(s.rounds, 1);
  return s;
}

}  // namespace

Solution acs_optimize(const AveragedCosts& costs, const ConvergenceCoeffs& coeffs,
                      const AcsConfig& config) {
  check_inputs(costs, coeffs);
  const double n = costs.n;
  if (!(config.e_max >= 1.0)) throw std::invalid_argument("acs: e_max must be >= 1");
  if (!(config.k0 >= 1.0 && config.k0 <= n) || !(config.e0 >= 1.0 && config.e0 <= config.e_max))
    throw std::invalid_argument("acs: infeasible start point");
  if (config.max_sweeps < 1 || !(config.tolerance > 0.0))
    throw std::invalid_argument("acs: need max_sweeps >= 1 and tolerance > 0");

  double k = config.k0;
  double e = config.e0;
  std::vector<std::pair<double, double>> trajectory{{k, e}};
  bool converged = false;
  for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
    const double k_next = std::clamp(solve_k_given_e(e, costs, coeffs), 1.0, n);
    // The objective is convex in E, so projecting the stationary point onto
    // [1, e_max] gives the constrained minimiser.
    const double e_next =
        std::clamp(stationary_e(k_next, costs, coeffs, config.e_max), 1.0, config.e_max);
    const double step = std::hypot(k_next - k, e_next - e);
    k = k_next;
    e = e_next;
    trajectory.emplace_back(k, e);
    if (step <= config.tolerance) {
      converged = true;
      break;
    }
  }

  const int e_cap = static_cast<int>(std::floor(config.e_max));
  const int k_lo = std::max(1, static_cast<int>(std::floor(k)));
  const int k_hi = std::min(costs.n, static_cast<int>(std::ceil(k)));
  const int e_lo = std::clamp(static_cast<int>(std::floor(e)), 1, e_cap);
  const int e_hi = std::clamp(static_cast<int>(std::ceil(e)), 1, e_cap);

  int best_k = k_lo;
  int best_e = e_lo;
  double best = std::numeric_limits<double>::infinity();
  for (int kc : {k_lo, k_hi}) {
    for (int ec : {e_lo, e_hi}) {
      const double v = p3_objective(kc, ec, costs, coeffs);
      if (v < best) {
        best = v;
        best_k = kc;
        best_e = ec;
      }
    }
  }
  Solution s = finish_solution(best_k, best_e, best, costs, coeffs);
  s.trajectory = std::move(trajectory);
  s.converged = converged;
  return s;
}

Solution grid_search(const AveragedCosts& costs, const ConvergenceCoeffs& coeffs,
                     IntRange k_range, IntRange e_range) {
  check_inputs(costs, coeffs);
  if (k_range.lo > k_range.hi || e_range.lo > e_range.hi)
    throw std::invalid_argument("grid_search: empty range");
  if (k_range.lo < 1 || k_range.hi > costs.n || e_range.lo < 1)
    throw std::invalid_argument("grid_search: range outside 1 <= K <= N, E >= 1");
  int best_k = k_range.lo;
  int best_e = e_range.lo;
  double best = std::numeric_limits<double>::infinity();
  for (int k = k_range.lo; k <= k_range.hi; ++k) {
    for (int e = e_range.lo; e <= e_range.hi; ++e) {
      const double v = p3_objective(k, e, costs, coeffs);
      if (v < best) {
        best = v;
        best_k = k;
        best_e = e;
      }
    }
  }
  return finish_solution(best_k, best_e, best, costs, coeffs);
}

// ---------------------------------------------------------------------------

void EstimationPlan::validate(int num_clients) const {
  using Kind = EstimationError::Kind;
  if (pilots.size() < 2) throw EstimationError(Kind::kInvalidPlan, "need at least two pilot pairs");
  for (std::size_t i = 0; i < pilots.size(); ++i) {
    const auto [k, e] = pilots[i];
    if (k < 1 || k > num_clients || e < 1)
      throw EstimationError(Kind::kInvalidPlan, "pilot (" + std::to_string(k) + ", " +
                                                    std::to_string(e) + ") is infeasible");
    for (std::size_t j = 0; j < i; ++j) {
      if (pilots[j] == pilots[i])
        throw EstimationError(Kind::kInvalidPlan, "duplicate pilot pair");
    }
  }
  if (!(loss_b < loss_a)) throw EstimationError(Kind::kInvalidPlan, "need loss_b < loss_a");
  if (max_rounds < 1) throw EstimationError(Kind::kInvalidPlan, "need max_rounds >= 1");
}

RhoEstimate rho_from_spans(const std::vector<PilotSpan>& spans, int num_clients) {
  if (spans.size() < 2)
    throw EstimationError(EstimationError::Kind::kInvalidPlan, "need at least two pilots");
  RhoEstimate out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (std::size_t j = i + 1; j < spans.size(); ++j) {
      const auto& pi = spans[i];
      const auto& pj = spans[j];
      const double span_i = pi.e * pi.rounds;
      const double span_j = pj.e * pj.rounds;
      if (!(span_i > 0.0) || !(span_j > 0.0)) {
        ++out.discarded_pairs;
        continue;
      }
      const double ratio = span_i / span_j;
      if (std::abs(1.0 - ratio) < kMinRatioSeparation) {
        ++out.discarded_pairs;
        continue;
      }
      const double drift_i = sampling_penalty(pi.k, num_clients) * pi.e * pi.e;
      const double drift_j = sampling_penalty(pj.k, num_clients) * pj.e * pj.e;
      const double rho = (ratio * drift_j - drift_i) / (1.0 - ratio);
      if (!(rho > 0.0) || !std::isfinite(rho)) {
        ++out.discarded_pairs;
        continue;
      }
      out.pair_estimates.push_back(rho);
    }
  }
  if (out.pair_estimates.empty())
    throw EstimationError(EstimationError::Kind::kNoUsablePairs,
                          "every pilot pair was discarded; widen the spread of (K, E) pilots");
  double sum = 0.0;
  for (double r : out.pair_estimates) sum += r;
  out.rho = sum / static_cast<double>(out.pair_estimates.size());
  return out;
}

RhoEstimate rho_from_pilots(const std::vector<PilotRecord>& pilots, int num_clients) {
  std::vector<PilotSpan> spans;
  spans.reserve(pilots.size());
  for (const auto& p : pilots)
    spans.push_back({static_cast<double>(p.k), static_cast<double>(p.e),
                     static_cast<double>(p.rounds_b - p.rounds_a)});
  return rho_from_spans(spans, num_clients);
}

std::vector<PilotRecord> run_pilots(const EstimationPlan& plan, const FederatedDataset& dataset,
                                    const SystemProfile& profile, const TrainConfig& base) {
  plan.validate(dataset.num_clients());
  std::vector<PilotRecord> out;
  for (std::size_t i = 0; i < plan.pilots.size(); ++i) {
    TrainConfig cfg = base;
    cfg.clients_per_round = plan.pilots[i].first;
    cfg.local_steps = plan.pilots[i].second;
    cfg.max_rounds = plan.max_rounds;
    cfg.target_loss = plan.loss_b;
    cfg.seed = stream_seed(base.seed, "pilot", i);
    const auto run = run_fedavg(dataset, profile, cfg);
    if (run.stop != StopReason::kTargetReached)
      throw EstimationError(EstimationError::Kind::kPilotTimeout,
                            "pilot (" + std::to_string(cfg.clients_per_round) + ", " +
                                std::to_string(cfg.local_steps) + ") did not reach loss_b within " +
                                std::to_string(plan.max_rounds) + " rounds");
    PilotRecord rec{cfg.clients_per_round, cfg.local_steps, 0, 0};
    for (const auto& t : run.traces) {
      if (rec.rounds_a == 0 && t.loss <= plan.loss_a) rec.rounds_a = t.round + 1;
      if (rec.rounds_b == 0 && t.loss <= plan.loss_b) rec.rounds_b = t.round + 1;
    }
    out.push_back(rec);
  }
  return out;
}

double estimation_overhead(const std::vector<PilotRecord>& pilots, const Solution& solution) {
  double pilot_iters = 0.0;
  for (const auto& p : pilots) pilot_iters += static_cast<double>(p.k) * p.e * p.rounds_b;
  return pilot_iters / (static_cast<double>(solution.k) * solution.e * solution.rounds);
}

EstimationResult estimate_rho(const EstimationPlan& plan, const FederatedDataset& dataset,
                              const SystemProfile& profile, const TrainConfig& base) {
  EstimationResult res;
  res.pilots = run_pilots(plan, dataset, profile, base);
  res.estimate = rho_from_pilots(res.pilots, dataset.num_clients());
  return res;
}

void write_estimation_csv(std::ostream& out, const std::vector<PilotRecord>& pilots) {
  out << "pilot_K,pilot_E,R_a,R_b\n";
  for (const auto& p : pilots) out << p.k << ',' << p.e << ',' << p.rounds_a << ',' << p.rounds_b << '\n';
}

void write_solution_csv(std::ostream& out, const Solution& solution, double overhead_ratio) {
  out << "K_star,E_star,R_star,predicted_cost,overhead_ratio\n" << std::setprecision(17);
  out << solution.k << ',' << solution.e << ',' << solution.rounds << ',' << solution.objective
      << ',' << overhead_ratio << '\n';
}

}  // namespace fedcost
