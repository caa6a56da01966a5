#include "fedcost/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace fedcost {

double sampling_penalty(double k, int n) {
  if (n <= 1) return 1.0;
  return 1.0 + (n - k) / (k * (n - 1.0));
}

double expected_energy(double k, double e, double r, const AveragedCosts& costs) {
  return k * (costs.e_p * e + costs.e_m) * r;
}

std::vector<double> first_client_probabilities(int n, int k) {
  if (k < 1 || k > n) throw std::invalid_argument("need 1 <= K <= N");
  std::vector<double> p(static_cast<std::size_t>(n - k + 1));
  p[0] = static_cast<double>(k) / n;
  for (int i = 1; i < n - k + 1; ++i) {
    // P_{i+1} / P_i with 1-based i.
    p[i] = p[i - 1] * static_cast<double>(n - k - i + 1) / static_cast<double>(n - i);
  }
  return p;
}

double expected_time_exact(int k, double e, double r, const SystemProfile& profile) {
  profile.validate();
  const int n = profile.num_clients();
  if (k < 1 || k > n) throw std::invalid_argument("expected_time_exact: need 1 <= K <= N");
  std::vector<double> sorted(profile.t_comp);
  std::sort(sorted.begin(), sorted.end());
  const auto prob = first_client_probabilities(n, k);
  double fastest = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) fastest += prob[i] * sorted[i];
  double t_m = 0.0;
  for (double v : profile.comm_time_mean) t_m += v;
  t_m /= n;
  return (fastest * e + t_m * k) * r;
}

double expected_time_approx(double k, double e, double r, const AveragedCosts& costs) {
  return (costs.t_p * e + costs.t_m * k) * r;
}

double convergence_bound(double k, double e, double r, int n, const ConvergenceCoeffs& coeffs) {
  return (coeffs.rho + sampling_penalty(k, n) * e * e) / (e * r);
}

double rounds_needed(double k, double e, int n, const ConvergenceCoeffs& coeffs) {
  return (coeffs.rho + sampling_penalty(k, n) * e * e) / e;
}

double p3_objective_relaxed(double k, double e, const AveragedCosts& costs,
                            const ConvergenceCoeffs& coeffs) {
  const double g = costs.gamma;
  const double per_round =
      (1.0 - g) * (costs.t_p * e + costs.t_m * k) + g * k * (costs.e_p * e + costs.e_m);
  return per_round * rounds_needed(k, e, costs.n, coeffs);
}

double p3_objective(double k, double e, const AveragedCosts& costs,
                    const ConvergenceCoeffs& coeffs) {
  if (!(k >= 1.0 && k <= costs.n) || !(e >= 1.0))
    throw std::domain_error("p3_objective: need 1 <= K <= N and E >= 1");
  return p3_objective_relaxed(k, e, costs, coeffs);
}

CostReport cost_report(double k, double e, const AveragedCosts& costs,
                       const ConvergenceCoeffs& coeffs) {
  CostReport rep;
  rep.rounds = rounds_needed(k, e, costs.n, coeffs);
  rep.expected_time = expected_time_approx(k, e, rep.rounds, costs);
  rep.expected_energy = expected_energy(k, e, rep.rounds, costs);
  rep.total_cost = costs.gamma * rep.expected_energy + (1.0 - costs.gamma) * rep.expected_time;
  return rep;
}

void write_cost_surface_csv(std::ostream& out, const AveragedCosts& costs,
                            const ConvergenceCoeffs& coeffs, const std::vector<int>& ks,
                            const std::vector<int>& es) {
  out << "K,E,objective,time_term,energy_term\n" << std::setprecision(17);
  for (int k : ks) {
    for (int e : es) {
      const auto rep = cost_report(k, e, costs, coeffs);
      out << k << ',' << e << ',' << p3_objective(k, e, costs, coeffs) << ','
          << rep.expected_time << ',' << rep.expected_energy << '\n';
    }
  }
}

}  // namespace fedcost
