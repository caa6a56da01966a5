#pragma once

#include <iosfwd>
#include <vector>

#include "fedcost/system.hpp"

namespace fedcost {

/// rho = A0 / B0 with B0 normalised to 1 and the precision epsilon folded in.
struct ConvergenceCoeffs {
  double rho = 1.0;
};

/// Relaxed (K, E, R); integrality is imposed by callers.
struct ControlDecision {
  double k = 1.0;
  double e = 1.0;
  double r = 1.0;
};

struct CostReport {
  double expected_time = 0.0;
  double expected_energy = 0.0;
  double total_cost = 0.0;  // gamma * energy + (1 - gamma) * time
  double rounds = 0.0;
};

/// Client-sampling penalty 1 + (N - K) / (K (N - 1)); 1 when N = 1.
double sampling_penalty(double k, int n);

/// K (e_p E + e_m) R
double expected_energy(double k, double e, double r, const AveragedCosts& costs);

/// P(client i is the fastest of a uniform K-subset) for clients sorted by
/// computation time: C(N-i, K-1) / C(N, K), i = 1..N-K+1. Built from the
/// telescoping ratio (N-K-i+1)/(N-i) so nothing overflows.
std::vector<double> first_client_probabilities(int n, int k);

/// Expected total time when the per-round time is the fastest sampled
/// client's E-fold computation plus K mean uploads.
double expected_time_exact(int k, double e, double r, const SystemProfile& profile);

/// (t_p E + t_m K) R
double expected_time_approx(double k, double e, double r, const AveragedCosts& costs);

/// (1 / (E R)) (rho + phi(K) E^2)
double convergence_bound(double k, double e, double r, int n, const ConvergenceCoeffs& coeffs);

/// Rounds at which the bound equals the (folded) precision: (rho + phi E^2) / E.
double rounds_needed(double k, double e, int n, const ConvergenceCoeffs& coeffs);

/// Expected balanced cost with R eliminated:
/// [(1-g)(t_p E + t_m K) + g K (e_p E + e_m)] (rho + phi(K) E^2) / E.
/// Throws std::domain_error outside 1 <= K <= N, E >= 1.
double p3_objective(double k, double e, const AveragedCosts& costs,
                    const ConvergenceCoeffs& coeffs);

/// Same expression without the domain check (continuous analysis, K, E > 0).
double p3_objective_relaxed(double k, double e, const AveragedCosts& costs,
                            const ConvergenceCoeffs& coeffs);

CostReport cost_report(double k, double e, const AveragedCosts& costs,
                       const ConvergenceCoeffs& coeffs);

/// K,E,objective,time_term,energy_term over an integer grid. The two terms
/// are unweighted expected time and energy at R = rounds_needed(K, E).
void write_cost_surface_csv(std::ostream& out, const AveragedCosts& costs,
                            const ConvergenceCoeffs& coeffs, const std::vector<int>& ks,
                            const std::vector<int>& es);

}  // namespace fedcost
