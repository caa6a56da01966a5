#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedcost/costmodel.hpp"
#include "fedcost/datagen.hpp"
#include "fedcost/learner.hpp"
#include "fedcost/system.hpp"

namespace fedcost {

/// Stationary point in K of the relaxed objective at fixed E, clamped to
/// [1, N]. Returns 1 when gamma = 1 (objective increasing in K).
double solve_k_given_e(double e, const AveragedCosts& costs, const ConvergenceCoeffs& coeffs);

class CeilingError : public std::runtime_error {
 public:
  explicit CeilingError(double ceiling);
  double ceiling() const { return ceiling_; }

 private:
  double ceiling_;
};

inline constexpr double kDefaultEMax = 1e6;

/// Unique positive root of phi(K) (2 a E^3 + b E^2) = rho b, with
/// a = (1-g) t_p + g K e_p and b = (1-g) t_m K + g K e_m, by bisection
/// (absolute tolerance 1e-9), clamped to >= 1. Throws CeilingError when the
/// root lies above `e_max`.
double solve_e_given_k(double k, const AveragedCosts& costs, const ConvergenceCoeffs& coeffs,
                       double e_max = kDefaultEMax);

struct AcsConfig {
  double k0 = 1.0;
  double e0 = 1.0;
  double tolerance = 1e-3;  // on ||z_j - z_{j-1}||
  int max_sweeps = 100;
  double e_max = kDefaultEMax;  // E iterates are projected into [1, e_max]
};

struct Solution {
  int k = 1;
  int e = 1;
  int rounds = 1;  // ceil(rounds_needed(k, e))
  double objective = 0.0;
  std::vector<std::pair<double, double>> trajectory;  // continuous (K, E) iterates
  bool converged = true;
};

/// Alternate convex search on the relaxed objective followed by the best of
/// the four floor/ceil roundings.
Solution acs_optimize(const AveragedCosts& costs, const ConvergenceCoeffs& coeffs,
                      const AcsConfig& config = {});

struct IntRange {
  int lo = 1;
  int hi = 1;
};

/// Exhaustive integer argmin; ties go to smaller K, then smaller E.
Solution grid_search(const AveragedCosts& costs, const ConvergenceCoeffs& coeffs,
                     IntRange k_range, IntRange e_range);

// ---------------------------------------------------------------------------
// rho estimation from pilot runs

struct PilotRecord {
  int k = 1;
  int e = 1;
  int rounds_a = 0;  // first round (1-based count) with loss <= loss_a
  int rounds_b = 0;  // first round with loss <= loss_b
};

struct EstimationPlan {
  std::vector<std::pair<int, int>> pilots;  // (K_i, E_i)
  double loss_a = 0.0;
  double loss_b = 0.0;  // loss_b < loss_a
  int max_rounds = 1000;

  void validate(int num_clients) const;
};

class EstimationError : public std::runtime_error {
 public:
  enum class Kind { kNoUsablePairs, kPilotTimeout, kInvalidPlan };
  EstimationError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct RhoEstimate {
  double rho = 0.0;
  std::vector<double> pair_estimates;  // surviving pairwise estimates
  int discarded_pairs = 0;
};

inline constexpr double kMinRatioSeparation = 0.05;

/// Rounds elapsed between the two loss crossings of one pilot.
struct PilotSpan {
  double k = 1.0;
  double e = 1.0;
  double rounds = 0.0;
};

/// Averages the pairwise solutions of
///   E_i dR_i / (E_j dR_j) = (rho + phi_i E_i^2) / (rho + phi_j E_j^2)
/// over all pilot pairs, dropping pairs with |1 - ratio| < 0.05 or rho <= 0.
RhoEstimate rho_from_spans(const std::vector<PilotSpan>& spans, int num_clients);

RhoEstimate rho_from_pilots(const std::vector<PilotRecord>& pilots, int num_clients);

/// Runs one FedAvg pilot per (K_i, E_i) until loss_b and records the
/// crossing rounds. `base` supplies batch size, eta0, seed, strategy.
std::vector<PilotRecord> run_pilots(const EstimationPlan& plan, const FederatedDataset& dataset,
                                    const SystemProfile& profile, const TrainConfig& base);

/// Pilot iterations over final-run iterations: sum K_i E_i R_ib / (K* E* R*).
double estimation_overhead(const std::vector<PilotRecord>& pilots, const Solution& solution);

struct EstimationResult {
  RhoEstimate estimate;
  std::vector<PilotRecord> pilots;
};

EstimationResult estimate_rho(const EstimationPlan& plan, const FederatedDataset& dataset,
                              const SystemProfile& profile, const TrainConfig& base);

/// pilot_K,pilot_E,R_a,R_b
void write_estimation_csv(std::ostream& out, const std::vector<PilotRecord>& pilots);

/// K_star,E_star,R_star,predicted_cost,overhead_ratio
void write_solution_csv(std::ostream& out, const Solution& solution, double overhead_ratio);

// ---------------------------------------------------------------------------
// structural properties of the optimum

struct PropertyGrids {
  std::vector<double> gammas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> multipliers{0.25, 0.5, 1.0, 2.0, 4.0};
  double fixed_e = 20.0;  // E held fixed for the K-side properties
  double fixed_k = 10.0;  // K held fixed for the E-side properties
  double mid_gamma = 0.5;
  std::vector<int> k_values{1, 2, 5, 10, 20, 50, 100};
  int e_max = 100;  // unimodality checked over integer E in [1, e_max]
};

struct PropertyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct PropertyReport {
  std::vector<PropertyCheck> checks;
  bool all_passed() const;
};

PropertyReport verify_properties(const AveragedCosts& costs, const ConvergenceCoeffs& coeffs,
                                 const PropertyGrids& grids = {});

/// property,passed,detail
void write_properties_csv(std::ostream& out, const PropertyReport& report);

}  // namespace fedcost
