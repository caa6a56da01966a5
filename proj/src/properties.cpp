#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "fedcost/optimizer.hpp"

namespace fedcost {

namespace {

constexpr double kSlack = 1e-9;

std::string join(const std::vector<double>& values) {
  std::ostringstream s;
  s << std::setprecision(6);
  for (std::size_t i = 0; i < values.size(); ++i) s << (i ? " " : "") << values[i];
  return s.str();
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1] * (1.0 + kSlack) + kSlack) return false;
  }
  return true;
}

bool non_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[i - 1] * (1.0 - kSlack) - kSlack) return false;
  }
  return true;
}

using Mutator = std::function<void(AveragedCosts&, double)>;

std::vector<double> sweep(const AveragedCosts& base, const std::vector<double>& multipliers,
                          const Mutator& mutate, const std::function<double(const AveragedCosts&)>& f) {
  std::vector<double> out;
  for (double m : multipliers) {
    AveragedCosts c = base;
    mutate(c, m);
    out.push_back(f(c));
  }
  return out;
}

PropertyCheck monotone_check(std::string name, const std::vector<double>& values, bool increasing,
                             const std::string& axis) {
  PropertyCheck check;
  check.name = std::move(name);
  check.passed = increasing ? non_decreasing(values) : non_increasing(values);
  check.detail = axis + ": " + join(values);
  return check;
}

}  // namespace

bool PropertyReport::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

PropertyReport verify_properties(const AveragedCosts& costs, const ConvergenceCoeffs& coeffs,
                                 const PropertyGrids& grids) {
  PropertyReport report;
  const double fixed_k = std::clamp(grids.fixed_k, 1.0, static_cast<double>(costs.n));
  auto k_star = [&](const AveragedCosts& c) { return solve_k_given_e(grids.fixed_e, c, coeffs); };
  auto e_star = [&](const AveragedCosts& c) { return solve_e_given_k(fixed_k, c, coeffs); };
  auto with_gamma = [&](double g) {
    AveragedCosts c = costs;
    c.gamma = g;
    return c;
  };

  // K* against gamma at fixed E, and jointly via ACS.
  {
    std::vector<double> ks;
    std::vector<double> joint;
    for (double g : grids.gammas) {
      ks.push_back(k_star(with_gamma(g)));
      joint.push_back(acs_optimize(with_gamma(g), coeffs).k);
    }
    report.checks.push_back(
        monotone_check("k_decreases_in_gamma_fixed_e", ks, false, "gamma sweep K'"));
    report.checks.push_back(
        monotone_check("k_decreases_in_gamma_joint", joint, false, "gamma sweep K*"));
    PropertyCheck unit;
    unit.name = "k_is_one_at_gamma_one";
    unit.passed = k_star(with_gamma(1.0)) == 1.0 && acs_optimize(with_gamma(1.0), coeffs).k == 1;
    unit.detail = "K'(1) = " + join({k_star(with_gamma(1.0))});
    report.checks.push_back(unit);
  }

  // K* against system parameters.
  {
    const AveragedCosts mid = with_gamma(grids.mid_gamma);
    const auto& mult = grids.multipliers;
    report.checks.push_back(monotone_check(
        "k_increases_in_t_p", sweep(mid, mult, [](AveragedCosts& c, double m) { c.t_p *= m; }, k_star),
        true, "t_p multiplier"));
    report.checks.push_back(monotone_check(
        "k_decreases_in_t_m", sweep(mid, mult, [](AveragedCosts& c, double m) { c.t_m *= m; }, k_star),
        false, "t_m multiplier"));
    report.checks.push_back(monotone_check(
        "k_decreases_in_e_p", sweep(mid, mult, [](AveragedCosts& c, double m) { c.e_p *= m; }, k_star),
        false, "e_p multiplier"));
    report.checks.push_back(monotone_check(
        "k_decreases_in_e_m", sweep(mid, mult, [](AveragedCosts& c, double m) { c.e_m *= m; }, k_star),
        false, "e_m multiplier"));
    report.checks.push_back(monotone_check(
        "k_increases_in_tp_over_tm_gamma0",
        sweep(with_gamma(0.0), mult, [](AveragedCosts& c, double m) { c.t_p *= m; }, k_star), true,
        "t_p/t_m multiplier"));
    const auto energy_free = sweep(
        with_gamma(1.0), mult,
        [](AveragedCosts& c, double m) {
          c.e_p *= m;
          c.e_m /= m;
        },
        k_star);
    PropertyCheck indep;
    indep.name = "k_independent_of_energy_gamma1";
    indep.passed = std::all_of(energy_free.begin(), energy_free.end(), [](double k) { return k == 1.0; });
    indep.detail = "e_p/e_m multiplier: " + join(energy_free);
    report.checks.push_back(indep);
  }

  // Cost first decreases then increases in E for every K.
  {
    PropertyCheck uni;
    uni.name = "cost_unimodal_in_e";
    uni.passed = true;
    std::ostringstream detail;
    for (int k : grids.k_values) {
      if (k < 1 || k > costs.n) continue;
      int sign_changes = 0;
      int last_sign = 0;
      bool rise_then_fall = false;
      double prev = p3_objective(k, 1, costs, coeffs);
      for (int e = 2; e <= grids.e_max; ++e) {
        const double cur = p3_objective(k, e, costs, coeffs);
        const int sign = cur > prev ? 1 : (cur < prev ? -1 : 0);
        if (sign != 0) {
          if (last_sign != 0 && sign != last_sign) ++sign_changes;
          if (last_sign == 1 && sign == -1) rise_then_fall = true;
          last_sign = sign;
        }
        prev = cur;
      }
      detail << (detail.tellp() > 0 ? " " : "") << "K=" << k << ":" << sign_changes;
      uni.passed = uni.passed && sign_changes <= 1 && !rise_then_fall;
    }
    uni.detail = "sign changes per K " + detail.str();
    report.checks.push_back(uni);
  }

  // E* against system parameters.
  {
    const AveragedCosts mid = with_gamma(grids.mid_gamma);
    const auto& mult = grids.multipliers;
    report.checks.push_back(monotone_check(
        "e_decreases_in_t_p", sweep(mid, mult, [](AveragedCosts& c, double m) { c.t_p *= m; }, e_star),
        false, "t_p multiplier"));
    report.checks.push_back(monotone_check(
        "e_decreases_in_e_p", sweep(mid, mult, [](AveragedCosts& c, double m) { c.e_p *= m; }, e_star),
        false, "e_p multiplier"));
    report.checks.push_back(monotone_check(
        "e_increases_in_tm_over_tp_gamma0",
        sweep(with_gamma(0.0), mult, [](AveragedCosts& c, double m) { c.t_m *= m; }, e_star), true,
        "t_m/t_p multiplier"));
    report.checks.push_back(monotone_check(
        "e_increases_in_em_over_ep_gamma1",
        sweep(with_gamma(1.0), mult, [](AveragedCosts& c, double m) { c.e_m *= m; }, e_star), true,
        "e_m/e_p multiplier"));
  }
  return report;
}

void write_properties_csv(std::ostream& out, const PropertyReport& report) {
  out << "property,passed,detail\n";
  for (const auto& c : report.checks)
    out << c.name << ',' << (c.passed ? 1 : 0) << ',' << c.detail << '\n';
}

}  // namespace fedcost
