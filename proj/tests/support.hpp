#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "fedcost/system.hpp"

namespace testing_support {

/// Golden-section minimiser of a unimodal f on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         double tol = 1e-12) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Root of a monotone g on [lo, hi] by plain bisection.
inline double bisect(const std::function<double(double)>& g, double lo, double hi, int iters = 200) {
  const bool rising = g(hi) > g(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((g(mid) > 0.0) == rising) hi = mid; else lo = mid;
  }
  return 0.5 * (lo + hi);
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("fedcost_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline fedcost::AveragedCosts simulation_costs(double gamma, int n = 100) {
  return fedcost::AveragedCosts{0.5, 0.2, 0.01, 0.02, gamma, n};
}

/// Random positive cost parameters spanning several orders of magnitude.
inline fedcost::AveragedCosts random_costs(std::mt19937_64& rng, int n, double gamma) {
  std::uniform_real_distribution<double> lg(-3.0, 0.0);
  auto draw = [&] { return std::pow(10.0, lg(rng)); };
  return fedcost::AveragedCosts{draw(), draw(), draw(), draw(), gamma, n};
}

}  // namespace testing_support
