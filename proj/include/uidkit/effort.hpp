#pragma once

// Processing-effort and acceptability models over surprisal profiles, and
// executable checks of the uniform-minimizer and optimal-length results.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace uidkit {

struct EffortParams {
  double k = 1.0;  // power on per-word surprisal
  double c = 0.0;  // per-word cost

  void validate() const;
};

struct EffortValue {
  double information = 0.0;  // sum s^k
  double length = 0.0;       // c * N

  double value() const { return information + length; }
};

/// sum s
double effort_sum(std::span<const double> s);

/// sum s^k + c N. Requires k > 0 and c >= 0.
EffortValue effort(std::span<const double> s, const EffortParams& params);

/// uid^-1 * N + c N
double effort_from_metric(double uid_inverse, std::size_t n, const EffortParams& params);

/// uid^-1 * N (no length penalty).
double inverse_acceptability(double uid_inverse, std::size_t n);

/// Effort of a uniform profile of length n carrying total surprisal S:
/// S^k / n^(k-1) + c n.
double uniform_effort(double total_surprisal, double n, const EffortParams& params);

struct OptimalLength {
  double n_star = 1.0;                 // continuous minimizer, >= 1
  std::vector<std::int64_t> integer;   // floor/ceil candidates attaining the minimum
  bool concave = false;                // k <= 1: minimized at N = 1 regardless
};

/// N* = max(1, ((k-1)/c)^(1/k) S) for k > 1, c > 0, S > 0.
OptimalLength optimal_length(double total_surprisal, const EffortParams& params);

/// Argmin of uniform_effort over integers [1, n_max] by exhaustive scan.
/// Ties within a relative 1e-12 are all returned.
std::vector<std::int64_t> scan_optimal_length(double total_surprisal, const EffortParams& params,
                                              std::int64_t n_max);

struct UniformMinimizerCheck {
  bool passed = true;
  double worst_margin = 0.0;  // min over samples of signed (expected-direction) gap
  std::size_t trials = 0;
};

/// Samples `trials` profiles uniformly from the simplex {s >= 0, sum s = S}
/// and checks that the uniform profile has the least effort (k > 1), the
/// greatest effort (k < 1) or equal effort (k == 1).
UniformMinimizerCheck verify_uniform_minimizer(std::size_t n, double total_surprisal, double k,
                                               std::size_t trials, std::uint64_t seed, double c = 1.0);

/// Full randomized suite rendered as the `theory-check` JSON report.
nlohmann::json theory_check_report(std::uint64_t seed, std::size_t draws = 100, std::size_t trials = 1000);

}  // namespace uidkit
