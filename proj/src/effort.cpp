#include "uidkit/effort.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "uidkit/error.hpp"
#include "uidkit/random.hpp"

namespace uidkit {

void EffortParams::validate() const {
  if (!(k > 0.0)) throw DomainError("effort exponent k must be > 0");
  if (!(c >= 0.0)) throw DomainError("per-word cost c must be >= 0");
}

double effort_sum(std::span<const double> s) {
  if (s.empty()) throw DomainError("empty profile");
  double total = 0.0;
  for (double v : s) total += v;
  return total;
}

EffortValue effort(std::span<const double> s, const EffortParams& params) {
  params.validate();
  if (s.empty()) throw DomainError("empty profile");
  EffortValue out;
  for (double v : s) out.information += std::pow(v, params.k);
  out.length = params.c * static_cast<double>(s.size());
  return out;
}

double effort_from_metric(double uid_inverse, std::size_t n, const EffortParams& params) {
  const double len = static_cast<double>(n);
  return uid_inverse * len + params.c * len;
}

double inverse_acceptability(double uid_inverse, std::size_t n) { return uid_inverse * static_cast<double>(n); }

double uniform_effort(double total_surprisal, double n, const EffortParams& params) {
  return std::pow(total_surprisal, params.k) / std::pow(n, params.k - 1.0) + params.c * n;
}

namespace {

std::vector<std::int64_t> argmin_within(const std::vector<std::int64_t>& candidates, double total_surprisal,
                                        const EffortParams& params) {
  double best = std::numeric_limits<double>::infinity();
  for (auto n : candidates) best = std::min(best, uniform_effort(total_surprisal, static_cast<double>(n), params));
  std::vector<std::int64_t> out;
  for (auto n : candidates) {
    const double v = uniform_effort(total_surprisal, static_cast<double>(n), params);
    if (v - best <= 1e-12 * std::abs(best)) out.push_back(n);
  }
  return out;
}

}  // namespace

OptimalLength optimal_length(double total_surprisal, const EffortParams& params) {
  params.validate();
  if (!(total_surprisal > 0.0)) throw DomainError("optimal length needs total surprisal S > 0");
  OptimalLength out;
  if (params.k <= 1.0) {
    out.concave = true;
    out.integer = {1};
    return out;
  }
  if (!(params.c > 0.0)) throw DomainError("optimal length needs c > 0 when k > 1");
  out.n_star = std::max(1.0, std::pow((params.k - 1.0) / params.c, 1.0 / params.k) * total_surprisal);
  std::vector<std::int64_t> candidates{static_cast<std::int64_t>(std::floor(out.n_star))};
  const auto hi = static_cast<std::int64_t>(std::ceil(out.n_star));
  if (hi != candidates.front()) candidates.push_back(hi);
  out.integer = argmin_within(candidates, total_surprisal, params);
  return out;
}

std::vector<std::int64_t> scan_optimal_length(double total_surprisal, const EffortParams& params,
                                              std::int64_t n_max) {
  std::vector<std::int64_t> all(static_cast<std::size_t>(n_max));
  for (std::int64_t n = 1; n <= n_max; ++n) all[static_cast<std::size_t>(n - 1)] = n;
  return argmin_within(all, total_surprisal, params);
}

UniformMinimizerCheck verify_uniform_minimizer(std::size_t n, double total_surprisal, double k,
                                               std::size_t trials, std::uint64_t seed, double c) {
  if (n == 0) throw DomainError("profile length must be >= 1");
  const EffortParams params{k, c};
  const std::vector<double> uniform(n, total_surprisal / static_cast<double>(n));
  const double base = effort(uniform, params).value();
  const double tol = 1e-12 * std::max(1.0, std::abs(base));

  Rng rng(seed);
  UniformMinimizerCheck out;
  out.trials = trials;
  out.worst_margin = std::numeric_limits<double>::infinity();
  std::vector<double> sample(n);
  for (std::size_t t = 0; t < trials; ++t) {
    double sum = 0.0;
    for (auto& v : sample) {
      v = rng.exponential();
      sum += v;
    }
    for (auto& v : sample) v *= total_surprisal / sum;
    const double e = effort(sample, params).value();
    double margin = 0.0;
    if (k > 1.0) {
      margin = e - base;
    } else if (k < 1.0) {
      margin = base - e;
    } else {
      margin = -std::abs(e - base);
    }
    out.worst_margin = std::min(out.worst_margin, margin);
    if (margin < -tol) out.passed = false;
  }
  return out;
}

nlohmann::json theory_check_report(std::uint64_t seed, std::size_t draws, std::size_t trials) {
  using nlohmann::json;
  Rng rng(seed);
  json report;
  report["seed"] = seed;
  report["draws"] = draws;
  report["trials"] = trials;

  const double convex_ks[] = {1.25, 1.5, 2.0, 3.0};
  const double concave_ks[] = {0.25, 0.5};

  json uniform_rows = json::array();
  bool uniform_ok = true;
  bool jensen_ok = true;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto n = static_cast<std::size_t>(2 + rng.index(19));
    const double s = rng.uniform(1e-3, 50.0);
    const double k = convex_ks[rng.index(4)];
    const std::uint64_t trial_seed = seed * 1000003ULL + i;
    const auto check = verify_uniform_minimizer(n, s, k, trials, trial_seed);
    // Jensen: sum s^k >= N (S/N)^k, with equality at the uniform profile.
    const std::vector<double> flat(n, s / static_cast<double>(n));
    const double lhs = effort(flat, {k, 0.0}).information;
    const double rhs = static_cast<double>(n) * std::pow(s / static_cast<double>(n), k);
    const bool equality = std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, rhs);
    uniform_ok = uniform_ok && check.passed;
    jensen_ok = jensen_ok && equality && check.passed;
    uniform_rows.push_back({{"N", n}, {"S", s}, {"k", k}, {"seed", trial_seed}, {"passed", check.passed},
                            {"worst_margin", check.worst_margin}});
  }
  report["uniform_minimizer"] = {{"passed", uniform_ok}, {"cases", uniform_rows}};
  report["jensen_bound"] = {{"passed", jensen_ok}};

  json concave_rows = json::array();
  bool concave_ok = true;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto n = static_cast<std::size_t>(2 + rng.index(19));
    const double s = rng.uniform(1e-3, 50.0);
    const double k = concave_ks[rng.index(2)];
    const std::uint64_t trial_seed = seed * 2000003ULL + i;
    const auto check = verify_uniform_minimizer(n, s, k, trials, trial_seed);
    concave_ok = concave_ok && check.passed;
    concave_rows.push_back({{"N", n}, {"S", s}, {"k", k}, {"seed", trial_seed}, {"passed", check.passed}});
  }
  report["uniform_maximizer"] = {{"passed", concave_ok}, {"cases", concave_rows}};

  json length_rows = json::array();
  bool length_ok = true;
  bool convex_ok = true;
  for (std::size_t i = 0; i < draws; ++i) {
    const double k = rng.uniform(1.05, 4.0);
    const double c = rng.uniform(0.05, 5.0);
    const double scale = std::pow((k - 1.0) / c, 1.0 / k);
    // Keep N* inside the scanned range.
    const double s = rng.uniform(0.01, 5000.0 / std::max(scale, 1e-9));
    const EffortParams params{k, c};
    const auto analytic = optimal_length(s, params);
    const auto scanned = scan_optimal_length(s, params, 10000);
    bool ok = !scanned.empty();
    for (auto nn : scanned) {
      ok = ok && (nn == static_cast<std::int64_t>(std::floor(analytic.n_star)) ||
                  nn == static_cast<std::int64_t>(std::ceil(analytic.n_star)));
    }
    const double n0 = std::max(2.0, std::floor(analytic.n_star));
    // c N is linear, so only the information term contributes curvature.
    const EffortParams info{k, 0.0};
    const double second = uniform_effort(s, n0 + 1.0, info) - 2.0 * uniform_effort(s, n0, info) +
                          uniform_effort(s, n0 - 1.0, info);
    convex_ok = convex_ok && second > 0.0;
    length_ok = length_ok && ok;
    length_rows.push_back({{"S", s}, {"k", k}, {"c", c}, {"n_star", analytic.n_star}, {"scan_argmin", scanned},
                           {"passed", ok}});
  }
  report["optimal_length"] = {{"passed", length_ok}, {"cases", length_rows}};
  report["convex_in_length"] = {{"passed", convex_ok}};
  report["passed"] = uniform_ok && jensen_ok && concave_ok && length_ok && convex_ok;
  return report;
}

}  // namespace uidkit
