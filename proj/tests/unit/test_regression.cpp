#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "uidkit/error.hpp"
#include "uidkit/random.hpp"
#include "uidkit/regression.hpp"

using namespace uidkit;
using doctest::Approx;
using V = std::vector<double>;

namespace {

// Random-intercept data whose residuals average exactly zero inside each
// group, so the ML intercept variance sits on the boundary.
Dataset balanced_groups(std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  V x;
  for (int g = 0; g < 20; ++g) {
    V e(8);
    for (auto& v : e) v = rng.normal(0.0, 1.0);
    const double m = std::accumulate(e.begin(), e.end(), 0.0) / 8.0;
    for (int i = 0; i < 8; ++i) {
      const double xi = static_cast<double>(i) - 3.5;
      x.push_back(xi);
      d.response.push_back(1.0 + 2.0 * xi + (e[static_cast<std::size_t>(i)] - m));
      d.groups.push_back("g" + std::to_string(g));
    }
  }
  d.add_column("x", x);
  return d;
}

Dataset gaussian_data(std::uint64_t seed, std::size_t n, double b_z) {
  Rng rng(seed);
  Dataset d;
  V x(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    z[i] = rng.normal();
    d.response.push_back(0.5 + 1.0 * x[i] + b_z * z[i] + rng.normal());
  }
  d.add_column("x", x);
  d.add_column("z", z);
  return d;
}

}  // namespace

TEST_CASE("OLS solves the normal equations") {
  Dataset d;
  d.response = {1, 3, 5};
  d.add_column("x", {0, 1, 2});
  const ModelSpec spec{"y", {"x"}, {}, Family::gaussian};
  const auto f = fit_linear(spec, d);
  CHECK(f.coefficient(kIntercept) == Approx(1.0).epsilon(1e-12));
  CHECK(f.coefficient("x") == Approx(2.0).epsilon(1e-12));
  CHECK(f.sigma2 == Approx(0.0).epsilon(1e-20));

  Dataset c;
  c.response = {4, 4, 4, 4};
  c.add_column("x", {0, 1, 5, 2});
  const auto g = fit_linear(spec, c);
  CHECK(g.coefficient("x") == Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(g.coefficient(kIntercept) == Approx(4.0));
}

TEST_CASE("OLS residuals are orthogonal to the design") {
  const auto d = gaussian_data(3, 300, 0.7);
  const ModelSpec spec{"y", {"x", "z"}, {}, Family::gaussian};
  const auto f = fit_linear(spec, d);
  double r1 = 0, rx = 0, rz = 0;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const double r = d.response[i] - f.coefficient(kIntercept) - f.coefficient("x") * d.column("x")[i] -
                     f.coefficient("z") * d.column("z")[i];
    r1 += r;
    rx += r * d.column("x")[i];
    rz += r * d.column("z")[i];
  }
  CHECK(std::fabs(r1) < 1e-9);
  CHECK(std::fabs(rx) < 1e-9);
  CHECK(std::fabs(rz) < 1e-9);
}

TEST_CASE("rank deficiency names the collinear columns") {
  Dataset d;
  d.response = {1, 2, 3, 5};
  d.add_column("a", {1, 2, 3, 4});
  d.add_column("b", {2, 4, 6, 8});
  try {
    fit_linear({"y", {"a", "b"}, {}, Family::gaussian}, d);
    FAIL("expected an error");
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    CHECK(msg.substr(msg.find("columns: ")) == "columns: a, b");
  }
}

TEST_CASE("intercept-only logistic fit") {
  Dataset d;
  d.response = {1, 1, 0, 1};
  const ModelSpec spec{"y", {}, {}, Family::bernoulli};
  const auto f = fit_logistic(spec, d);
  CHECK(f.coefficient(kIntercept) == Approx(std::log(3.0)).epsilon(1e-5));
  const auto ll = row_log_likelihood(spec, f, d);
  const double mean_ll = std::accumulate(ll.begin(), ll.end(), 0.0) / 4.0;
  CHECK(mean_ll == Approx(0.75 * std::log(0.75) + 0.25 * std::log(0.25)).epsilon(1e-6));
  CHECK(mean_ll == Approx(-0.5623).epsilon(1e-4));
}

TEST_CASE("all-one labels stay finite under the ridge") {
  Dataset d;
  d.response = V(50, 1.0);
  const ModelSpec spec{"y", {}, {}, Family::bernoulli};
  const auto f = fit_logistic(spec, d);
  CHECK(std::isfinite(f.coefficient(kIntercept)));
  CHECK(1.0 / (1.0 + std::exp(-f.coefficient(kIntercept))) > 0.99);
}

TEST_CASE("IRLS deviance never increases") {
  Rng rng(9);
  Dataset d;
  V x(500);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.normal();
    d.response.push_back(rng.bernoulli(1.0 / (1.0 + std::exp(-(0.3 + 1.7 * x[i])))) ? 1.0 : 0.0);
  }
  d.add_column("x", x);
  const auto f = fit_logistic({"y", {"x"}, {}, Family::bernoulli}, d);
  REQUIRE(f.deviance_trace.size() >= 2);
  for (std::size_t i = 1; i < f.deviance_trace.size(); ++i) {
    CHECK(f.deviance_trace[i] <= f.deviance_trace[i - 1] + 1e-9);
  }
  CHECK(f.converged);
}

TEST_CASE("mixed model with no group variance reduces to OLS") {
  const auto d = balanced_groups(41);
  const ModelSpec mixed{"y", {"x"}, {kIntercept}, Family::gaussian};
  const ModelSpec plain{"y", {"x"}, {}, Family::gaussian};
  const auto m = fit_lmm(mixed, d);
  const auto o = fit_linear(plain, d);
  REQUIRE(m.random_variances.size() == 1);
  CHECK(m.random_variances[0] < 1e-8);
  CHECK(m.boundary.at(0));
  CHECK(std::fabs(m.coefficient(kIntercept) - o.coefficient(kIntercept)) < 1e-6);
  CHECK(std::fabs(m.coefficient("x") - o.coefficient("x")) < 1e-6);
}

TEST_CASE("mixed model likelihood properties") {
  Rng rng(8);
  Dataset d;
  V x;
  for (int g = 0; g < 30; ++g) {
    const double u = rng.normal(0.0, 1.5);
    const double b = rng.normal(0.0, 0.5);
    for (int i = 0; i < 12; ++i) {
      const double xi = rng.normal();
      x.push_back(xi);
      d.response.push_back(2.0 + u + (1.0 + b) * xi + rng.normal(0.0, 0.8));
      d.groups.push_back("s" + std::to_string(g));
    }
  }
  d.add_column("x", x);
  const ModelSpec spec{"y", {"x"}, {kIntercept, "x"}, Family::gaussian};
  const auto f = fit_lmm(spec, d);
  const V zero{0.0, 0.0};
  CHECK(f.log_likelihood >= -0.5 * lmm_profiled_deviance(spec, d, zero) - 1e-9);
  CHECK(f.deviance == Approx(-2.0 * f.log_likelihood));

  // Row order does not matter.
  std::vector<std::size_t> perm(d.rows());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
  const auto shuffled = d.subset(perm);
  CHECK(lmm_profiled_deviance(spec, shuffled, f.theta) ==
        Approx(lmm_profiled_deviance(spec, d, f.theta)).epsilon(1e-9));
  const auto g = fit_lmm(spec, shuffled);
  CHECK(g.log_likelihood == Approx(f.log_likelihood).epsilon(1e-7));
}

TEST_CASE("spec validation") {
  Dataset d;
  d.response = {1, 0, 1};
  d.add_column("x", {1, 2, 3});
  CHECK_THROWS_AS(ModelSpec({"y", {"nope"}, {}, Family::gaussian}).validate(d), InputError);
  CHECK_THROWS_AS(ModelSpec({"y", {"x"}, {kIntercept}, Family::gaussian}).validate(d), InputError);
  d.groups = {"a", "b", "a"};
  CHECK_THROWS_AS(ModelSpec({"y", {"x"}, {kIntercept}, Family::bernoulli}).validate(d), InputError);
  const auto with = ModelSpec{"y", {"x"}, {kIntercept}, Family::gaussian}.with_predictor("z");
  CHECK(with.fixed_effects == std::vector<std::string>{"x", "z"});
  CHECK(std::find(with.random_effects.begin(), with.random_effects.end(), "z") != with.random_effects.end());
}

TEST_CASE("cross-validated comparison") {
  const ModelSpec base{"y", {"x"}, {}, Family::gaussian};

  SUBCASE("constant predictor contributes nothing") {
    auto d = gaussian_data(5, 400, 0.0);
    d.add_column("zero", V(d.rows(), 0.0));
    const auto c = delta_loglik(base, "zero", d, 10, 1);
    CHECK(std::fabs(c.mean) < 1e-9);
  }
  SUBCASE("planted predictor is detected") {
    const auto d = gaussian_data(6, 2000, 0.4);
    const auto c = delta_loglik(base, "z", d, 10, 1);
    CHECK(c.mean > 3.0 * c.se);
    CHECK(c.se >= 0.0);
    CHECK(c.n() == d.rows());
    CHECK(c.fold_means.size() == 10);
  }
  SUBCASE("swapping the models negates every row") {
    const auto d = gaussian_data(7, 300, 0.2);
    const auto aug = base.with_predictor("z");
    const auto ab = compare_models(base, aug, d, 5, 3);
    const auto ba = compare_models(aug, base, d, 5, 3);
    REQUIRE(ab.delta.size() == ba.delta.size());
    for (std::size_t i = 0; i < ab.delta.size(); ++i) CHECK(ab.delta[i] == -ba.delta[i]);
    CHECK(ab.mean == Approx(-ba.mean));
  }
  SUBCASE("fold labels are a pure function of the seed") {
    CHECK(fold_assignment(1000, 10, 42) == fold_assignment(1000, 10, 42));
    CHECK(fold_assignment(1000, 10, 42) != fold_assignment(1000, 10, 43));
    const auto f = fold_assignment(1000, 10, 42);
    CHECK(*std::min_element(f.begin(), f.end()) == 0);
    CHECK(*std::max_element(f.begin(), f.end()) == 9);
  }
  SUBCASE("models must differ by one predictor") {
    const auto d = gaussian_data(8, 50, 0.0);
    CHECK_THROWS_AS(compare_models(base, base, d, 5, 1), InputError);
  }
}

TEST_CASE("paired t-test") {
  const V a{1, 2, 3};
  const V b{0, 0, 0};
  const auto t = paired_ttest(a, b, 1);
  CHECK(t.t == Approx(2.0 / (1.0 / std::sqrt(3.0))));
  CHECK(t.t == Approx(3.464).epsilon(1e-3));
  CHECK(t.dof == 2.0);
  CHECK(t.p == Approx(0.03708995011372426).epsilon(1e-9));
  CHECK(t.mean_difference == Approx(2.0));
  CHECK_THROWS_AS(paired_ttest(a, a, 1), DomainError);
  CHECK_THROWS_AS(paired_ttest(V{1}, V{0}, 1), DomainError);
  CHECK(paired_ttest(a, b, 8).threshold == Approx(1.25e-4));
  CHECK_FALSE(paired_ttest(a, b, 8).significant);
  CHECK(aggregate_means(V{1, 2, 3, 5}, std::vector<std::string>{"x", "y", "x", "y"}) == V{2, 3.5});
}

TEST_CASE("correlation") {
  CHECK(correlate(V{1, 2, 3}, V{2, 4, 6}) == Approx(1.0));
  CHECK(correlate(V{1, 2, 3}, V{6, 4, 2}) == Approx(-1.0));
  const V x{2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 6.1, 0.7, 4.9};
  const V y{1.0, 2.2, 1.5, 3.9, 2.8, 2.0, 2.5, 4.4, 0.2, 2.6};
  CHECK(std::fabs(correlate(x, y) - 0.9530846113541469) <= 1e-12);
  CHECK(std::fabs(correlate(x, y, CorrelationMethod::spearman) - 0.9393939393939394) <= 1e-12);
  CHECK(ranks(V{3, 1, 3, 2}) == V{3.5, 1, 3.5, 2});
  CHECK_THROWS_AS(correlate(V{1, 1, 1}, V{1, 2, 3}), DomainError);
}
