#include <cmath>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "uidkit/effort.hpp"
#include "uidkit/error.hpp"
#include "uidkit/random.hpp"

using namespace uidkit;
using doctest::Approx;
using V = std::vector<double>;

TEST_CASE("effort examples") {
  CHECK(effort_sum(V{1, 2, 3}) == 6.0);
  CHECK(effort(V{2, 2}, {1.5, 0.1}).value() == Approx(2 * std::pow(2.0, 1.5) + 0.2));
  CHECK(effort(V{2, 2}, {1.5, 0.1}).value() == Approx(5.8569).epsilon(1e-4));
  CHECK(effort(V{0.3, 4.1, 2.2}, {1.0, 0.0}).value() == Approx(effort_sum(V{0.3, 4.1, 2.2})));
  CHECK(effort_from_metric(1.5, 4, {1.0, 0.25}) == Approx(7.0));
  CHECK(effort_from_metric(0.0, 9, {2.0, 0.0}) == 0.0);
  CHECK(inverse_acceptability(2.0, 3) == 6.0);
  CHECK(inverse_acceptability(2.5, 1) == 2.5);
  CHECK_THROWS_AS(effort(V{1}, {0.0, 1.0}), DomainError);
  CHECK_THROWS_AS(effort(V{1}, {1.0, -1.0}), DomainError);
}

TEST_CASE("uniform profile gives less acceptability cost at k = 2") {
  const V uniform{2, 2, 2};
  const V skewed{0.5, 0.5, 5};
  const EffortParams p{2.0, 0.0};
  CHECK(effort(uniform, p).value() < effort(skewed, p).value());
  CHECK(effort(uniform, p).value() == 12.0);
}

TEST_CASE("optimal length") {
  const auto a = optimal_length(4.0, {2.0, 1.0});
  CHECK(a.n_star == Approx(4.0));
  CHECK(a.integer == std::vector<std::int64_t>{4});
  CHECK_FALSE(a.concave);
  CHECK(uniform_effort(4.0, 4.0, {2.0, 1.0}) == Approx(8.0));
  CHECK(scan_optimal_length(4.0, {2.0, 1.0}, 100) == std::vector<std::int64_t>{4});

  const auto b = optimal_length(1.0, {2.0, 10.0});
  CHECK(b.n_star == 1.0);
  CHECK(scan_optimal_length(1.0, {2.0, 10.0}, 100) == std::vector<std::int64_t>{1});

  for (double s : {0.5, 7.0, 40.0}) {
    for (double c : {0.01, 1.0, 9.0}) {
      const auto r = optimal_length(s, {0.5, c});
      CHECK(r.concave);
      CHECK(r.n_star == 1.0);
    }
  }
  CHECK_THROWS_AS(optimal_length(0.0, {2.0, 1.0}), DomainError);
  CHECK_THROWS_AS(optimal_length(3.0, {2.0, 0.0}), DomainError);
}

TEST_CASE("integer optimum brackets the continuous one") {
  Rng rng(77);
  for (int t = 0; t < 60; ++t) {
    const double s = rng.uniform(0.5, 60.0);
    const EffortParams p{rng.uniform(1.05, 4.0), rng.uniform(0.05, 5.0)};
    const auto r = optimal_length(s, p);
    const auto scan = scan_optimal_length(s, p, 2000);
    REQUIRE_FALSE(scan.empty());
    const double lo = std::floor(r.n_star);
    const double hi = std::ceil(r.n_star);
    for (auto n : scan) CHECK((static_cast<double>(n) == lo || static_cast<double>(n) == hi));
  }
}

TEST_CASE("uniform minimizer checks") {
  const auto convex = verify_uniform_minimizer(3, 6.0, 2.0, 1000, 1);
  CHECK(convex.passed);
  CHECK(convex.trials == 1000);
  CHECK(verify_uniform_minimizer(3, 6.0, 0.5, 1000, 2).passed);
  const auto linear = verify_uniform_minimizer(5, 6.0, 1.0, 200, 3, 0.5);
  CHECK(linear.passed);
  CHECK(std::fabs(linear.worst_margin) <= 1e-9);
}

TEST_CASE("theory-check report") {
  const auto j = theory_check_report(5, 10, 100);
  CHECK(j.is_object());
  CHECK(j.at("passed").get<bool>());
  CHECK(theory_check_report(5, 10, 100).dump() == j.dump());
}
