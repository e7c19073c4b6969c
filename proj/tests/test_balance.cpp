#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "denc/balance.hpp"

#include "support/test_helpers.hpp"

using namespace denc;

namespace {

FactorSpace make_factors(std::size_t m, std::size_t n, std::size_t kd,
                         std::uint64_t seed) {
  FactorSpace fs;
  fs.user_factors = Table(m, kd);
  fs.item_factors = Table(n, kd);
  Rng rng(seed);
  for (auto& v : fs.user_factors.values) v = rng.next_normal();
  for (auto& v : fs.item_factors.values) v = rng.next_normal();
  return fs;
}

Table random_points(std::size_t l, std::size_t dim, std::uint64_t seed) {
  Table t(l, dim);
  Rng rng(seed);
  for (auto& v : t.values) v = rng.next_normal();
  return t;
}

double plan_cost(const Table& gamma, const Table& a, const Table& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      s += gamma.at(i, j) * std::sqrt(squared_distance(a.row(i), b.row(j)));
    }
  }
  return s;
}

}  // namespace

TEST_CASE("balanced batches pull rows from the right cells") {
  const std::size_t m = 12, n = 9, kd = 3;
  auto fs = make_factors(m, n, kd, 4);
  Dataset ds;
  ds.user_count = m;
  ds.item_count = n;
  Rng rng(8);
  while (ds.triples.size() < 30) {
    const auto u = static_cast<user_id>(rng.next_below(m));
    const auto i = static_cast<item_id>(rng.next_below(n));
    if (ds.observed.insert(pair_key(u, i)).second) {
      ds.triples.push_back({u, i, 3.0});
    }
  }

  const std::size_t l = 10;
  const auto batch = sample_balanced_batch(fs, ds, l, 77);
  REQUIRE(batch.exposed.rows == l);
  REQUIRE(batch.unexposed.rows == l);
  REQUIRE(batch.exposed.cols == 2 * kd);
  REQUIRE(batch.exposed_pairs.size() == l);
  REQUIRE(batch.unexposed_pairs.size() == l);

  for (std::size_t r = 0; r < l; ++r) {
    const auto [u, i] = batch.exposed_pairs[r];
    CHECK(ds.is_observed(u, i));
    for (std::size_t k = 0; k < kd; ++k) {
      CHECK(batch.exposed.at(r, k) == fs.user_factors.at(u, k));
      CHECK(batch.exposed.at(r, kd + k) == fs.item_factors.at(i, k));
    }
    const auto [u2, i2] = batch.unexposed_pairs[r];
    CHECK_FALSE(ds.is_observed(u2, i2));
    for (std::size_t k = 0; k < kd; ++k) {
      CHECK(batch.unexposed.at(r, k) == fs.user_factors.at(u2, k));
      CHECK(batch.unexposed.at(r, kd + k) == fs.item_factors.at(i2, k));
    }
  }

  const auto again = sample_balanced_batch(fs, ds, l, 77);
  CHECK(again.exposed_pairs == batch.exposed_pairs);
  CHECK(again.unexposed_pairs == batch.unexposed_pairs);
  CHECK(again.exposed.values == batch.exposed.values);

  const auto other = sample_balanced_batch(fs, ds, l, 78);
  CHECK(other.exposed_pairs != batch.exposed_pairs);
}

TEST_CASE("balanced batch sampling validates sizes") {
  auto fs = make_factors(3, 3, 2, 4);
  Dataset ds = testsupport::make_dataset(3, 3, {{0, 0, 3}, {1, 1, 4}});
  CHECK_THROWS_AS(sample_balanced_batch(fs, ds, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_balanced_batch(fs, ds, 3, 1), std::invalid_argument);

  Dataset dense = testsupport::make_full_dataset(3, 3, 5);
  dense.triples.pop_back();  // 8 observed, 1 unexposed cell
  CHECK_THROWS_AS(sample_balanced_batch(fs, dense, 2, 1),
                  std::invalid_argument);

  auto wrong = make_factors(4, 3, 2, 4);
  CHECK_THROWS_AS(sample_balanced_batch(wrong, ds, 2, 1),
                  std::invalid_argument);
}

TEST_CASE("cost matrix holds pairwise euclidean distances") {
  Table a(2, 2), b(2, 2);
  a.at(0, 0) = 0.0;
  a.at(0, 1) = 0.0;
  a.at(1, 0) = 3.0;
  a.at(1, 1) = 4.0;
  b.at(0, 0) = 0.0;
  b.at(0, 1) = 0.0;
  b.at(1, 0) = 1.0;
  b.at(1, 1) = 0.0;
  const auto c = cost_matrix(a, b);
  CHECK(c.at(0, 0) == Catch::Approx(0.0));
  CHECK(c.at(0, 1) == Catch::Approx(1.0));
  CHECK(c.at(1, 0) == Catch::Approx(5.0));
  CHECK(c.at(1, 1) == Catch::Approx(std::sqrt(4.0 + 16.0)));

  Table wrong(2, 3);
  CHECK_THROWS_AS(cost_matrix(a, wrong), std::invalid_argument);
}

TEST_CASE("exact transport oracle on a hand-solvable instance") {
  // identity assignment is optimal: diag 1,2 vs off-diag 10
  Table c(2, 2);
  c.at(0, 0) = 1.0;
  c.at(1, 1) = 2.0;
  c.at(0, 1) = 10.0;
  c.at(1, 0) = 10.0;
  CHECK(exact_wasserstein_oracle(c) == Catch::Approx(1.5));

  // crossing assignment is optimal
  c.at(0, 0) = 10.0;
  c.at(1, 1) = 10.0;
  c.at(0, 1) = 1.0;
  c.at(1, 0) = 3.0;
  CHECK(exact_wasserstein_oracle(c) == Catch::Approx(2.0));

  Table big(9, 9);
  CHECK_THROWS_AS(exact_wasserstein_oracle(big), std::invalid_argument);
  Table rect(2, 3);
  CHECK_THROWS_AS(exact_wasserstein_oracle(rect), std::invalid_argument);
}

TEST_CASE("sinkhorn satisfies the marginals and brackets the optimum") {
  Rng seeds(derive_stream(19, "sinkhorn_cases"));
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t l = 2 + seeds.next_below(5);  // 2..6
    const auto a = random_points(l, 3, seeds.next_u64());
    const auto b = random_points(l, 3, seeds.next_u64());
    const auto c = cost_matrix(a, b);

    double mean_c = 0.0;
    for (double v : c.values) mean_c += v;
    mean_c /= static_cast<double>(c.values.size());

    // Dual residuals on near-matching instances decay only algebraically
    // once the plan has locked onto the optimal permutation, so the
    // stopping tolerance is set at the plan-quality scale rather than
    // machine precision; the returned plan's own marginals are exact
    // because it is rounded onto the transport polytope.
    const auto res =
        sinkhorn_wasserstein(c, 0.01 * mean_c, 200000, 1e-6);
    REQUIRE(res.converged);
    CHECK(res.plan.marginal_error < 1e-6);

    for (double g : res.plan.gamma.values) CHECK(g >= 0.0);

    const double exact = exact_wasserstein_oracle(c);
    INFO("l=" << l << " sinkhorn=" << res.distance << " exact=" << exact);
    // a feasible plan can never beat the optimum
    CHECK(res.distance >= exact - 1e-9);
    CHECK(res.distance <= exact * 1.05 + 1e-9);
  }
}

TEST_CASE("sinkhorn reports non-convergence without throwing") {
  const auto a = random_points(4, 3, 2);
  const auto b = random_points(4, 3, 3);
  const auto c = cost_matrix(a, b);
  const auto res = sinkhorn_wasserstein(c, 1e-4, 1, 1e-14);
  CHECK_FALSE(res.converged);
  CHECK(res.iterations == 1);
  CHECK(std::isfinite(res.distance));

  CHECK_THROWS_AS(sinkhorn_wasserstein(c, 0.0), std::invalid_argument);
  Table rect(2, 3);
  CHECK_THROWS_AS(sinkhorn_wasserstein(rect, 0.1), std::invalid_argument);
}

TEST_CASE("frozen-plan gradients match finite differences") {
  Rng seeds(derive_stream(23, "frozen_fd"));
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t l = 3, dim = 2;
    auto a = random_points(l, dim, seeds.next_u64());
    auto b = random_points(l, dim, seeds.next_u64());
    const auto c = cost_matrix(a, b);
    const auto res = sinkhorn_wasserstein(c, 0.05, 5000, 1e-9);
    const auto grads = frozen_plan_grads(res.plan, a, b);

    auto value = [&] { return plan_cost(res.plan.gamma, a, b); };
    for (std::size_t i = 0; i < l; ++i) {
      for (std::size_t k = 0; k < dim; ++k) {
        const double fd_a =
            testsupport::central_difference(value, a.at(i, k), 1e-6);
        REQUIRE(testsupport::gradient_rel_error(grads.d_a.at(i, k), fd_a) <
                1e-4);
        const double fd_b =
            testsupport::central_difference(value, b.at(i, k), 1e-6);
        REQUIRE(testsupport::gradient_rel_error(grads.d_b.at(i, k), fd_b) <
                1e-4);
      }
    }
  }
}

TEST_CASE("frozen-plan gradients validate shapes and skip coincident points") {
  auto a = random_points(3, 2, 1);
  auto b = random_points(4, 2, 2);
  TransportPlan plan;
  plan.gamma = Table(3, 3);
  CHECK_THROWS_AS(frozen_plan_grads(plan, a, b), std::invalid_argument);

  // coincident rows contribute zero gradient rather than NaN
  Table same(2, 2);
  same.at(0, 0) = 1.0;
  same.at(1, 1) = -1.0;
  TransportPlan diag;
  diag.gamma = Table(2, 2);
  diag.gamma.at(0, 0) = 0.5;
  diag.gamma.at(1, 1) = 0.5;
  const auto g = frozen_plan_grads(diag, same, same);
  for (double v : g.d_a.values) CHECK(v == 0.0);
  for (double v : g.d_b.values) CHECK(v == 0.0);
}

TEST_CASE("identical point sets transport for free") {
  const auto a = random_points(5, 3, 9);
  const auto c = cost_matrix(a, a);
  CHECK(exact_wasserstein_oracle(c) == Catch::Approx(0.0));
  const auto res = sinkhorn_wasserstein(c, 0.01, 100000, 1e-9);
  // entropic smoothing keeps mass off the diagonal, but the estimate still
  // sits within the regularization scale of zero
  CHECK(res.distance < 0.2);
}
