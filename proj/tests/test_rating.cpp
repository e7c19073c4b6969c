#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "denc/rating.hpp"
#include "denc/synth.hpp"

#include "support/test_helpers.hpp"

using namespace denc;

namespace {

RatingParams make_params(std::size_t m, std::size_t n, std::size_t kd,
                         std::size_t ka, std::uint64_t seed) {
  RatingParams p;
  p.fs.user_factors = Table(m, kd);
  p.fs.item_factors = Table(n, kd);
  p.confounder_coef = Table(m, ka);
  Rng rng(seed);
  for (auto& v : p.fs.user_factors.values) v = rng.next_normal() * 0.3;
  for (auto& v : p.fs.item_factors.values) v = rng.next_normal() * 0.3;
  for (auto& v : p.confounder_coef.values) v = rng.next_normal() * 0.3;
  return p;
}

EmbeddingTable make_embeddings(std::size_t m, std::size_t ka,
                               std::uint64_t seed) {
  EmbeddingTable emb;
  emb.z = Table(m, ka);
  emb.fallback.assign(m, 0);
  Rng rng(seed);
  for (auto& v : emb.z.values) v = rng.next_normal() * 0.5;
  return emb;
}

}  // namespace

TEST_CASE("prediction is factor dot plus confounder term") {
  RatingParams p;
  p.fs.user_factors = Table(1, 2);
  p.fs.item_factors = Table(1, 2);
  p.confounder_coef = Table(1, 2);
  p.fs.user_factors.at(0, 0) = 1.0;
  p.fs.user_factors.at(0, 1) = 2.0;
  p.fs.item_factors.at(0, 0) = 3.0;
  p.fs.item_factors.at(0, 1) = 4.0;
  p.confounder_coef.at(0, 0) = 0.5;
  p.confounder_coef.at(0, 1) = -1.0;
  EmbeddingTable emb;
  emb.z = Table(1, 2);
  emb.fallback.assign(1, 0);
  emb.z.at(0, 0) = 2.0;
  emb.z.at(0, 1) = -1.0;
  // 1*3 + 2*4 + 0.5*2 + (-1)*(-1) = 13
  CHECK(predict(0, 0, p, emb) == Catch::Approx(13.0));

  CHECK_THROWS_AS(predict(1, 0, p, emb), std::invalid_argument);
  CHECK_THROWS_AS(predict(0, 1, p, emb), std::invalid_argument);
}

TEST_CASE("propensity clipping bounds the inverse weight") {
  auto p = make_params(2, 2, 2, 2, 1);
  auto emb = make_embeddings(2, 2, 2);
  std::vector<RatingTriple> batch{{0, 0, 4.0}};

  const double err = predict(0, 0, p, emb) - 4.0;
  // pi below the floor: weight is 1/0.05 = 20
  std::vector<double> tiny{0.001};
  auto clipped = ips_loss(batch, p, emb, tiny, 0.05);
  CHECK(clipped.loss == Catch::Approx(20.0 * err * err));

  // pi above the floor: weight is 1/pi
  std::vector<double> big{0.5};
  auto open = ips_loss(batch, p, emb, big, 0.05);
  CHECK(open.loss == Catch::Approx(2.0 * err * err));
}

TEST_CASE("batch loss is the mean of weighted squared errors") {
  auto p = make_params(3, 3, 2, 2, 5);
  auto emb = make_embeddings(3, 2, 6);
  std::vector<RatingTriple> batch{{0, 0, 3.0}, {1, 2, 5.0}, {2, 1, 1.0}};
  std::vector<double> props{0.5, 1.0, 0.25};
  const auto out = ips_loss(batch, p, emb, props, 0.05);
  double expect = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const double err =
        predict(batch[s].user, batch[s].item, p, emb) - batch[s].rating;
    expect += err * err / props[s];
  }
  expect /= 3.0;
  CHECK(out.loss == Catch::Approx(expect));
}

TEST_CASE("ips loss rejects malformed inputs") {
  auto p = make_params(2, 2, 2, 2, 1);
  auto emb = make_embeddings(2, 2, 2);
  std::vector<RatingTriple> empty;
  std::vector<double> props{0.5};
  CHECK_THROWS_AS(ips_loss(empty, p, emb, props), std::invalid_argument);

  std::vector<RatingTriple> batch{{0, 0, 3.0}, {1, 1, 4.0}};
  CHECK_THROWS_AS(ips_loss(batch, p, emb, props), std::invalid_argument);

  std::vector<double> zero{0.0, 0.5};
  CHECK_THROWS_AS(ips_loss(batch, p, emb, zero), std::invalid_argument);
  std::vector<double> above{0.5, 1.5};
  CHECK_THROWS_AS(ips_loss(batch, p, emb, above), std::invalid_argument);

  std::vector<double> ok{0.5, 0.5};
  CHECK_THROWS_AS(ips_loss(batch, p, emb, ok, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ips_loss(batch, p, emb, ok, 1.5), std::invalid_argument);
}

TEST_CASE("ips gradients match finite differences") {
  Rng seeds(derive_stream(41, "ips_fd"));
  const std::size_t m = 4, n = 5, kd = 3, ka = 2;
  for (int rep = 0; rep < 10; ++rep) {
    auto p = make_params(m, n, kd, ka, seeds.next_u64());
    auto emb = make_embeddings(m, ka, seeds.next_u64());
    std::vector<RatingTriple> batch;
    std::vector<double> props;
    Rng rng(seeds.next_u64());
    for (int s = 0; s < 6; ++s) {
      batch.push_back({static_cast<user_id>(rng.next_below(m)),
                       static_cast<item_id>(rng.next_below(n)),
                       1.0 + 4.0 * rng.next_double()});
      props.push_back(0.1 + 0.9 * rng.next_double());
    }
    const auto out = ips_loss(batch, p, emb, props, 0.05);
    auto loss = [&] { return ips_loss(batch, p, emb, props, 0.05).loss; };

    for (std::size_t u = 0; u < m; ++u) {
      for (std::size_t k = 0; k < kd; ++k) {
        const double fd = testsupport::central_difference(
            loss, p.fs.user_factors.at(u, k), 1e-6);
        REQUIRE(testsupport::gradient_rel_error(out.d_user.at(u, k), fd) <
                1e-4);
      }
      for (std::size_t k = 0; k < ka; ++k) {
        const double fd = testsupport::central_difference(
            loss, p.confounder_coef.at(u, k), 1e-6);
        REQUIRE(testsupport::gradient_rel_error(out.d_confounder.at(u, k),
                                                fd) < 1e-4);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kd; ++k) {
        const double fd = testsupport::central_difference(
            loss, p.fs.item_factors.at(i, k), 1e-6);
        REQUIRE(testsupport::gradient_rel_error(out.d_item.at(i, k), fd) <
                1e-4);
      }
    }
  }
}

TEST_CASE("ips reweighting is unbiased for the full-population loss") {
  // Ground truth on a 6x6 grid; cells are exposed with probability
  // proportional to a known propensity. The IPS estimate of the population
  // risk (rescaled by B/(m*n)) should match the all-cells average, while
  // the unweighted estimate drifts toward the over-exposed cells.
  const std::size_t m = 6, n = 6;
  auto p = make_params(m, n, 2, 2, 3);
  auto emb = make_embeddings(m, 2, 4);

  // true ratings differ from the model by a user-dependent offset so that
  // high-propensity users have smaller errors
  std::vector<std::vector<double>> truth(m, std::vector<double>(n));
  std::vector<double> user_prop(m);
  for (std::size_t u = 0; u < m; ++u) {
    user_prop[u] = u < m / 2 ? 0.9 : 0.1;
    const double offset = u < m / 2 ? 0.2 : 2.0;
    for (std::size_t i = 0; i < n; ++i) {
      truth[u][i] = predict(static_cast<user_id>(u), static_cast<item_id>(i),
                            p, emb) +
                    offset;
    }
  }
  double population = 0.0;
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t i = 0; i < n; ++i) {
      const double err = predict(static_cast<user_id>(u),
                                 static_cast<item_id>(i), p, emb) -
                         truth[u][i];
      population += err * err;
    }
  }
  population /= static_cast<double>(m * n);

  double ips_total = 0.0, naive_total = 0.0;
  std::size_t reps = 400, total_obs = 0;
  Rng rng(derive_stream(7, "ips_unbiased"));
  for (std::size_t rep = 0; rep < reps; ++rep) {
    std::vector<RatingTriple> batch;
    std::vector<double> props;
    for (std::size_t u = 0; u < m; ++u) {
      for (std::size_t i = 0; i < n; ++i) {
        if (rng.next_bernoulli(user_prop[u])) {
          batch.push_back({static_cast<user_id>(u), static_cast<item_id>(i),
                           truth[u][i]});
          props.push_back(user_prop[u]);
        }
      }
    }
    if (batch.empty()) continue;
    const auto out = ips_loss(batch, p, emb, props, 0.01);
    const double scale =
        static_cast<double>(batch.size()) / static_cast<double>(m * n);
    ips_total += out.loss * scale;
    double naive = 0.0;
    for (const auto& t : batch) {
      const double err = predict(t.user, t.item, p, emb) - t.rating;
      naive += err * err;
    }
    naive_total += naive / static_cast<double>(batch.size());
    total_obs += batch.size();
  }
  REQUIRE(total_obs > 0);
  const double ips_mean = ips_total / static_cast<double>(reps);
  const double naive_mean = naive_total / static_cast<double>(reps);
  INFO("population " << population << " ips " << ips_mean << " naive "
                     << naive_mean);
  CHECK(std::fabs(ips_mean - population) < 0.05 * population);
  // naive estimate is dominated by the 0.9-propensity users' small errors
  CHECK(naive_mean < 0.6 * population);
}

TEST_CASE("l2 norm sums all three parameter tables") {
  RatingParams p;
  p.fs.user_factors = Table(1, 2);
  p.fs.item_factors = Table(1, 1);
  p.confounder_coef = Table(1, 1);
  p.fs.user_factors.at(0, 0) = 1.0;
  p.fs.user_factors.at(0, 1) = 2.0;
  p.fs.item_factors.at(0, 0) = 3.0;
  p.confounder_coef.at(0, 0) = -2.0;
  CHECK(l2_norm_squared(p) == Catch::Approx(1.0 + 4.0 + 9.0 + 4.0));
}
