/*
 * Copyright 2026 The DENC Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "denc/common.hpp"
#include "denc/data.hpp"
#include "denc/graph_embed.hpp"
#include "denc/rng.hpp"

namespace denc {

struct PropensityParams {
  std::vector<double> w0;
  double b0 = 0.0;
};

struct ExposureModel {
  PropensityParams params;
  double omega = 0.1;         // uniform exposure weight for unobserved cells
  double rating_prior = 1.0;  // empirical P(y observed) = |O| / (m*n)
};

// Logistic propensity of exposure a for confounder z:
// sigma((2a-1)(z.W0 + b0)). The a=1 and a=0 values sum to 1 exactly.
inline double propensity(std::span<const double> z, bool a,
                         const PropensityParams& params) {
  if (z.size() != params.w0.size()) {
    fail_invalid("propensity: confounder dimension mismatch");
  }
  const double s = dot(z, {params.w0.data(), params.w0.size()}) + params.b0;
  return sigmoid(a ? s : -s);
}

// Eq-(4)-style marginal exposure probability, kept as a diagnostic:
// P(a=1) = pi(1;z) * rating_prior + omega * (1 - rating_prior).
inline double marginal_exposure_prob(std::span<const double> z,
                                     const ExposureModel& model) {
  return propensity(z, true, model.params) * model.rating_prior +
         model.omega * (1.0 - model.rating_prior);
}

struct ExposureGrad {
  double loss = 0.0;
  std::vector<double> d_w0;
  double d_b0 = 0.0;
};

// Negative log-likelihood of the exposure assignment over an observed batch
// plus sampled unobserved cells:
//   L_a = sum_obs -log pi(1; Z_u)  +  (1-omega) * sum_neg -log pi(0; Z_u)
// with exact analytic gradients for W0 and b0. Only the user side of each
// pair enters; items are carried for the disjointness contract.
inline ExposureGrad exposure_log_likelihood(
    std::span<const std::pair<user_id, item_id>> observed,
    std::span<const std::pair<user_id, item_id>> negatives,
    const EmbeddingTable& Z, const ExposureModel& model) {
  if (observed.empty()) {
    fail_invalid("exposure_log_likelihood: empty observed set");
  }
  std::unordered_set<std::uint64_t> obs_keys;
  obs_keys.reserve(observed.size() * 2);
  for (const auto& [u, i] : observed) obs_keys.insert(pair_key(u, i));
  for (const auto& [u, i] : negatives) {
    if (obs_keys.count(pair_key(u, i))) {
      fail_invalid("exposure_log_likelihood: negatives overlap observed");
    }
  }

  const std::size_t d = model.params.w0.size();
  ExposureGrad out;
  out.d_w0.assign(d, 0.0);

  for (const auto& [u, i] : observed) {
    auto z = Z.row(u);
    if (z.size() != d) fail_invalid("exposure_log_likelihood: dim mismatch");
    const double s = dot(z, {model.params.w0.data(), d}) + model.params.b0;
    out.loss += softplus(-s);              // -log sigma(s)
    const double g = sigmoid(s) - 1.0;
    for (std::size_t k = 0; k < d; ++k) out.d_w0[k] += g * z[k];
    out.d_b0 += g;
  }
  const double wn = 1.0 - model.omega;
  for (const auto& [u, i] : negatives) {
    auto z = Z.row(u);
    const double s = dot(z, {model.params.w0.data(), d}) + model.params.b0;
    out.loss += wn * softplus(s);          // -log sigma(-s)
    const double g = wn * sigmoid(s);
    for (std::size_t k = 0; k < d; ++k) out.d_w0[k] += g * z[k];
    out.d_b0 += g;
  }
  return out;
}

struct ExposureFitConfig {
  double omega = 0.1;
  std::size_t max_epochs = 20;
  double learning_rate = 0.05;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;
};

struct ExposureFitResult {
  ExposureModel model;
  std::vector<double> epoch_loss;  // mean per-sample loss, online accumulation
};

// One SGD pass: resamples unobserved cells 1:1 with the observed set,
// shuffles, runs per-sample updates in place. Returns the epoch-mean loss
// accumulated at the points visited. Shared by fit_exposure and the
// trainer's optional joint-update mode.
inline double exposure_sgd_epoch(ExposureModel& model, const Dataset& train,
                                 const EmbeddingTable& Z, double learning_rate,
                                 Rng& rng) {
  const std::size_t d = model.params.w0.size();
  const std::size_t n_obs = train.triples.size();
  auto& w0 = model.params.w0;
  auto& b0 = model.params.b0;
  const double wn = 1.0 - model.omega;

  std::vector<std::pair<user_id, std::uint8_t>> samples;
  samples.reserve(2 * n_obs);
  for (const auto& t : train.triples) samples.emplace_back(t.user, 1);
  for (std::size_t k = 0; k < n_obs; ++k) {
    while (true) {
      const auto u = static_cast<user_id>(rng.next_below(train.user_count));
      const auto i = static_cast<item_id>(rng.next_below(train.item_count));
      if (!train.is_observed(u, i)) {
        samples.emplace_back(u, 0);
        break;
      }
    }
  }
  rng.shuffle(samples);

  double loss = 0.0;
  for (const auto& [u, label] : samples) {
    auto z = Z.row(u);
    const double s = dot(z, {w0.data(), d}) + b0;
    double g;
    if (label) {
      loss += softplus(-s);
      g = sigmoid(s) - 1.0;
    } else {
      loss += wn * softplus(s);
      g = wn * sigmoid(s);
    }
    const double step = learning_rate * g;
    for (std::size_t k = 0; k < d; ++k) w0[k] -= step * z[k];
    b0 -= step;
  }
  return loss / static_cast<double>(samples.size());
}

// SGD maximum likelihood for Theta. Each epoch resamples unobserved cells
// 1:1 with the observed set, shuffles, and runs per-sample updates. Theta
// starts at zero; stops early when the epoch-mean loss stabilizes.
inline ExposureFitResult fit_exposure(const Dataset& train,
                                      const EmbeddingTable& Z,
                                      const ExposureFitConfig& cfg) {
  if (train.triples.empty()) fail_invalid("fit_exposure: empty train set");
  if (Z.z.rows != train.user_count) {
    fail_invalid("fit_exposure: embedding table does not cover all users");
  }
  if (cfg.omega <= 0.0 || cfg.omega >= 1.0) {
    fail_invalid("fit_exposure: omega must be in (0,1)");
  }
  const std::size_t total_cells = train.user_count * train.item_count;
  if (train.triples.size() >= total_cells) {
    fail_invalid("fit_exposure: no unobserved cells to sample");
  }

  const std::size_t d = Z.z.cols;
  ExposureFitResult res;
  res.model.params.w0.assign(d, 0.0);
  res.model.params.b0 = 0.0;
  res.model.omega = cfg.omega;
  res.model.rating_prior =
      static_cast<double>(train.triples.size()) / static_cast<double>(total_cells);

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng rng(derive_stream(cfg.seed, "exposure_epoch", epoch));
    const double loss =
        exposure_sgd_epoch(res.model, train, Z, cfg.learning_rate, rng);
    res.epoch_loss.push_back(loss);
    if (res.epoch_loss.size() >= 2) {
      const double prev = res.epoch_loss[res.epoch_loss.size() - 2];
      if (std::fabs(prev - loss) <= cfg.rel_tol * std::fabs(prev)) break;
    }
  }
  return res;
}

// Propensity of the observed exposure for every training triple, aligned
// with train.triples.
inline std::vector<double> observed_propensities(const Dataset& train,
                                                 const EmbeddingTable& Z,
                                                 const ExposureModel& model) {
  std::vector<double> out;
  out.reserve(train.triples.size());
  for (const auto& t : train.triples) {
    out.push_back(propensity(Z.row(t.user), true, model.params));
  }
  return out;
}

}  // namespace denc
