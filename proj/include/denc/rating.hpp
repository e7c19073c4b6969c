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

#include <span>
#include <vector>

#include "denc/balance.hpp"
#include "denc/common.hpp"
#include "denc/data.hpp"
#include "denc/graph_embed.hpp"
#include "denc/table.hpp"

namespace denc {

struct RatingParams {
  FactorSpace fs;
  Table confounder_coef;  // W_u: m x k_a, rows match Z rows

  std::size_t users() const { return fs.user_factors.rows; }
  std::size_t items() const { return fs.item_factors.rows; }
};

// Rating prediction U_u.I_i + W_u.Z_u; the model's noise term has mean zero
// and is dropped at inference.
inline double predict(user_id u, item_id i, const RatingParams& params,
                      const EmbeddingTable& Z) {
  if (u >= params.users() || i >= params.items()) {
    fail_invalid("predict: index out of range");
  }
  return dot(params.fs.user_factors.row(u), params.fs.item_factors.row(i)) +
         dot(params.confounder_coef.row(u), Z.row(u));
}

struct IpsLossResult {
  double loss = 0.0;
  Table d_user;        // m x k_d
  Table d_item;        // n x k_d
  Table d_confounder;  // m x k_a
};

// IPS-weighted squared loss over a batch of observed pairs:
//   L_y = (1/B) sum (y - yhat)^2 / max(pi, clip_floor)
// with analytic gradients for all three parameter tables. Clipping bounds
// the weight of near-zero propensities.
inline IpsLossResult ips_loss(std::span<const RatingTriple> batch,
                              const RatingParams& params,
                              const EmbeddingTable& Z,
                              std::span<const double> propensities,
                              double clip_floor = 0.05) {
  if (batch.empty()) fail_invalid("ips_loss: empty batch");
  if (batch.size() != propensities.size()) {
    fail_invalid("ips_loss: propensities not aligned with batch");
  }
  if (clip_floor <= 0.0 || clip_floor > 1.0) {
    fail_invalid("ips_loss: clip_floor must be in (0,1]");
  }

  const std::size_t kd = params.fs.k_d();
  const std::size_t ka = params.confounder_coef.cols;
  IpsLossResult out;
  out.d_user = Table(params.users(), kd);
  out.d_item = Table(params.items(), kd);
  out.d_confounder = Table(params.users(), ka);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto& t = batch[s];
    const double pi = propensities[s];
    if (pi <= 0.0 || pi > 1.0) {
      fail_invalid("ips_loss: propensities must lie in (0,1]");
    }
    const double w = 1.0 / std::max(pi, clip_floor);
    const double err = predict(t.user, t.item, params, Z) - t.rating;
    out.loss += w * err * err * inv_b;

    const double coef = 2.0 * w * err * inv_b;
    auto uf = params.fs.user_factors.row(t.user);
    auto itf = params.fs.item_factors.row(t.item);
    auto zu = Z.row(t.user);
    auto du = out.d_user.row(t.user);
    auto di = out.d_item.row(t.item);
    auto dw = out.d_confounder.row(t.user);
    for (std::size_t k = 0; k < kd; ++k) {
      du[k] += coef * itf[k];
      di[k] += coef * uf[k];
    }
    for (std::size_t k = 0; k < ka; ++k) dw[k] += coef * zu[k];
  }
  return out;
}

inline double l2_norm_squared(const RatingParams& params) {
  double s = 0.0;
  for (double v : params.fs.user_factors.values) s += v * v;
  for (double v : params.fs.item_factors.values) s += v * v;
  for (double v : params.confounder_coef.values) s += v * v;
  return s;
}

}  // namespace denc
