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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "denc/balance.hpp"
#include "denc/common.hpp"
#include "denc/data.hpp"
#include "denc/exposure.hpp"
#include "denc/graph_embed.hpp"
#include "denc/metrics.hpp"
#include "denc/rating.hpp"
#include "denc/rng.hpp"
#include "denc/table.hpp"

namespace denc {

// full: the whole pipeline. no_exposure drops the propensity model (all IPS
// weights 1, no balance penalty) but keeps the confounder term. no_confounder
// zeroes Z (no confounder term) but keeps IPS and the balance penalty.
// naive_mf drops both; plain matrix factorization.
enum class Ablation { full, no_exposure, no_confounder, naive_mf };

inline std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_exposure: return "no_exposure";
    case Ablation::no_confounder: return "no_confounder";
    case Ablation::naive_mf: return "naive_mf";
  }
  fail_invalid("unknown ablation");
}

inline Ablation ablation_from_name(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "no_exposure") return Ablation::no_exposure;
  if (s == "no_confounder") return Ablation::no_confounder;
  if (s == "naive_mf") return Ablation::naive_mf;
  fail_invalid("unknown ablation: " + s);
}

struct TrainConfig {
  double lambda_a = 1e-4;
  double lambda_z = 1e-4;
  double lambda_d = 1e-4;
  double l2_reg = 1e-4;
  std::size_t k_d = 15;
  std::size_t k_a = 45;
  double learning_rate = 0.005;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 2000;
  std::size_t patience = 10;
  std::size_t balance_batch_l = 32;
  double clip_floor = 0.05;
  double omega = 0.1;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::full;
  bool joint_exposure_update = false;

  WalkConfig walk;  // embed_dim and seed are overridden from this config
  std::size_t exposure_epochs = 20;
  double exposure_learning_rate = 0.05;
  double sinkhorn_eps_scale = 0.1;  // eps_reg = scale * mean(C)
  std::size_t sinkhorn_max_iters = 50;
  double sinkhorn_tol = 1e-6;

  MetricsConfig metrics;
};

inline void check_config(const TrainConfig& cfg) {
  if (cfg.lambda_a < 0 || cfg.lambda_z < 0 || cfg.lambda_d < 0 || cfg.l2_reg < 0) {
    fail_invalid("train config: loss coefficients must be non-negative");
  }
  if (cfg.k_d == 0 || cfg.k_a == 0) fail_invalid("train config: dims must be >= 1");
  if (cfg.learning_rate <= 0) fail_invalid("train config: learning_rate must be positive");
  if (cfg.batch_size == 0) fail_invalid("train config: batch_size must be >= 1");
  if (cfg.max_epochs == 0) fail_invalid("train config: max_epochs must be >= 1");
  if (cfg.balance_batch_l == 0) fail_invalid("train config: balance_batch_l must be >= 1");
  if (cfg.clip_floor <= 0 || cfg.clip_floor > 1) {
    fail_invalid("train config: clip_floor must be in (0,1]");
  }
  if (cfg.omega <= 0 || cfg.omega >= 1) {
    fail_invalid("train config: omega must be in (0,1)");
  }
  if (cfg.sinkhorn_eps_scale <= 0) {
    fail_invalid("train config: sinkhorn_eps_scale must be positive");
  }
}

struct LossBreakdown {
  double l_y = 0.0;
  double l_a = 0.0;
  double l_z = 0.0;
  double l_d = 0.0;
  double l2 = 0.0;  // squared parameter norm, unweighted
};

// The joint objective is exactly this affine combination; nothing else is
// folded in.
inline double joint_total(const LossBreakdown& parts, const TrainConfig& cfg) {
  return parts.l_y + cfg.lambda_a * parts.l_a + cfg.lambda_z * parts.l_z +
         cfg.lambda_d * parts.l_d + cfg.l2_reg * parts.l2;
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double l_y = 0.0;
  double l_a = 0.0;
  double l_d = 0.0;
  double l_total = 0.0;
  double val_mae = 0.0;
  double val_rmse = 0.0;
};

struct TrainedModel {
  RatingParams params;
  ExposureModel exposure;
  EmbeddingTable embeddings;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 1-based index into history
  double l_z = 0.0;            // frozen diagnostic from the embedding stage
  TrainConfig config;
  bool propensities_are_uniform = false;  // true for no_exposure / naive_mf
  std::size_t sinkhorn_nonconverged = 0;

  std::size_t user_count = 0;
  std::size_t item_count = 0;
  std::vector<std::string> user_labels;
  std::vector<std::string> item_labels;
  std::unordered_set<std::uint64_t> train_observed;
  std::unordered_set<std::uint64_t> val_observed;
};

inline double model_predict(const TrainedModel& model, user_id u, item_id i) {
  return predict(u, i, model.params, model.embeddings);
}

namespace detail {

// Xavier-uniform: bound sqrt(6 / (fan_in + fan_out)). Factor tables use
// fan_in = fan_out = k_d; the confounder coefficients map k_a inputs to one
// output.
inline void xavier_fill(Table& t, double fan_in, double fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.values) v = (rng.next_double() * 2.0 - 1.0) * bound;
}

inline void eval_mae_rmse(const TrainedModel& model, const Dataset& ds,
                          bool clamp, double lo, double hi, double& out_mae,
                          double& out_rmse) {
  double abs_sum = 0.0, sq_sum = 0.0;
  for (const auto& t : ds.triples) {
    double p = model_predict(model, t.user, t.item);
    if (clamp) p = clamp_rating(p, lo, hi);
    const double d = p - t.rating;
    abs_sum += std::fabs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(ds.triples.size());
  out_mae = abs_sum / n;
  out_rmse = std::sqrt(sq_sum / n);
}

}  // namespace detail

// Stage-wise optimization:
//   1. pre-train the confounder embeddings on the social graph (frozen),
//   2. fit the exposure model and freeze per-pair propensities,
//   3. SGD over the IPS-weighted rating loss plus the balance penalty,
//      factors and confounder coefficients trainable.
// Early stopping on validation RMSE with the configured patience; the best
// epoch's parameters are restored. Deterministic given cfg.seed.
inline TrainedModel train(const TrainConfig& cfg, const Dataset& train_ds,
                          const Dataset& val_ds, const SocialGraph& g) {
  check_config(cfg);
  if (train_ds.triples.empty()) fail_invalid("train: empty train set");
  if (val_ds.triples.empty()) fail_invalid("train: empty validation set");
  if (g.node_count != train_ds.user_count) {
    fail_invalid("train: graph does not match dataset users");
  }
  check_dataset(train_ds);

  const std::size_t m = train_ds.user_count;
  const std::size_t n = train_ds.item_count;

  TrainedModel model;
  model.config = cfg;
  model.user_count = m;
  model.item_count = n;
  model.user_labels = train_ds.user_labels;
  model.item_labels = train_ds.item_labels;
  model.train_observed = train_ds.observed;
  model.val_observed = val_ds.observed;

  const bool use_confounder = cfg.ablation == Ablation::full ||
                              cfg.ablation == Ablation::no_exposure;
  const bool use_exposure = cfg.ablation == Ablation::full ||
                            cfg.ablation == Ablation::no_confounder;
  const bool use_balance =
      use_exposure && cfg.lambda_d > 0.0;  // no_exposure forces lambda_d off

  // Stage 1: confounder embeddings.
  WalkConfig wcfg = cfg.walk;
  wcfg.embed_dim = cfg.k_a;
  wcfg.seed = derive_stream(cfg.seed, "embed");
  if (use_confounder) {
    bool any_edge = false;
    for (std::size_t u = 0; u < g.node_count && !any_edge; ++u) {
      any_edge = g.degree(static_cast<user_id>(u)) > 0;
    }
    if (any_edge) {
      const auto walks = generate_walks(g, wcfg);
      auto sgns = train_sgns(walks, m, wcfg);
      model.l_z = sgns_corpus_loss(walks, sgns, wcfg);
      model.embeddings = std::move(sgns.center);
    } else {
      model.embeddings.z = Table(m, cfg.k_a);
      model.embeddings.fallback.assign(m, 1);
      model.l_z = 0.0;
    }
  } else {
    model.embeddings.z = Table(m, cfg.k_a);
    model.embeddings.fallback.assign(m, 1);
    model.l_z = 0.0;
  }

  // Stage 2: exposure model and frozen propensities.
  std::vector<double> props(train_ds.triples.size(), 1.0);
  double l_a = 0.0;
  if (use_exposure) {
    ExposureFitConfig ecfg;
    ecfg.omega = cfg.omega;
    ecfg.max_epochs = cfg.exposure_epochs;
    ecfg.learning_rate = cfg.exposure_learning_rate;
    ecfg.seed = derive_stream(cfg.seed, "exposure");
    auto fit = fit_exposure(train_ds, model.embeddings, ecfg);
    model.exposure = fit.model;
    if (!fit.epoch_loss.empty()) l_a = fit.epoch_loss.back();
    props = observed_propensities(train_ds, model.embeddings, model.exposure);
  } else {
    model.exposure.params.w0.assign(cfg.k_a, 0.0);
    model.exposure.params.b0 = 0.0;
    model.exposure.omega = cfg.omega;
    model.exposure.rating_prior =
        static_cast<double>(train_ds.triples.size()) /
        static_cast<double>(m * n);
    model.propensities_are_uniform = true;
  }

  // Stage 3: factors and confounder coefficients.
  RatingParams& params = model.params;
  params.fs.user_factors = Table(m, cfg.k_d);
  params.fs.item_factors = Table(n, cfg.k_d);
  params.confounder_coef = Table(m, cfg.k_a);
  {
    Rng init_rng(derive_stream(cfg.seed, "init"));
    detail::xavier_fill(params.fs.user_factors, static_cast<double>(cfg.k_d),
                        static_cast<double>(cfg.k_d), init_rng);
    detail::xavier_fill(params.fs.item_factors, static_cast<double>(cfg.k_d),
                        static_cast<double>(cfg.k_d), init_rng);
    detail::xavier_fill(params.confounder_coef, static_cast<double>(cfg.k_a),
                        1.0, init_rng);
  }

  const std::size_t n_train = train_ds.triples.size();
  const std::size_t kd = cfg.k_d;
  const std::size_t ka = cfg.k_a;
  const double lr = cfg.learning_rate;
  const double decay = 2.0 * cfg.l2_reg;

  RatingParams best_params = params;
  double best_rmse = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;
  std::size_t global_step = 0;

  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng order_rng(derive_stream(cfg.seed, "epoch_order", epoch));
    order_rng.shuffle(order);

    double ly_sum = 0.0;
    double ld_sum = 0.0;
    std::size_t ld_steps = 0;

    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t stop = std::min(n_train, start + cfg.batch_size);
      for (std::size_t s = start; s < stop; ++s) {
        const auto& t = train_ds.triples[order[s]];
        const double pi = props[order[s]];
        const double w = 1.0 / std::max(pi, cfg.clip_floor);
        auto uf = params.fs.user_factors.row(t.user);
        auto itf = params.fs.item_factors.row(t.item);
        auto wu = params.confounder_coef.row(t.user);
        auto zu = model.embeddings.row(t.user);

        double pred = dot(uf, itf);
        if (use_confounder) pred += dot(wu, zu);
        const double err = pred - t.rating;
        ly_sum += w * err * err;

        const double coef = 2.0 * w * err * lr;
        for (std::size_t k = 0; k < kd; ++k) {
          const double ufk = uf[k];
          uf[k] -= coef * itf[k] + lr * decay * ufk;
          itf[k] -= coef * ufk + lr * decay * itf[k];
        }
        if (use_confounder) {
          for (std::size_t k = 0; k < ka; ++k) {
            wu[k] -= coef * zu[k] + lr * decay * wu[k];
          }
        }
      }

      // One fresh balanced batch per SGD step; envelope gradient of the
      // transport distance pushed into the touched factor rows.
      if (use_balance) {
        const auto bb = sample_balanced_batch(
            params.fs, train_ds, cfg.balance_batch_l,
            derive_stream(cfg.seed, "balance", global_step));
        const Table c = cost_matrix(bb.exposed, bb.unexposed);
        double mean_c = 0.0;
        for (double v : c.values) mean_c += v;
        mean_c /= static_cast<double>(c.values.size());
        if (mean_c > 1e-12) {
          const auto sk = sinkhorn_wasserstein(c, cfg.sinkhorn_eps_scale * mean_c,
                                               cfg.sinkhorn_max_iters,
                                               cfg.sinkhorn_tol);
          if (!sk.converged) ++model.sinkhorn_nonconverged;
          ld_sum += sk.distance;
          ++ld_steps;
          const auto grads = frozen_plan_grads(sk.plan, bb.exposed, bb.unexposed);
          const double scale = lr * cfg.lambda_d;
          auto apply = [&](const Table& grad, const auto& pairs) {
            for (std::size_t r = 0; r < pairs.size(); ++r) {
              auto uf = params.fs.user_factors.row(pairs[r].first);
              auto itf = params.fs.item_factors.row(pairs[r].second);
              auto gr = grad.row(r);
              for (std::size_t k = 0; k < kd; ++k) {
                uf[k] -= scale * gr[k];
                itf[k] -= scale * gr[kd + k];
              }
            }
          };
          apply(grads.d_a, bb.exposed_pairs);
          apply(grads.d_b, bb.unexposed_pairs);
        } else {
          ++ld_steps;  // coincident populations: distance 0, no gradient
        }
      }
      ++global_step;
    }

    if (cfg.joint_exposure_update && use_exposure) {
      Rng jrng(derive_stream(cfg.seed, "joint_exposure", epoch));
      l_a = exposure_sgd_epoch(model.exposure, train_ds, model.embeddings,
                               cfg.exposure_learning_rate, jrng);
      props = observed_propensities(train_ds, model.embeddings, model.exposure);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.l_y = ly_sum / static_cast<double>(n_train);
    rec.l_a = l_a;
    rec.l_d = ld_steps == 0 ? 0.0 : ld_sum / static_cast<double>(ld_steps);
    LossBreakdown parts{rec.l_y, rec.l_a, model.l_z, rec.l_d,
                        l2_norm_squared(params)};
    rec.l_total = joint_total(parts, cfg);
    detail::eval_mae_rmse(model, val_ds, cfg.metrics.clamp, cfg.metrics.clamp_lo,
                          cfg.metrics.clamp_hi, rec.val_mae, rec.val_rmse);
    model.history.push_back(rec);

    if (!std::isfinite(rec.l_y) || !std::isfinite(rec.val_rmse)) {
      break;  // diverged; non-finite parameters cannot recover
    }
    if (rec.val_rmse < best_rmse) {
      best_rmse = rec.val_rmse;
      best_params = params;
      model.best_epoch = epoch;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs > cfg.patience) break;
    }
  }

  params = best_params;
  return model;
}

// MAE/RMSE over the test triples plus ranking metrics over per-user
// candidate pools (items the user never saw in training), per the
// configured K list.
inline MetricsReport evaluate_checkpoint(const TrainedModel& model,
                                         const Dataset& test) {
  if (test.triples.empty()) fail_invalid("evaluate: empty test set");
  const MetricsConfig& mc = model.config.metrics;

  MetricsReport rep;
  rep.k_list = mc.k_list;
  rep.relevance_threshold = mc.relevance_threshold;
  rep.rated_pairs = test.triples.size();

  std::vector<double> preds, truths;
  preds.reserve(test.triples.size());
  truths.reserve(test.triples.size());
  for (const auto& t : test.triples) {
    double p = model_predict(model, t.user, t.item);
    if (mc.clamp) p = clamp_rating(p, mc.clamp_lo, mc.clamp_hi);
    preds.push_back(p);
    truths.push_back(t.rating);
  }
  rep.mae = mae(preds, truths);
  rep.rmse = rmse(preds, truths);

  // group test triples per user
  std::vector<std::vector<const RatingTriple*>> by_user(model.user_count);
  for (const auto& t : test.triples) by_user[t.user].push_back(&t);

  std::vector<RankedUser> ranked;
  for (std::size_t u = 0; u < model.user_count; ++u) {
    if (by_user[u].empty()) continue;  // users with no test items are skipped
    RankedUser ru;
    std::vector<std::pair<item_id, double>> scored;
    for (std::size_t i = 0; i < model.item_count; ++i) {
      const auto uu = static_cast<user_id>(u);
      const auto ii = static_cast<item_id>(i);
      if (model.train_observed.count(pair_key(uu, ii))) continue;
      scored.emplace_back(ii, model_predict(model, uu, ii));
    }
    ru.ranked = rank_items(scored);
    for (const auto* t : by_user[u]) {
      if (t->rating >= mc.relevance_threshold) ru.relevant.insert(t->item);
    }
    ranked.push_back(std::move(ru));
  }
  rep.ranked_users = ranked.size();
  if (!ranked.empty()) {
    for (std::size_t k : mc.k_list) {
      const auto pr = precision_recall_at_k(ranked, k);
      rep.precision_at_k[k] = pr.precision;
      rep.recall_at_k[k] = pr.recall;
    }
  }
  return rep;
}

struct TruthEval {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t cells = 0;
};

// MAE/RMSE against a complete truth table over held-out cells: everything
// the model never ingested (train and validation observations excluded).
inline TruthEval evaluate_on_truth(const TrainedModel& model, const Table& truth,
                                   bool exclude_seen = true, bool clamp = false) {
  if (truth.rows != model.user_count || truth.cols != model.item_count) {
    fail_invalid("evaluate_on_truth: truth table shape mismatch");
  }
  TruthEval out;
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t u = 0; u < truth.rows; ++u) {
    for (std::size_t i = 0; i < truth.cols; ++i) {
      const auto uu = static_cast<user_id>(u);
      const auto ii = static_cast<item_id>(i);
      if (exclude_seen) {
        const std::uint64_t key = pair_key(uu, ii);
        if (model.train_observed.count(key) || model.val_observed.count(key)) {
          continue;
        }
      }
      double p = model_predict(model, uu, ii);
      if (clamp) p = clamp_rating(p);
      const double d = p - truth.at(u, i);
      abs_sum += std::fabs(d);
      sq_sum += d * d;
      ++out.cells;
    }
  }
  if (out.cells == 0) fail_invalid("evaluate_on_truth: no held-out cells");
  const double n = static_cast<double>(out.cells);
  out.mae = abs_sum / n;
  out.rmse = std::sqrt(sq_sum / n);
  return out;
}

}  // namespace denc
