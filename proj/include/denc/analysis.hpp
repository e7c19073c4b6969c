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
#include <numbers>
#include <span>
#include <unordered_set>
#include <vector>

#include "denc/common.hpp"
#include "denc/data.hpp"
#include "denc/metrics.hpp"
#include "denc/parallel.hpp"
#include "denc/rng.hpp"
#include "denc/trainer.hpp"

namespace denc {

struct CohortPair {
  std::vector<user_id> in_network;   // degree >= 1
  std::vector<user_id> out_network;  // degree 0 (or lowest-degree fallback)
  bool fallback_used = false;
};

// Uniform without-replacement cohorts of n users inside and outside the
// social graph. "Outside" means degree 0; if the data has too few isolated
// users the optional fallback takes the n lowest-degree users instead
// (callers should surface that prominently).
inline CohortPair sample_cohorts(const Dataset& ds, const SocialGraph& g,
                                 std::size_t n, std::uint64_t seed,
                                 bool allow_fallback = false) {
  if (n == 0) fail_invalid("cohorts: n must be positive");
  if (g.node_count != ds.user_count) {
    fail_invalid("cohorts: graph does not match dataset users");
  }
  std::vector<user_id> connected, isolated;
  for (std::size_t u = 0; u < g.node_count; ++u) {
    const auto uu = static_cast<user_id>(u);
    (g.degree(uu) > 0 ? connected : isolated).push_back(uu);
  }
  if (connected.size() < n) {
    fail_invalid("cohorts: in-network population too small (need " +
                 std::to_string(n) + ", have " +
                 std::to_string(connected.size()) + ")");
  }

  CohortPair out;
  Rng rng(derive_stream(seed, "cohorts"));
  if (isolated.size() >= n) {
    for (std::size_t idx : rng.sample_without_replacement(isolated.size(), n)) {
      out.out_network.push_back(isolated[idx]);
    }
    for (std::size_t idx : rng.sample_without_replacement(connected.size(), n)) {
      out.in_network.push_back(connected[idx]);
    }
    return out;
  }
  if (!allow_fallback) {
    fail_invalid("cohorts: out-of-network population too small (need " +
                 std::to_string(n) + ", have " +
                 std::to_string(isolated.size()) + ")");
  }

  // Fallback: n lowest-degree users act as the out cohort; the in cohort is
  // sampled from the remaining connected users.
  std::vector<user_id> by_degree(g.node_count);
  for (std::size_t u = 0; u < g.node_count; ++u) {
    by_degree[u] = static_cast<user_id>(u);
  }
  std::stable_sort(by_degree.begin(), by_degree.end(),
                   [&](user_id a, user_id b) { return g.degree(a) < g.degree(b); });
  out.fallback_used = true;
  out.out_network.assign(by_degree.begin(), by_degree.begin() + static_cast<std::ptrdiff_t>(n));
  std::unordered_set<user_id> taken(out.out_network.begin(), out.out_network.end());
  std::vector<user_id> pool;
  for (user_id u : connected) {
    if (!taken.count(u)) pool.push_back(u);
  }
  if (pool.size() < n) {
    fail_invalid("cohorts: populations overlap too much for fallback sampling");
  }
  for (std::size_t idx : rng.sample_without_replacement(pool.size(), n)) {
    out.in_network.push_back(pool[idx]);
  }
  return out;
}

struct DistributionSummary {
  std::vector<double> raw;               // one value per user or per pair
  std::vector<std::size_t> hist_counts;  // unit-width integer bins from 0
  std::vector<double> kde_x;             // 256 samples over [0, max + 3h]
  std::vector<double> kde_density;
  double bandwidth = 0.0;
  double mean = 0.0;
};

inline double kde_density_at(double x, std::span<const double> sample, double h) {
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * h *
                             static_cast<double>(sample.size()));
  double s = 0.0;
  for (double xi : sample) {
    const double d1 = (x - xi) / h;
    const double d2 = (x + xi) / h;  // reflection at 0 keeps mass on [0, inf)
    s += std::exp(-0.5 * d1 * d1) + std::exp(-0.5 * d2 * d2);
  }
  return norm * s;
}

// Histogram over unit integer bins plus a Gaussian KDE (Scott's-rule
// bandwidth, boundary reflection at zero) sampled at 256 points spanning
// [0, max + 3h].
inline DistributionSummary summarize_counts(std::vector<double> raw) {
  if (raw.empty()) fail_invalid("distribution summary: empty sample");
  DistributionSummary out;
  out.raw = std::move(raw);

  double mx = 0.0, mean = 0.0;
  for (double v : out.raw) {
    mx = std::max(mx, v);
    mean += v;
  }
  mean /= static_cast<double>(out.raw.size());
  out.mean = mean;

  out.hist_counts.assign(static_cast<std::size_t>(mx) + 1, 0);
  for (double v : out.raw) {
    ++out.hist_counts[static_cast<std::size_t>(round_half_up(v))];
  }

  double var = 0.0;
  for (double v : out.raw) var += (v - mean) * (v - mean);
  const std::size_t n = out.raw.size();
  double h = 0.5;
  if (n >= 2) {
    const double sd = std::sqrt(var / static_cast<double>(n - 1));
    const double scott = sd * std::pow(static_cast<double>(n), -0.2);
    if (scott > 0.0) h = scott;
  }
  out.bandwidth = h;

  const double hi = mx + 3.0 * h;
  out.kde_x.resize(256);
  out.kde_density.resize(256);
  for (std::size_t j = 0; j < 256; ++j) {
    const double x = hi * static_cast<double>(j) / 255.0;
    out.kde_x[j] = x;
    out.kde_density[j] = kde_density_at(x, out.raw, h);
  }
  return out;
}

// Per-user observed interaction counts for one cohort.
inline DistributionSummary interaction_distribution(
    std::span<const user_id> cohort, const Dataset& ds) {
  if (cohort.empty()) fail_invalid("interaction_distribution: empty cohort");
  std::vector<std::size_t> counts(ds.user_count, 0);
  for (const auto& t : ds.triples) ++counts[t.user];
  std::vector<double> raw;
  raw.reserve(cohort.size());
  for (user_id u : cohort) raw.push_back(static_cast<double>(counts[u]));
  return summarize_counts(std::move(raw));
}

struct CommonItemsResult {
  DistributionSummary in_network;
  DistributionSummary out_network;
  std::size_t in_shortfall = 0;   // missing neighbor pairs, tallied per user
  std::size_t out_shortfall = 0;
};

// Common-item counts over user pairs: in-network users are paired with
// sampled one-hop neighbors, out-of-network users with random users of the
// same cohort. Users with fewer neighbors than requested contribute as many
// pairs as they have; the shortfall is tallied.
inline CommonItemsResult common_item_distribution(const Dataset& ds,
                                                  const SocialGraph& g,
                                                  const CohortPair& cohorts,
                                                  std::size_t pairs_per_user,
                                                  std::uint64_t seed) {
  if (pairs_per_user == 0) {
    fail_invalid("common_item_distribution: pairs_per_user must be >= 1");
  }
  std::vector<std::unordered_set<item_id>> items(ds.user_count);
  for (const auto& t : ds.triples) items[t.user].insert(t.item);

  auto common = [&](user_id a, user_id b) {
    const auto& sa = items[a];
    const auto& sb = items[b];
    const auto& small = sa.size() <= sb.size() ? sa : sb;
    const auto& large = sa.size() <= sb.size() ? sb : sa;
    std::size_t c = 0;
    for (item_id i : small) c += large.count(i);
    return static_cast<double>(c);
  };

  CommonItemsResult out;
  Rng rng(derive_stream(seed, "common_items"));

  std::vector<double> in_raw;
  for (user_id u : cohorts.in_network) {
    const auto& nbrs = g.neighbors(u);
    const std::size_t k = std::min(pairs_per_user, nbrs.size());
    out.in_shortfall += pairs_per_user - k;
    for (std::size_t idx : rng.sample_without_replacement(nbrs.size(), k)) {
      in_raw.push_back(common(u, nbrs[idx]));
    }
  }

  std::vector<double> out_raw;
  for (user_id u : cohorts.out_network) {
    std::vector<user_id> others;
    others.reserve(cohorts.out_network.size());
    for (user_id v : cohorts.out_network) {
      if (v != u) others.push_back(v);
    }
    const std::size_t k = std::min(pairs_per_user, others.size());
    out.out_shortfall += pairs_per_user - k;
    for (std::size_t idx : rng.sample_without_replacement(others.size(), k)) {
      out_raw.push_back(common(u, others[idx]));
    }
  }

  out.in_network = summarize_counts(std::move(in_raw));
  out.out_network = summarize_counts(std::move(out_raw));
  return out;
}

struct SweepRow {
  double fraction = 0.0;
  std::uint64_t seed = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double p_at_20 = 0.0;
  double r_at_20 = 0.0;
};

// Social-relation robustness sweep: for each (fraction, seed) cell, mask
// that fraction of edges, re-split, train the configured pipeline, and
// evaluate on the held-out test split. Cells run independently (parallel
// safe); rows come out sorted by (fraction, seed). A fraction-0 cell is
// bit-identical to an unmasked train run under the same seed.
inline std::vector<SweepRow> masking_sweep(const TrainConfig& cfg,
                                           const Dataset& ds,
                                           const SocialGraph& g,
                                           std::span<const double> fractions,
                                           std::span<const std::uint64_t> seeds,
                                           const SplitSpec& split) {
  for (double f : fractions) {
    if (f < 0.0 || f >= 1.0) fail_invalid("masking_sweep: fractions must be in [0,1)");
  }
  if (fractions.empty() || seeds.empty()) {
    fail_invalid("masking_sweep: fractions and seeds must be non-empty");
  }

  std::vector<SweepRow> rows(fractions.size() * seeds.size());
  parallel_for(rows.size(), [&](std::size_t cell) {
    const double fraction = fractions[cell / seeds.size()];
    const std::uint64_t seed = seeds[cell % seeds.size()];

    const SocialGraph masked =
        mask_social_relations(g, fraction, derive_stream(seed, "sweep_mask"));
    SplitSpec cell_split = split;
    cell_split.seed = seed;
    const auto parts = split_dataset(ds, cell_split);

    TrainConfig cell_cfg = cfg;
    cell_cfg.seed = seed;
    if (std::find(cell_cfg.metrics.k_list.begin(), cell_cfg.metrics.k_list.end(),
                  std::size_t{20}) == cell_cfg.metrics.k_list.end()) {
      cell_cfg.metrics.k_list.push_back(20);
    }

    const auto model = train(cell_cfg, parts.train, parts.val, masked);
    const auto rep = evaluate_checkpoint(model, parts.test);

    SweepRow row;
    row.fraction = fraction;
    row.seed = seed;
    row.mae = rep.mae;
    row.rmse = rep.rmse;
    if (auto it = rep.precision_at_k.find(20); it != rep.precision_at_k.end()) {
      row.p_at_20 = it->second;
    }
    if (auto it = rep.recall_at_k.find(20); it != rep.recall_at_k.end()) {
      row.r_at_20 = it->second;
    }
    rows[cell] = row;
  });
  return rows;
}

}  // namespace denc
