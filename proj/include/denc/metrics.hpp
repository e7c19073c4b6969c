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
#include <map>
#include <span>
#include <unordered_set>
#include <vector>

#include "denc/common.hpp"

namespace denc {

struct MetricsConfig {
  double relevance_threshold = 3.5;
  std::vector<std::size_t> k_list = {10, 15, 20, 25, 30, 35, 40};
  bool clamp = false;  // clamp predictions to [lo, hi] before MAE/RMSE
  double clamp_lo = 1.0;
  double clamp_hi = 5.0;
};

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::vector<std::size_t> k_list;
  std::map<std::size_t, double> precision_at_k;
  std::map<std::size_t, double> recall_at_k;
  double relevance_threshold = 3.5;
  std::size_t rated_pairs = 0;
  std::size_t ranked_users = 0;
};

inline double mae(std::span<const double> preds, std::span<const double> truths) {
  if (preds.empty() || preds.size() != truths.size()) {
    fail_invalid("mae: inputs must be non-empty and aligned");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    s += std::fabs(preds[i] - truths[i]);
  }
  return s / static_cast<double>(preds.size());
}

inline double rmse(std::span<const double> preds, std::span<const double> truths) {
  if (preds.empty() || preds.size() != truths.size()) {
    fail_invalid("rmse: inputs must be non-empty and aligned");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - truths[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(preds.size()));
}

// One user's ranking inputs: items ranked best-first (deduplicated) and the
// set of relevant items.
struct RankedUser {
  std::vector<item_id> ranked;
  std::unordered_set<item_id> relevant;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Macro-averaged P@K and R@K. Users with an empty relevant set count toward
// precision (as zero hits) but are excluded from the recall average.
inline PrecisionRecall precision_recall_at_k(std::span<const RankedUser> users,
                                             std::size_t k) {
  if (k == 0) fail_invalid("precision_recall_at_k: K must be positive");
  if (users.empty()) fail_invalid("precision_recall_at_k: no users");
  double p_sum = 0.0, r_sum = 0.0;
  std::size_t r_users = 0;
  for (const auto& u : users) {
    const std::size_t depth = std::min(k, u.ranked.size());
    std::size_t hits = 0;
    for (std::size_t j = 0; j < depth; ++j) {
      if (u.relevant.count(u.ranked[j])) ++hits;
    }
    p_sum += static_cast<double>(hits) / static_cast<double>(k);
    if (!u.relevant.empty()) {
      r_sum += static_cast<double>(hits) / static_cast<double>(u.relevant.size());
      ++r_users;
    }
  }
  PrecisionRecall pr;
  pr.precision = p_sum / static_cast<double>(users.size());
  pr.recall = r_users == 0 ? 0.0 : r_sum / static_cast<double>(r_users);
  return pr;
}

// Deterministic ranking of scored candidates: descending score, ties broken
// by ascending item index.
inline std::vector<item_id> rank_items(
    std::span<const std::pair<item_id, double>> scored) {
  std::vector<std::pair<item_id, double>> v(scored.begin(), scored.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<item_id> out;
  out.reserve(v.size());
  for (const auto& [i, s] : v) out.push_back(i);
  return out;
}

}  // namespace denc
