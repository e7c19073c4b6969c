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
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "denc/common.hpp"
#include "denc/rng.hpp"

namespace denc {

struct RatingTriple {
  user_id user = 0;
  item_id item = 0;
  double rating = 0.0;
};

// Rating observations over a dense (user, item) index space. Label vectors
// carry the original string IDs when the data came from files; synthetic
// datasets leave them empty and writers fall back to the numeric index.
struct Dataset {
  std::size_t user_count = 0;
  std::size_t item_count = 0;
  std::vector<RatingTriple> triples;
  std::unordered_set<std::uint64_t> observed;  // pair_key(u, i) per triple
  std::vector<std::string> user_labels;
  std::vector<std::string> item_labels;

  bool is_observed(user_id u, item_id i) const {
    return observed.count(pair_key(u, i)) > 0;
  }

  std::string user_label(user_id u) const {
    return user_labels.empty() ? std::to_string(u) : user_labels[u];
  }
  std::string item_label(item_id i) const {
    return item_labels.empty() ? std::to_string(i) : item_labels[i];
  }
};

inline void check_dataset(const Dataset& ds) {
  if (ds.observed.size() != ds.triples.size()) {
    fail_invalid("dataset: observed index out of sync with triples");
  }
  for (const auto& t : ds.triples) {
    if (t.user >= ds.user_count || t.item >= ds.item_count) {
      fail_invalid("dataset: triple index out of range");
    }
  }
}

// Undirected social graph. Adjacency lists keep edge-insertion order, which
// downstream walk generation relies on for reproducibility.
struct SocialGraph {
  std::size_t node_count = 0;
  std::vector<std::pair<user_id, user_id>> edges;  // normalized u < v
  std::vector<std::vector<user_id>> adjacency;
  std::unordered_set<std::uint64_t> edge_keys;

  explicit SocialGraph(std::size_t n = 0) : node_count(n), adjacency(n) {}

  bool has_edge(user_id u, user_id v) const {
    if (u > v) std::swap(u, v);
    return edge_keys.count(pair_key(u, v)) > 0;
  }

  // Returns false (and leaves the graph unchanged) for duplicates.
  bool add_edge(user_id u, user_id v) {
    if (u == v) fail_invalid("social graph: self loop");
    if (u >= node_count || v >= node_count) {
      fail_invalid("social graph: node out of range");
    }
    if (u > v) std::swap(u, v);
    if (!edge_keys.insert(pair_key(u, v)).second) return false;
    edges.emplace_back(u, v);
    adjacency[u].push_back(v);
    adjacency[v].push_back(u);
    return true;
  }

  std::size_t degree(user_id u) const { return adjacency[u].size(); }
  const std::vector<user_id>& neighbors(user_id u) const {
    return adjacency[u];
  }
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline double parse_rating_value(const std::string& s, const std::string& origin,
                                 std::size_t lineno) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail_invalid(origin + ":" + std::to_string(lineno) +
                 ": rating is not a number: " + s);
  }
}

}  // namespace detail

struct RatingsParseResult {
  Dataset dataset;
  std::unordered_map<std::string, user_id> user_index;
  std::unordered_map<std::string, item_id> item_index;
  std::size_t duplicate_count = 0;  // repeated (user, item) pairs, last wins
};

// TSV "user \t item \t rating". '#'-prefixed lines and blank lines are
// skipped. IDs become dense indices in first-appearance order. Duplicate
// pairs keep the last value and are tallied.
inline RatingsParseResult parse_ratings(std::istream& in,
                                        const std::string& origin = "ratings") {
  RatingsParseResult res;
  Dataset& ds = res.dataset;
  std::unordered_map<std::uint64_t, std::size_t> triple_at;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      fail_invalid(origin + ":" + std::to_string(lineno) +
                   ": expected 3 tab-separated fields");
    }
    const double rating =
        detail::parse_rating_value(fields[2], origin, lineno);

    auto [uit, unew] = res.user_index.try_emplace(
        fields[0], static_cast<user_id>(ds.user_count));
    if (unew) {
      ++ds.user_count;
      ds.user_labels.push_back(fields[0]);
    }
    auto [iit, inew] = res.item_index.try_emplace(
        fields[1], static_cast<item_id>(ds.item_count));
    if (inew) {
      ++ds.item_count;
      ds.item_labels.push_back(fields[1]);
    }
    const user_id u = uit->second;
    const item_id i = iit->second;
    const std::uint64_t key = pair_key(u, i);
    auto [tit, tnew] = triple_at.try_emplace(key, ds.triples.size());
    if (tnew) {
      ds.triples.push_back({u, i, rating});
      ds.observed.insert(key);
    } else {
      ds.triples[tit->second].rating = rating;
      ++res.duplicate_count;
    }
  }
  return res;
}

inline void write_ratings(std::ostream& out, const Dataset& ds) {
  char buf[64];
  for (const auto& t : ds.triples) {
    const int len = std::snprintf(buf, sizeof buf, "%.17g", t.rating);
    out << ds.user_label(t.user) << '\t' << ds.item_label(t.item) << '\t';
    out.write(buf, len);
    out << '\n';
  }
}

struct EdgeParseResult {
  SocialGraph graph;
  std::size_t self_loop_count = 0;
  std::size_t unknown_user_count = 0;  // edges touching users absent from ratings
  std::size_t duplicate_count = 0;

  EdgeParseResult() : graph(0) {}
};

// TSV "user \t user" against the user index from parse_ratings. Self loops
// and edges mentioning unknown users are skipped and tallied; duplicates
// (either direction) are dropped.
inline EdgeParseResult parse_social_edges(
    std::istream& in, const std::unordered_map<std::string, user_id>& user_index,
    std::size_t user_count, const std::string& origin = "trust") {
  EdgeParseResult res;
  res.graph = SocialGraph(user_count);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      fail_invalid(origin + ":" + std::to_string(lineno) +
                   ": expected 2 tab-separated fields");
    }
    const auto a = user_index.find(fields[0]);
    const auto b = user_index.find(fields[1]);
    if (a == user_index.end() || b == user_index.end()) {
      ++res.unknown_user_count;
      continue;
    }
    if (a->second == b->second) {
      ++res.self_loop_count;
      continue;
    }
    if (!res.graph.add_edge(a->second, b->second)) ++res.duplicate_count;
  }
  return res;
}

inline void write_social_edges(std::ostream& out, const SocialGraph& g,
                               const Dataset& ds) {
  for (const auto& [u, v] : g.edges) {
    out << ds.user_label(u) << '\t' << ds.user_label(v) << '\n';
  }
}

struct SplitSpec {
  double test_fraction = 0.2;
  double val_fraction = 0.2;  // fraction of the remaining train pool
  std::uint64_t seed = 0;
};

struct SplitResult {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Seeded shuffle split. Sizes follow the fractions with round-half-up;
// the three parts share the full index space and labels.
inline SplitResult split_dataset(const Dataset& ds, const SplitSpec& spec) {
  if (spec.test_fraction < 0.0 || spec.test_fraction >= 1.0) {
    fail_invalid("split: test_fraction must be in [0, 1)");
  }
  if (spec.val_fraction < 0.0 || spec.val_fraction >= 1.0) {
    fail_invalid("split: val_fraction must be in [0, 1)");
  }
  const std::size_t n = ds.triples.size();
  const auto n_test = static_cast<std::size_t>(
      round_half_up(static_cast<double>(n) * spec.test_fraction));
  const auto n_val = static_cast<std::size_t>(round_half_up(
      static_cast<double>(n - n_test) * spec.val_fraction));
  if (n_test == 0 && spec.test_fraction > 0.0) {
    fail_invalid("split: test split is empty");
  }
  if (n_val == 0 && spec.val_fraction > 0.0) {
    fail_invalid("split: validation split is empty");
  }
  if (n_test + n_val >= n) fail_invalid("split: train split is empty");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_stream(spec.seed, "split"));
  rng.shuffle(order);

  auto make_part = [&](std::size_t begin, std::size_t end) {
    Dataset part;
    part.user_count = ds.user_count;
    part.item_count = ds.item_count;
    part.user_labels = ds.user_labels;
    part.item_labels = ds.item_labels;
    part.triples.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) {
      const auto& t = ds.triples[order[k]];
      part.triples.push_back(t);
      part.observed.insert(pair_key(t.user, t.item));
    }
    return part;
  };

  SplitResult res;
  res.test = make_part(0, n_test);
  res.val = make_part(n_test, n_test + n_val);
  res.train = make_part(n_test + n_val, n);
  return res;
}

struct StatsReport {
  std::size_t user_count = 0;
  std::size_t item_count = 0;
  std::size_t rating_count = 0;
  std::size_t relation_count = 0;  // undirected edges
  double density_r = 0.0;
  double density_sr = 0.0;
};

// ratings / (users * items) * 100, in percent.
inline double rating_density(std::size_t users, std::size_t items,
                             std::size_t ratings) {
  if (users == 0 || items == 0) return 0.0;
  return static_cast<double>(ratings) /
         (static_cast<double>(users) * static_cast<double>(items)) * 100.0;
}

// directed_pairs / users^2 * 100. Published trust counts are directed, so
// callers with undirected storage pass 2x the edge count.
inline double relation_density(std::size_t directed_pairs, std::size_t users) {
  if (users == 0) return 0.0;
  return static_cast<double>(directed_pairs) /
         (static_cast<double>(users) * static_cast<double>(users)) * 100.0;
}

inline StatsReport dataset_stats(const Dataset& ds, const SocialGraph& g) {
  if (g.node_count != ds.user_count) {
    fail_invalid("stats: graph node count does not match dataset users");
  }
  StatsReport r;
  r.user_count = ds.user_count;
  r.item_count = ds.item_count;
  r.rating_count = ds.triples.size();
  r.relation_count = g.edges.size();
  r.density_r = rating_density(r.user_count, r.item_count, r.rating_count);
  r.density_sr = relation_density(2 * r.relation_count, r.user_count);
  return r;
}

// Removes round(fraction * |edges|) edges, chosen uniformly at random;
// survivors keep their original insertion order. fraction 0 is an exact
// identity including the seed (no draws are consumed).
inline SocialGraph mask_social_relations(const SocialGraph& g, double fraction,
                                         std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    fail_invalid("mask: fraction must be in [0, 1]");
  }
  const std::size_t e = g.edges.size();
  const auto k = static_cast<std::size_t>(
      round_half_up(fraction * static_cast<double>(e)));
  SocialGraph out(g.node_count);
  if (k == 0) {
    for (const auto& [u, v] : g.edges) out.add_edge(u, v);
    return out;
  }
  Rng rng(derive_stream(seed, "mask"));
  const auto removed_list = rng.sample_without_replacement(e, k);
  std::unordered_set<std::size_t> removed(removed_list.begin(),
                                          removed_list.end());
  for (std::size_t i = 0; i < e; ++i) {
    if (!removed.count(i)) out.add_edge(g.edges[i].first, g.edges[i].second);
  }
  return out;
}

}  // namespace denc
