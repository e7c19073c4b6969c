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
#include <vector>

#include "denc/common.hpp"
#include "denc/data.hpp"
#include "denc/parallel.hpp"
#include "denc/rng.hpp"
#include "denc/table.hpp"

namespace denc {

// Confounder strength applied to social-graph members. The exposure
// probability for members is 0.5 + delta, so delta must keep that in [0,1].
struct ConfounderLevel {
  double delta = 0.35;
};

inline void check_level(const ConfounderLevel& level) {
  const double p = 0.5 + level.delta;
  if (p < 0.0 || p > 1.0) {
    fail_invalid("confounder level: 0.5 + delta must lie in [0, 1]");
  }
}

struct SynthConfig {
  std::size_t users = 500;
  std::size_t items = 800;
  double membership_fraction = 0.5;  // share of users belonging to the graph
  double edge_prob = 0.05;           // member-pair connection probability
  double beta = 2.0;                 // confounder rating offset coefficient
  double noise_sd = 1.0;             // sd of the member rating noise
  std::size_t base_rank = 5;         // rank of the base-rating latent model
  std::uint64_t seed = 0;
};

inline void check_config(const SynthConfig& cfg) {
  if (cfg.users == 0 || cfg.items == 0) {
    fail_invalid("synth config: users and items must be positive");
  }
  if (cfg.membership_fraction < 0.0 || cfg.membership_fraction > 1.0) {
    fail_invalid("synth config: membership_fraction must be in [0, 1]");
  }
  if (cfg.edge_prob < 0.0 || cfg.edge_prob > 1.0) {
    fail_invalid("synth config: edge_prob must be in [0, 1]");
  }
  if (cfg.noise_sd < 0.0) fail_invalid("synth config: noise_sd must be >= 0");
  if (cfg.base_rank == 0) fail_invalid("synth config: base_rank must be >= 1");
}

// Base rating before rounding: mu + <p_u, q_i> + eta. Kept separate so the
// mean-only and clamping behavior can be pinned down directly.
inline double base_rating_value(double dot_pq, double eta) {
  return clamp_rating(round_half_up(3.0 + dot_pq + eta));
}

// Seeded low-rank base ratings y(u,i) = clamp(round(3 + p_u.q_i + eta), 1, 5).
// Latent entries have sd rank^(-1/4) so the dot product has unit variance;
// eta ~ N(0, 0.25). Rows draw from per-row streams and may fill in parallel.
inline Table generate_base_ratings(const SynthConfig& cfg) {
  check_config(cfg);
  const std::size_t r = cfg.base_rank;
  const double entry_sd = std::pow(static_cast<double>(r), -0.25);

  Table p(cfg.users, r), q(cfg.items, r);
  for (std::size_t u = 0; u < cfg.users; ++u) {
    Rng rng(derive_stream(cfg.seed, "base_p", u));
    for (std::size_t k = 0; k < r; ++k) p.at(u, k) = rng.next_normal(0.0, entry_sd);
  }
  for (std::size_t i = 0; i < cfg.items; ++i) {
    Rng rng(derive_stream(cfg.seed, "base_q", i));
    for (std::size_t k = 0; k < r; ++k) q.at(i, k) = rng.next_normal(0.0, entry_sd);
  }

  Table y(cfg.users, cfg.items);
  parallel_for(cfg.users, [&](std::size_t u) {
    Rng rng(derive_stream(cfg.seed, "base_eta", u));
    for (std::size_t i = 0; i < cfg.items; ++i) {
      const double eta = rng.next_normal(0.0, 0.5);
      y.at(u, i) = base_rating_value(dot(p.row(u), q.row(i)), eta);
    }
  });
  return y;
}

struct ConfoundedGraph {
  SocialGraph graph;
  std::vector<std::uint8_t> member;  // 1 if the user belongs to the graph

  ConfoundedGraph() : graph(0) {}
};

// Users join the graph independently with membership_fraction; every member
// pair is connected independently with edge_prob. Non-members keep degree 0.
inline ConfoundedGraph generate_confounded_graph(const SynthConfig& cfg) {
  check_config(cfg);
  ConfoundedGraph out;
  out.graph = SocialGraph(cfg.users);
  out.member.assign(cfg.users, 0);

  Rng member_rng(derive_stream(cfg.seed, "membership"));
  std::vector<user_id> members;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    if (member_rng.next_bernoulli(cfg.membership_fraction)) {
      out.member[u] = 1;
      members.push_back(static_cast<user_id>(u));
    }
  }

  Rng edge_rng(derive_stream(cfg.seed, "edges"));
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      if (edge_rng.next_bernoulli(cfg.edge_prob)) {
        out.graph.add_edge(members[a], members[b]);
      }
    }
  }
  return out;
}

// Bernoulli exposure draw: members see items with probability 0.5 + delta,
// non-members with 0.5.
inline bool simulate_exposure(const ConfounderLevel& level, bool member,
                              Rng& rng) {
  check_level(level);
  const double p = member ? 0.5 + level.delta : 0.5;
  return rng.next_bernoulli(p);
}

struct SemiSyntheticDataset {
  Dataset dataset;     // observed triples only (cells with a=1)
  Table full_truth;    // complete rating table, for held-out evaluation
  Table exposure;      // full binary exposure table (0/1)
  SocialGraph graph;
  std::vector<std::uint8_t> member;
  SynthConfig config;
  ConfounderLevel level;

  SemiSyntheticDataset() : graph(0) {}
};

// Confounded generation: members' true ratings get the offset beta*delta
// plus Gaussian noise and their exposure is biased to 0.5+delta; non-members
// keep the base ratings exactly and even exposure. The observed dataset is
// the set of cells with exposure 1, carrying full-truth values.
inline SemiSyntheticDataset synthesize(const SynthConfig& cfg,
                                       const ConfounderLevel& level) {
  check_config(cfg);
  check_level(level);

  SemiSyntheticDataset out;
  out.config = cfg;
  out.level = level;
  out.full_truth = generate_base_ratings(cfg);

  auto cg = generate_confounded_graph(cfg);
  out.graph = std::move(cg.graph);
  out.member = std::move(cg.member);

  out.exposure = Table(cfg.users, cfg.items);
  parallel_for(cfg.users, [&](std::size_t u) {
    const bool member = out.member[u] != 0;
    Rng noise_rng(derive_stream(cfg.seed, "rating_noise", u));
    Rng expo_rng(derive_stream(cfg.seed, "exposure", u));
    for (std::size_t i = 0; i < cfg.items; ++i) {
      if (member) {
        const double eps = noise_rng.next_normal(0.0, cfg.noise_sd);
        out.full_truth.at(u, i) += cfg.beta * level.delta + eps;
      }
      out.exposure.at(u, i) =
          simulate_exposure(level, member, expo_rng) ? 1.0 : 0.0;
    }
  });

  Dataset& ds = out.dataset;
  ds.user_count = cfg.users;
  ds.item_count = cfg.items;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    for (std::size_t i = 0; i < cfg.items; ++i) {
      if (out.exposure.at(u, i) != 0.0) {
        const auto uu = static_cast<user_id>(u);
        const auto ii = static_cast<item_id>(i);
        ds.triples.push_back({uu, ii, out.full_truth.at(u, i)});
        ds.observed.insert(pair_key(uu, ii));
      }
    }
  }
  return out;
}

}  // namespace denc
