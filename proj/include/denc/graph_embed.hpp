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
#include <unordered_map>
#include <vector>

#include "denc/common.hpp"
#include "denc/data.hpp"
#include "denc/parallel.hpp"
#include "denc/rng.hpp"
#include "denc/table.hpp"

namespace denc {

struct WalkConfig {
  std::size_t walks_per_node = 10;   // r
  std::size_t walk_length = 40;      // l
  std::size_t window = 5;            // k_ctx
  double return_param = 1.0;         // p
  double inout_param = 1.0;          // q
  std::size_t negatives_per_positive = 5;
  std::size_t embed_dim = 45;        // k_a
  std::size_t epochs = 5;
  double learning_rate = 0.025;      // linearly decayed
  std::uint64_t seed = 0;
};

inline void check_config(const WalkConfig& cfg) {
  if (cfg.walks_per_node == 0 || cfg.walk_length == 0 || cfg.window == 0 ||
      cfg.negatives_per_positive == 0 || cfg.embed_dim == 0) {
    fail_invalid("walk config: counts must be >= 1");
  }
  if (cfg.return_param <= 0.0 || cfg.inout_param <= 0.0) {
    fail_invalid("walk config: p and q must be positive");
  }
  if (cfg.learning_rate <= 0.0) {
    fail_invalid("walk config: learning_rate must be positive");
  }
}

// Per-user confounder vectors. Users that never appeared in a walk (isolated
// nodes) hold the zero vector and carry a fallback flag.
struct EmbeddingTable {
  Table z;  // m x k_a
  std::vector<std::uint8_t> fallback;

  std::span<const double> row(user_id u) const { return z.row(u); }
};

// Second-order walk bias: probability of stepping from curr to each
// neighbor, aligned with g.neighbors(curr). Weights: 1/p for returning to
// prev, 1 for neighbors adjacent to prev, 1/q otherwise; uniform when prev
// is absent (first step).
inline std::vector<double> transition_probs(const SocialGraph& g,
                                            const user_id* prev, user_id curr,
                                            const WalkConfig& cfg) {
  const auto& nbrs = g.neighbors(curr);
  if (nbrs.empty()) fail_invalid("transition_probs: node is isolated");
  std::vector<double> w(nbrs.size());
  if (prev == nullptr) {
    const double u = 1.0 / static_cast<double>(nbrs.size());
    for (auto& x : w) x = u;
    return w;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < nbrs.size(); ++k) {
    double weight;
    if (nbrs[k] == *prev) {
      weight = 1.0 / cfg.return_param;
    } else if (g.has_edge(nbrs[k], *prev)) {
      weight = 1.0;
    } else {
      weight = 1.0 / cfg.inout_param;
    }
    w[k] = weight;
    total += weight;
  }
  for (auto& x : w) x /= total;
  return w;
}

using Walk = std::vector<user_id>;

// r walks from each source, grouped by repetition and deterministic given
// the seed: walk t draws from its own stream keyed by t, so generation can
// run in parallel and is invariant to the worker count.
inline std::vector<Walk> generate_walks(const SocialGraph& g,
                                        const WalkConfig& cfg,
                                        const std::vector<user_id>& sources) {
  check_config(cfg);
  for (user_id s : sources) {
    if (g.degree(s) == 0) fail_invalid("generate_walks: isolated source");
  }
  const std::size_t total = cfg.walks_per_node * sources.size();
  std::vector<Walk> walks(total);
  parallel_for(total, [&](std::size_t t) {
    Rng rng(derive_stream(cfg.seed, "walk", t));
    user_id curr = sources[t % sources.size()];
    Walk walk;
    walk.reserve(cfg.walk_length);
    walk.push_back(curr);
    bool have_prev = false;
    user_id prev = 0;
    while (walk.size() < cfg.walk_length) {
      const auto& nbrs = g.neighbors(curr);
      if (nbrs.empty()) break;  // dead end; unreachable on undirected graphs
      const auto probs =
          transition_probs(g, have_prev ? &prev : nullptr, curr, cfg);
      const double x = rng.next_double();
      double acc = 0.0;
      std::size_t pick = nbrs.size() - 1;
      for (std::size_t k = 0; k < nbrs.size(); ++k) {
        acc += probs[k];
        if (x < acc) {
          pick = k;
          break;
        }
      }
      prev = curr;
      have_prev = true;
      curr = nbrs[pick];
      walk.push_back(curr);
    }
    walks[t] = std::move(walk);
  });
  return walks;
}

inline std::vector<Walk> generate_walks(const SocialGraph& g,
                                        const WalkConfig& cfg) {
  std::vector<user_id> sources;
  for (std::size_t u = 0; u < g.node_count; ++u) {
    if (g.degree(static_cast<user_id>(u)) > 0) {
      sources.push_back(static_cast<user_id>(u));
    }
  }
  return generate_walks(g, cfg, sources);
}

struct SgnsPairGrad {
  double loss = 0.0;
  std::vector<double> d_center;
  std::vector<double> d_context;
  std::vector<std::vector<double>> d_negatives;
};

// Skip-gram negative-sampling loss for one (center, context) pair:
// -log sigmoid(zc.zo) - sum_k log sigmoid(-zc.znk), with exact gradients.
inline SgnsPairGrad sgns_pair_loss(std::span<const double> center,
                                   std::span<const double> context,
                                   const std::vector<std::vector<double>>& negatives) {
  const std::size_t d = center.size();
  if (context.size() != d) fail_invalid("sgns_pair_loss: dimension mismatch");
  SgnsPairGrad out;
  out.d_center.assign(d, 0.0);
  out.d_context.assign(d, 0.0);

  const double s_pos = dot(center, context);
  out.loss += softplus(-s_pos);
  const double g_pos = sigmoid(s_pos) - 1.0;  // d loss / d s_pos
  for (std::size_t k = 0; k < d; ++k) {
    out.d_center[k] += g_pos * context[k];
    out.d_context[k] += g_pos * center[k];
  }

  out.d_negatives.resize(negatives.size());
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    const auto& zn = negatives[j];
    if (zn.size() != d) fail_invalid("sgns_pair_loss: dimension mismatch");
    const double s = dot(center, {zn.data(), zn.size()});
    out.loss += softplus(s);
    const double g = sigmoid(s);  // d loss / d s
    out.d_negatives[j].assign(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      out.d_center[k] += g * zn[k];
      out.d_negatives[j][k] += g * center[k];
    }
  }
  return out;
}

namespace detail {

// Walk vocabulary in first-appearance order. Keying initialization and the
// noise distribution by this rank (never by raw node id) is what makes
// training equivariant under node relabeling.
struct WalkVocab {
  std::vector<user_id> node_of_rank;
  std::unordered_map<user_id, std::size_t> rank_of_node;
  std::vector<double> noise_cdf;  // cumulative unigram^0.75 over ranks
  std::size_t total_tokens = 0;

  static WalkVocab build(const std::vector<Walk>& walks) {
    WalkVocab v;
    std::vector<std::size_t> counts;
    for (const auto& w : walks) {
      for (user_id node : w) {
        auto [it, fresh] = v.rank_of_node.try_emplace(node, v.node_of_rank.size());
        if (fresh) {
          v.node_of_rank.push_back(node);
          counts.push_back(0);
        }
        ++counts[it->second];
        ++v.total_tokens;
      }
    }
    v.noise_cdf.resize(counts.size());
    double acc = 0.0;
    for (std::size_t r = 0; r < counts.size(); ++r) {
      acc += std::pow(static_cast<double>(counts[r]), 0.75);
      v.noise_cdf[r] = acc;
    }
    return v;
  }

  std::size_t sample_rank(Rng& rng) const {
    const double x = rng.next_double() * noise_cdf.back();
    std::size_t lo = 0, hi = noise_cdf.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (noise_cdf[mid] <= x) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lo;
  }
};

template <typename PairFn>
void for_each_window_pair(const std::vector<Walk>& walks, std::size_t window,
                          PairFn&& fn) {
  for (const auto& w : walks) {
    for (std::size_t c = 0; c < w.size(); ++c) {
      const std::size_t lo = c >= window ? c - window : 0;
      const std::size_t hi = std::min(w.size(), c + window + 1);
      for (std::size_t o = lo; o < hi; ++o) {
        if (o != c) fn(w[c], w[o]);
      }
    }
  }
}

}  // namespace detail

// Full SGNS state: the center (input) table that becomes the user
// embedding, plus the context (output) table needed to evaluate the
// training objective. Both are node-indexed; rows of nodes absent from the
// walks are zero.
struct SgnsModel {
  EmbeddingTable center;
  Table context;
};

// SGNS training over walk co-occurrence pairs, standard word2vec layout:
// an input (center) table initialized uniformly and an output (context)
// table initialized at zero. Sharing one table for both roles is unstable
// here — walks revisit nodes inside the window, and those self-pairs reward
// unbounded norm growth, washing out the cosine geometry. The center table
// is what nodes with the same neighborhood distribution end up agreeing on,
// so it is the embedding consumers read. Linear learning-rate decay, floor
// at 1e-4 of the initial rate.
inline SgnsModel train_sgns(const std::vector<Walk>& walks,
                            std::size_t node_count,
                            const WalkConfig& cfg) {
  check_config(cfg);
  bool has_pair = false;
  for (const auto& w : walks) {
    if (w.size() >= 2) {
      has_pair = true;
      break;
    }
  }
  if (walks.empty() || !has_pair) {
    fail_invalid("train_embeddings: no usable walks");
  }

  const auto vocab = detail::WalkVocab::build(walks);
  const std::size_t d = cfg.embed_dim;

  // Rank-indexed training matrices, center rows seeded per rank so the
  // result is equivariant under node relabeling.
  Table vec(vocab.node_of_rank.size(), d);
  for (std::size_t r = 0; r < vec.rows; ++r) {
    Rng rng(derive_stream(cfg.seed, "sgns_init", r));
    for (std::size_t k = 0; k < d; ++k) {
      vec.at(r, k) = (rng.next_double() - 0.5) / static_cast<double>(d);
    }
  }
  Table ctx(vocab.node_of_rank.size(), d);  // zero-initialized

  std::size_t total_pairs = 0;
  detail::for_each_window_pair(walks, cfg.window,
                               [&](user_id, user_id) { ++total_pairs; });

  Rng neg_rng(derive_stream(cfg.seed, "sgns_negatives"));
  const double lr0 = cfg.learning_rate;
  const double total_updates =
      static_cast<double>(total_pairs) * static_cast<double>(cfg.epochs);
  std::size_t done = 0;
  std::vector<double> accum(d);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::for_each_window_pair(walks, cfg.window, [&](user_id cn, user_id on) {
      const double lr =
          lr0 * std::max(1e-4, 1.0 - static_cast<double>(done) / total_updates);
      ++done;
      const std::size_t cr = vocab.rank_of_node.at(cn);
      const std::size_t orank = vocab.rank_of_node.at(on);
      auto zc = vec.row(cr);
      std::fill(accum.begin(), accum.end(), 0.0);

      auto push = [&](std::size_t target_rank, double label) {
        auto zt = ctx.row(target_rank);
        const double s = dot({zc.data(), d}, {zt.data(), d});
        const double g = (label - sigmoid(s)) * lr;
        for (std::size_t k = 0; k < d; ++k) {
          accum[k] += g * zt[k];
          zt[k] += g * zc[k];
        }
      };

      push(orank, 1.0);
      for (std::size_t j = 0; j < cfg.negatives_per_positive; ++j) {
        const std::size_t nr = vocab.sample_rank(neg_rng);
        if (nr == cr || nr == orank) continue;  // draw consumed either way
        push(nr, 0.0);
      }
      for (std::size_t k = 0; k < d; ++k) zc[k] += accum[k];
    });
  }

  SgnsModel out;
  out.center.z = Table(node_count, d);
  out.center.fallback.assign(node_count, 1);
  out.context = Table(node_count, d);
  for (std::size_t r = 0; r < vocab.node_of_rank.size(); ++r) {
    const user_id u = vocab.node_of_rank[r];
    auto src = vec.row(r);
    auto dst = out.center.z.row(u);
    std::copy(src.begin(), src.end(), dst.begin());
    auto csrc = ctx.row(r);
    auto cdst = out.context.row(u);
    std::copy(csrc.begin(), csrc.end(), cdst.begin());
    out.center.fallback[u] = 0;
  }
  return out;
}

// Center-table view of train_sgns for callers that only need the
// embedding.
inline EmbeddingTable train_embeddings(const std::vector<Walk>& walks,
                                       std::size_t node_count,
                                       const WalkConfig& cfg) {
  return train_sgns(walks, node_count, cfg).center;
}

// Mean SGNS pair loss of a fixed embedding table over the walks' window
// pairs, negatives drawn from a dedicated stream. Diagnostic / validation
// view of the training surrogate.
inline double sgns_corpus_loss(const std::vector<Walk>& walks,
                               const SgnsModel& model,
                               const WalkConfig& cfg) {
  const auto vocab = detail::WalkVocab::build(walks);
  Rng neg_rng(derive_stream(cfg.seed, "sgns_eval_negatives"));
  double loss = 0.0;
  std::size_t pairs = 0;
  detail::for_each_window_pair(walks, cfg.window, [&](user_id cn, user_id on) {
    auto zc = model.center.z.row(cn);
    double l = softplus(-dot(zc, model.context.row(on)));
    for (std::size_t j = 0; j < cfg.negatives_per_positive; ++j) {
      const std::size_t nr = vocab.sample_rank(neg_rng);
      const user_id nn = vocab.node_of_rank[nr];
      if (nn == cn || nn == on) continue;
      l += softplus(dot(zc, model.context.row(nn)));
    }
    loss += l;
    ++pairs;
  });
  if (pairs == 0) fail_invalid("sgns_corpus_loss: no pairs");
  return loss / static_cast<double>(pairs);
}

// Exact negative log-likelihood of the neighborhood softmax: for each window
// pair, log sum_v exp(zc.xv) - zc.xo with context rows x, averaged over
// pairs. The partition sums over every row of the context table, so this is
// only tractable for small graphs; it exists to validate the
// negative-sampling surrogate against the full softmax.
inline double softmax_neighborhood_loss(const std::vector<Walk>& walks,
                                        const SgnsModel& model,
                                        const WalkConfig& cfg) {
  if (model.center.z.rows > 200) {
    fail_invalid("softmax_neighborhood_loss: exact evaluation limited to 200 nodes");
  }
  double loss = 0.0;
  std::size_t pairs = 0;
  detail::for_each_window_pair(walks, cfg.window, [&](user_id cn, user_id on) {
    auto zc = model.center.z.row(cn);
    // log-sum-exp over all nodes, max-shifted for stability
    double mx = -1e300;
    std::vector<double> scores(model.context.rows);
    for (std::size_t v = 0; v < model.context.rows; ++v) {
      scores[v] = dot(zc, model.context.row(v));
      if (scores[v] > mx) mx = scores[v];
    }
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - mx);
    loss += mx + std::log(sum) - dot(zc, model.context.row(on));
    ++pairs;
  });
  if (pairs == 0) fail_invalid("softmax_neighborhood_loss: no pairs");
  return loss / static_cast<double>(pairs);
}

// Convenience pipeline: walks then SGNS over a social graph.
inline EmbeddingTable node2vec_embed(const SocialGraph& g, const WalkConfig& cfg) {
  check_config(cfg);
  bool any_edge = false;
  for (std::size_t u = 0; u < g.node_count && !any_edge; ++u) {
    any_edge = g.degree(static_cast<user_id>(u)) > 0;
  }
  if (!any_edge) {
    // Edgeless graph: every user is isolated, all-zero table.
    EmbeddingTable out;
    out.z = Table(g.node_count, cfg.embed_dim);
    out.fallback.assign(g.node_count, 1);
    return out;
  }
  const auto walks = generate_walks(g, cfg);
  return train_embeddings(walks, g.node_count, cfg);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace denc
