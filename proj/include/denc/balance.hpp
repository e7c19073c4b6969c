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
#include <numeric>
#include <vector>

#include "denc/common.hpp"
#include "denc/data.hpp"
#include "denc/rng.hpp"
#include "denc/table.hpp"

namespace denc {

// Latent factor tables shared by the rating model and the balance penalty.
struct FactorSpace {
  Table user_factors;  // m x k_d
  Table item_factors;  // n x k_d

  std::size_t k_d() const { return user_factors.cols; }
};

struct BalancedBatch {
  std::vector<std::pair<user_id, item_id>> exposed_pairs;
  std::vector<std::pair<user_id, item_id>> unexposed_pairs;
  Table exposed;    // l x 2k_d, rows are [U_u ; I_i]
  Table unexposed;  // l x 2k_d
};

// l exposed cells drawn uniformly from the observed set and l unexposed
// cells drawn uniformly from its complement, each represented as the
// concatenated pair vector [U_u ; I_i]. When the complement is small it is
// enumerated outright; otherwise cells are rejection-sampled against the
// observed index.
inline BalancedBatch sample_balanced_batch(const FactorSpace& fs,
                                           const Dataset& ds, std::size_t l,
                                           std::uint64_t seed) {
  if (l == 0) fail_invalid("balanced batch: l must be positive");
  const std::size_t m = ds.user_count, n = ds.item_count;
  const std::size_t total = m * n;
  const std::size_t n_obs = ds.triples.size();
  if (n_obs < l) fail_invalid("balanced batch: fewer than l exposed pairs");
  if (total - n_obs < l) {
    fail_invalid("balanced batch: fewer than l unexposed cells");
  }
  if (fs.user_factors.rows != m || fs.item_factors.rows != n) {
    fail_invalid("balanced batch: factor tables do not match dataset");
  }

  const std::size_t kd = fs.k_d();
  BalancedBatch out;
  out.exposed = Table(l, 2 * kd);
  out.unexposed = Table(l, 2 * kd);
  Rng rng(derive_stream(seed, "balanced_batch"));

  auto fill_row = [&](Table& t, std::size_t r, user_id u, item_id i) {
    auto dst = t.row(r);
    auto uf = fs.user_factors.row(u);
    auto itf = fs.item_factors.row(i);
    std::copy(uf.begin(), uf.end(), dst.begin());
    std::copy(itf.begin(), itf.end(), dst.begin() + static_cast<std::ptrdiff_t>(kd));
  };

  for (std::size_t r = 0; r < l; ++r) {
    const auto& t = ds.triples[rng.next_below(n_obs)];
    out.exposed_pairs.emplace_back(t.user, t.item);
    fill_row(out.exposed, r, t.user, t.item);
  }

  const std::size_t complement = total - n_obs;
  if (complement <= std::max<std::size_t>(4 * l, 1024)) {
    std::vector<std::pair<user_id, item_id>> pool;
    pool.reserve(complement);
    for (std::size_t u = 0; u < m; ++u) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!ds.is_observed(static_cast<user_id>(u), static_cast<item_id>(i))) {
          pool.emplace_back(static_cast<user_id>(u), static_cast<item_id>(i));
        }
      }
    }
    for (std::size_t r = 0; r < l; ++r) {
      const auto& [u, i] = pool[rng.next_below(pool.size())];
      out.unexposed_pairs.emplace_back(u, i);
      fill_row(out.unexposed, r, u, i);
    }
  } else {
    for (std::size_t r = 0; r < l; ++r) {
      while (true) {
        const auto u = static_cast<user_id>(rng.next_below(m));
        const auto i = static_cast<item_id>(rng.next_below(n));
        if (!ds.is_observed(u, i)) {
          out.unexposed_pairs.emplace_back(u, i);
          fill_row(out.unexposed, r, u, i);
          break;
        }
      }
    }
  }
  return out;
}

// Pairwise Euclidean distances C[i][j] = |A_i - B_j|.
inline Table cost_matrix(const Table& a, const Table& b) {
  if (a.cols != b.cols) fail_invalid("cost_matrix: dimension mismatch");
  Table c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      c.at(i, j) = std::sqrt(squared_distance(a.row(i), b.row(j)));
    }
  }
  return c;
}

struct TransportPlan {
  Table gamma;                  // l x l, entries >= 0
  double marginal_error = 0.0;  // max deviation of row/col sums from 1/l
};

struct SinkhornResult {
  double distance = 0.0;
  TransportPlan plan;
  bool converged = false;
  std::size_t iterations = 0;
};

// Entropic-regularized optimal transport with uniform 1/l marginals, solved
// by log-domain Sinkhorn iterations (stable for small eps_reg). distance is
// <gamma, C>. Non-convergence within max_iters is reported via the flag,
// never an error.
//
// Two accelerations make tiny regularizers practical. First, epsilon
// scaling: the iteration starts near the largest cost and quarters the
// temperature down to eps_reg, warm-starting the potentials at each level —
// cold starts otherwise need on the order of range/eps sweeps just to
// traverse the duals. Second, safeguarded overrelaxation: near-degenerate
// instances contract at a rate only O(eps) away from 1, so once a level's
// observed rate is measured, the update is extrapolated with the classical
// factor 2/(1+sqrt(1-rate^2)), falling back toward plain steps whenever the
// residual grows.
//
// The returned plan is rounded onto the transport polytope (row/column
// scaling plus a rank-one correction), so its marginals hold to machine
// precision and <gamma, C> is a true feasible-plan cost — never below the
// unregularized optimum — even when the flag reports non-convergence.
inline SinkhornResult sinkhorn_wasserstein(const Table& c, double eps_reg,
                                           std::size_t max_iters = 50,
                                           double tol = 1e-6) {
  if (c.rows != c.cols || c.rows == 0) {
    fail_invalid("sinkhorn: cost matrix must be square and non-empty");
  }
  if (eps_reg <= 0.0) fail_invalid("sinkhorn: eps_reg must be positive");
  const std::size_t l = c.rows;
  const double log_marg = -std::log(static_cast<double>(l));  // log(1/l)
  const double inv_l = 1.0 / static_cast<double>(l);

  std::vector<double> f(l, 0.0), g(l, 0.0), buf(l), fnew(l), gnew(l);
  auto lse = [&](const std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
  };

  // Temperature ladder: eps_reg, 4*eps_reg, ... capped below max(C), hottest
  // first. An all-zero cost matrix degenerates to the single target level.
  const double max_c = *std::max_element(c.values.begin(), c.values.end());
  std::vector<double> ladder{eps_reg};
  for (double e = eps_reg * 4.0; e < max_c; e *= 4.0) ladder.push_back(e);
  std::reverse(ladder.begin(), ladder.end());

  SinkhornResult res;
  std::size_t sweeps = 0;
  double eps_used = ladder.front();

  for (std::size_t level = 0; level < ladder.size() && sweeps < max_iters;
       ++level) {
    const double eps = ladder[level];
    eps_used = eps;
    const bool last = level + 1 == ladder.size();
    // Intermediate levels only need to hand the next level a decent warm
    // start; the target tolerance applies to the final level alone.
    const double level_tol = last ? tol : std::max(tol, 1e-3 * inv_l);

    // Relaxation ladder: escalate when a window of sweeps fails to halve
    // the residual, step back (and cap) if it doubles instead. Past the
    // classical optimum the overrelaxed modes all contract with modulus
    // sqrt(omega-1) no matter how degenerate the instance, so the top rung
    // bounds the sweep count at roughly 14/(2-omega) per residual decade.
    static constexpr double kOmega[] = {1.0,  1.5,   1.9,  1.97,
                                        1.99, 1.995, 1.998};
    static constexpr std::size_t kRungs = sizeof(kOmega) / sizeof(kOmega[0]);
    std::size_t rung = 0;
    std::size_t rung_cap = kRungs - 1;
    const std::size_t kWindow = 64;
    double window_err = -1.0;  // residual when the current window opened
    std::size_t window_at = 0;

    while (sweeps < max_iters) {
      const double omega = kOmega[rung];
      for (std::size_t i = 0; i < l; ++i) {
        for (std::size_t j = 0; j < l; ++j) {
          buf[j] = (g[j] - c.at(i, j)) / eps;
        }
        fnew[i] = eps * (log_marg - lse(buf));
      }
      for (std::size_t i = 0; i < l; ++i) {
        f[i] += omega * (fnew[i] - f[i]);
      }
      for (std::size_t j = 0; j < l; ++j) {
        for (std::size_t i = 0; i < l; ++i) {
          buf[i] = (f[i] - c.at(i, j)) / eps;
        }
        gnew[j] = eps * (log_marg - lse(buf));
      }
      for (std::size_t j = 0; j < l; ++j) {
        g[j] += omega * (gnew[j] - g[j]);
      }
      ++sweeps;

      // Column marginals are exact after a plain g update; the row error
      // measures convergence. (With omega > 1 both carry residue, and the
      // row error still tracks the remaining progress.)
      double err = 0.0;
      for (std::size_t i = 0; i < l; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
          row += std::exp((f[i] + g[j] - c.at(i, j)) / eps);
        }
        err = std::max(err, std::fabs(row - inv_l));
      }
      if (err <= level_tol) {
        if (last) res.converged = true;
        break;
      }
      if (window_err < 0.0) {
        window_err = err;
        window_at = sweeps;
      } else if (sweeps - window_at >= kWindow) {
        if (err > 2.0 * window_err && rung > 0) {
          // This rung destabilizes the iteration on this instance; never
          // revisit it.
          rung_cap = rung - 1;
          rung = rung_cap;
        } else if (err > 0.5 * window_err && rung < rung_cap) {
          ++rung;  // too slow for the remaining decades
        }
        window_err = err;
        window_at = sweeps;
      }
    }
  }
  res.iterations = sweeps;

  // Plan at the coldest temperature actually reached, rounded onto the
  // polytope: cap row then column sums at 1/l, then spread the leftover
  // mass as a rank-one outer product of the deficits.
  res.plan.gamma = Table(l, l);
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      res.plan.gamma.at(i, j) =
          std::exp((f[i] + g[j] - c.at(i, j)) / eps_used);
    }
  }
  auto& gm = res.plan.gamma;
  for (std::size_t i = 0; i < l; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < l; ++j) row += gm.at(i, j);
    if (row > inv_l) {
      const double s = inv_l / row;
      for (std::size_t j = 0; j < l; ++j) gm.at(i, j) *= s;
    }
  }
  double deficit_total = 0.0;
  std::vector<double> col_deficit(l, 0.0);
  for (std::size_t j = 0; j < l; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < l; ++i) col += gm.at(i, j);
    if (col > inv_l) {
      const double s = inv_l / col;
      for (std::size_t i = 0; i < l; ++i) gm.at(i, j) *= s;
      col = inv_l;
    }
    col_deficit[j] = inv_l - col;
  }
  std::vector<double> row_deficit(l, 0.0);
  for (std::size_t i = 0; i < l; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < l; ++j) row += gm.at(i, j);
    row_deficit[i] = std::max(0.0, inv_l - row);
    deficit_total += row_deficit[i];
  }
  if (deficit_total > 0.0) {
    for (std::size_t i = 0; i < l; ++i) {
      if (row_deficit[i] == 0.0) continue;
      for (std::size_t j = 0; j < l; ++j) {
        gm.at(i, j) += row_deficit[i] * col_deficit[j] / deficit_total;
      }
    }
  }

  double dist = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      dist += gm.at(i, j) * c.at(i, j);
    }
  }
  res.distance = dist;

  double merr = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
      row += gm.at(i, j);
      col += gm.at(j, i);
    }
    merr = std::max({merr, std::fabs(row - inv_l), std::fabs(col - inv_l)});
  }
  res.plan.marginal_error = merr;
  return res;
}

// Envelope gradients of <gamma, C(A,B)> with the plan frozen:
// dD/dA_i = sum_j gamma_ij (A_i - B_j) / |A_i - B_j|, and symmetrically for
// B. Coincident points contribute zero (the distance is non-differentiable
// there; zero is the stable subgradient choice).
struct WassersteinGrads {
  Table d_a;
  Table d_b;
};

inline WassersteinGrads frozen_plan_grads(const TransportPlan& plan,
                                          const Table& a, const Table& b) {
  if (plan.gamma.rows != a.rows || plan.gamma.cols != b.rows) {
    fail_invalid("frozen_plan_grads: plan does not match point sets");
  }
  if (a.cols != b.cols) fail_invalid("frozen_plan_grads: dimension mismatch");
  WassersteinGrads out;
  out.d_a = Table(a.rows, a.cols);
  out.d_b = Table(b.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double dist = std::sqrt(squared_distance(a.row(i), b.row(j)));
      if (dist < 1e-12) continue;
      const double scale = plan.gamma.at(i, j) / dist;
      for (std::size_t k = 0; k < a.cols; ++k) {
        const double diff = a.at(i, k) - b.at(j, k);
        out.d_a.at(i, k) += scale * diff;
        out.d_b.at(j, k) -= scale * diff;
      }
    }
  }
  return out;
}

// Exact Wasserstein-1 under uniform marginals: for l <= 8 the optimum of
// Eq-(12)-style transport is an assignment, found by brute-force
// permutation enumeration. Validation oracle for the Sinkhorn path.
inline double exact_wasserstein_oracle(const Table& c) {
  if (c.rows != c.cols || c.rows == 0) {
    fail_invalid("exact oracle: cost matrix must be square and non-empty");
  }
  if (c.rows > 8) fail_invalid("exact oracle: l must be <= 8");
  const std::size_t l = c.rows;
  std::vector<std::size_t> perm(l);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < l; ++i) s += c.at(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(l);
}

}  // namespace denc
