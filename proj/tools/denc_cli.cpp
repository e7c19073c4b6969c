/*
 * Copyright 2026 The DENC Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */

// denc: single-binary driver for the deconfounded recommendation pipeline.
//
// Subcommands: synth, embed, train, eval, analyze, ablate. Every subcommand
// takes --config (flat key=value file), --out (artifact directory), an
// optional --seed override, and --log. Each run ends by writing
// run_manifest.json; re-running with the same manifest reproduces every
// artifact bit-identically.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "denc/denc.hpp"

namespace fs = std::filesystem;

namespace {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel g_log_level = LogLevel::info;

void log(LogLevel level, const std::string& msg) {
  if (level > g_log_level) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

LogLevel parse_log_level(const std::string& s) {
  if (s == "error") return LogLevel::error;
  if (s == "warn") return LogLevel::warn;
  if (s == "info") return LogLevel::info;
  if (s == "debug") return LogLevel::debug;
  denc::fail_invalid("unknown log level: " + s);
}

// One registry shared by every subcommand; keys irrelevant to the current
// subcommand are permitted (one config file can drive a whole experiment)
// but unknown keys are always an error.
const std::set<std::string>& key_registry() {
  static const std::set<std::string> keys = {
      // inputs and outputs
      "ratings_file", "trust_file", "truth_file", "checkpoint_dir",
      // splitting
      "test_fraction", "val_fraction",
      // root seed (--seed overrides)
      "seed",
      // synthetic data generation
      "synth_users", "synth_items", "synth_membership_fraction",
      "synth_edge_prob", "synth_beta", "synth_noise_sd", "synth_base_rank",
      "synth_delta",
      // graph embedding
      "walks_per_node", "walk_length", "window", "return_param",
      "inout_param", "negatives_per_positive", "embed_dim", "embed_epochs",
      "embed_learning_rate", "embed_csv",
      // exposure model
      "omega", "exposure_epochs", "exposure_learning_rate",
      // trainer
      "lambda_a", "lambda_z", "lambda_d", "l2_reg", "k_d", "k_a",
      "learning_rate", "batch_size", "max_epochs", "patience",
      "balance_batch_l", "clip_floor", "ablation", "joint_exposure_update",
      "sinkhorn_eps_scale", "sinkhorn_max_iters", "sinkhorn_tol",
      // evaluation
      "relevance_threshold", "k_list", "clamp_predictions", "clamp_lo",
      "clamp_hi",
      // bias analysis
      "cohort_n", "pairs_per_user", "cohort_fallback", "mask_fractions",
      "sweep_seeds", "run_masking_sweep",
  };
  return keys;
}

struct CommandArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  std::string log_level = "info";
};

struct RunContext {
  denc::RunConfig cfg;
  fs::path out;
  std::uint64_t seed = 0;
  std::chrono::steady_clock::time_point started;
};

RunContext make_context(const CommandArgs& args) {
  g_log_level = parse_log_level(args.log_level);
  RunContext ctx;
  ctx.started = std::chrono::steady_clock::now();
  ctx.cfg = denc::RunConfig::parse_file(args.config_path);
  ctx.cfg.validate_keys(key_registry());
  ctx.seed = args.seed_override ? *args.seed_override
                                : ctx.cfg.get_u64("seed", 0);
  ctx.out = args.out_dir;
  fs::create_directories(ctx.out);
  return ctx;
}

void write_manifest(const RunContext& ctx, const std::string& subcommand) {
  denc::json config_echo = denc::json::object();
  for (const auto& [k, v] : ctx.cfg.entries()) config_echo[k] = v;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    ctx.started)
          .count();
  denc::json manifest{{"subcommand", subcommand},
                      {"config", config_echo},
                      {"seed", ctx.seed},
                      {"version", denc::kVersion},
                      {"wall_time_s", wall}};
  denc::write_json(ctx.out / "run_manifest.json", manifest);
}

denc::SplitSpec split_spec(const RunContext& ctx) {
  denc::SplitSpec spec;
  spec.test_fraction = ctx.cfg.get_double("test_fraction", 0.2);
  spec.val_fraction = ctx.cfg.get_double("val_fraction", 0.2);
  spec.seed = ctx.seed;
  return spec;
}

denc::WalkConfig walk_config(const denc::RunConfig& cfg) {
  denc::WalkConfig w;
  w.walks_per_node =
      static_cast<std::size_t>(cfg.get_u64("walks_per_node", w.walks_per_node));
  w.walk_length =
      static_cast<std::size_t>(cfg.get_u64("walk_length", w.walk_length));
  w.window = static_cast<std::size_t>(cfg.get_u64("window", w.window));
  w.return_param = cfg.get_double("return_param", w.return_param);
  w.inout_param = cfg.get_double("inout_param", w.inout_param);
  w.negatives_per_positive = static_cast<std::size_t>(
      cfg.get_u64("negatives_per_positive", w.negatives_per_positive));
  w.embed_dim = static_cast<std::size_t>(cfg.get_u64("embed_dim", w.embed_dim));
  w.epochs = static_cast<std::size_t>(cfg.get_u64("embed_epochs", w.epochs));
  w.learning_rate = cfg.get_double("embed_learning_rate", w.learning_rate);
  return w;
}

denc::TrainConfig train_config(const RunContext& ctx) {
  const denc::RunConfig& cfg = ctx.cfg;
  denc::TrainConfig t;
  t.lambda_a = cfg.get_double("lambda_a", t.lambda_a);
  t.lambda_z = cfg.get_double("lambda_z", t.lambda_z);
  t.lambda_d = cfg.get_double("lambda_d", t.lambda_d);
  t.l2_reg = cfg.get_double("l2_reg", t.l2_reg);
  t.k_d = static_cast<std::size_t>(cfg.get_u64("k_d", t.k_d));
  t.k_a = static_cast<std::size_t>(cfg.get_u64("k_a", t.k_a));
  t.learning_rate = cfg.get_double("learning_rate", t.learning_rate);
  t.batch_size = static_cast<std::size_t>(cfg.get_u64("batch_size", t.batch_size));
  t.max_epochs = static_cast<std::size_t>(cfg.get_u64("max_epochs", t.max_epochs));
  t.patience = static_cast<std::size_t>(cfg.get_u64("patience", t.patience));
  t.balance_batch_l = static_cast<std::size_t>(
      cfg.get_u64("balance_batch_l", t.balance_batch_l));
  t.clip_floor = cfg.get_double("clip_floor", t.clip_floor);
  t.omega = cfg.get_double("omega", t.omega);
  t.seed = ctx.seed;
  t.ablation = denc::ablation_from_name(cfg.get_string("ablation", "full"));
  t.joint_exposure_update =
      cfg.get_bool("joint_exposure_update", t.joint_exposure_update);
  t.walk = walk_config(cfg);
  t.exposure_epochs = static_cast<std::size_t>(
      cfg.get_u64("exposure_epochs", t.exposure_epochs));
  t.exposure_learning_rate =
      cfg.get_double("exposure_learning_rate", t.exposure_learning_rate);
  t.sinkhorn_eps_scale =
      cfg.get_double("sinkhorn_eps_scale", t.sinkhorn_eps_scale);
  t.sinkhorn_max_iters = static_cast<std::size_t>(
      cfg.get_u64("sinkhorn_max_iters", t.sinkhorn_max_iters));
  t.sinkhorn_tol = cfg.get_double("sinkhorn_tol", t.sinkhorn_tol);
  t.metrics.relevance_threshold =
      cfg.get_double("relevance_threshold", t.metrics.relevance_threshold);
  t.metrics.k_list = cfg.get_size_list("k_list", t.metrics.k_list);
  t.metrics.clamp = cfg.get_bool("clamp_predictions", t.metrics.clamp);
  t.metrics.clamp_lo = cfg.get_double("clamp_lo", t.metrics.clamp_lo);
  t.metrics.clamp_hi = cfg.get_double("clamp_hi", t.metrics.clamp_hi);
  return t;
}

struct LoadedData {
  denc::Dataset dataset;
  denc::SocialGraph graph;

  LoadedData() : graph(0) {}
};

// Parses the ratings file and, when configured, the trust file. A missing
// trust_file key yields an edgeless graph (every user isolated).
LoadedData load_data(const RunContext& ctx, bool trust_required) {
  LoadedData out;
  const std::string ratings_path = ctx.cfg.require_string("ratings_file");
  std::ifstream rin(ratings_path);
  if (!rin) denc::fail_invalid("cannot open ratings file: " + ratings_path);
  auto parsed = denc::parse_ratings(rin, ratings_path);
  if (parsed.duplicate_count > 0) {
    log(LogLevel::warn, "ratings: " + std::to_string(parsed.duplicate_count) +
                            " duplicate pairs (last value kept)");
  }
  out.dataset = std::move(parsed.dataset);
  log(LogLevel::info,
      "loaded " + std::to_string(out.dataset.triples.size()) + " ratings, " +
          std::to_string(out.dataset.user_count) + " users, " +
          std::to_string(out.dataset.item_count) + " items");

  const std::string trust_path = ctx.cfg.get_string("trust_file");
  if (trust_path.empty()) {
    if (trust_required) denc::fail_invalid("missing required config key: trust_file");
    log(LogLevel::warn, "no trust_file configured; using an edgeless graph");
    out.graph = denc::SocialGraph(out.dataset.user_count);
    return out;
  }
  std::ifstream tin(trust_path);
  if (!tin) denc::fail_invalid("cannot open trust file: " + trust_path);
  auto edges = denc::parse_social_edges(tin, parsed.user_index,
                                        out.dataset.user_count, trust_path);
  if (edges.self_loop_count || edges.unknown_user_count ||
      edges.duplicate_count) {
    log(LogLevel::warn,
        "trust: skipped " + std::to_string(edges.self_loop_count) +
            " self loops, " + std::to_string(edges.unknown_user_count) +
            " edges with unknown users, " +
            std::to_string(edges.duplicate_count) + " duplicates");
  }
  out.graph = std::move(edges.graph);
  log(LogLevel::info,
      "loaded " + std::to_string(out.graph.edges.size()) + " trust edges");
  return out;
}

// Full-truth TSV (user, item, rating) mapped onto the model's index space.
// Labels unknown to the model are skipped and tallied; every model cell must
// end up covered.
denc::Table load_truth_table(const std::string& path,
                             const std::vector<std::string>& user_labels,
                             const std::vector<std::string>& item_labels) {
  std::unordered_map<std::string, denc::user_id> umap;
  std::unordered_map<std::string, denc::item_id> imap;
  for (std::size_t u = 0; u < user_labels.size(); ++u) {
    umap[user_labels[u]] = static_cast<denc::user_id>(u);
  }
  for (std::size_t i = 0; i < item_labels.size(); ++i) {
    imap[item_labels[i]] = static_cast<denc::item_id>(i);
  }
  std::ifstream in(path);
  if (!in) denc::fail_invalid("cannot open truth file: " + path);
  auto parsed = denc::parse_ratings(in, path);
  denc::Table truth(user_labels.size(), item_labels.size());
  std::vector<std::uint8_t> seen(truth.values.size(), 0);
  std::size_t unknown = 0, filled = 0;
  const denc::Dataset& tds = parsed.dataset;
  for (const auto& t : tds.triples) {
    const auto uit = umap.find(tds.user_label(t.user));
    const auto iit = imap.find(tds.item_label(t.item));
    if (uit == umap.end() || iit == imap.end()) {
      ++unknown;
      continue;
    }
    const std::size_t off = uit->second * truth.cols + iit->second;
    if (!seen[off]) {
      seen[off] = 1;
      ++filled;
    }
    truth.values[off] = t.rating;
  }
  if (unknown > 0) {
    log(LogLevel::warn, "truth: skipped " + std::to_string(unknown) +
                            " cells with labels unknown to the model");
  }
  if (filled != truth.values.size()) {
    denc::fail_invalid("truth table incomplete: filled " +
                       std::to_string(filled) + " of " +
                       std::to_string(truth.values.size()) + " cells");
  }
  return truth;
}

void write_table_csv(const fs::path& path, const denc::Table& t,
                     const std::vector<std::string>& row_labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) denc::fail_runtime("cannot open for writing: " + path.string());
  for (std::size_t r = 0; r < t.rows; ++r) {
    out << (row_labels.empty() ? std::to_string(r) : row_labels[r]);
    for (std::size_t c = 0; c < t.cols; ++c) {
      out << ',' << denc::format_double(t.at(r, c));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// subcommands

int run_synth(const CommandArgs& args) {
  RunContext ctx = make_context(args);
  denc::SynthConfig scfg;
  scfg.users = static_cast<std::size_t>(ctx.cfg.get_u64("synth_users", scfg.users));
  scfg.items = static_cast<std::size_t>(ctx.cfg.get_u64("synth_items", scfg.items));
  scfg.membership_fraction =
      ctx.cfg.get_double("synth_membership_fraction", scfg.membership_fraction);
  scfg.edge_prob = ctx.cfg.get_double("synth_edge_prob", scfg.edge_prob);
  scfg.beta = ctx.cfg.get_double("synth_beta", scfg.beta);
  scfg.noise_sd = ctx.cfg.get_double("synth_noise_sd", scfg.noise_sd);
  scfg.base_rank =
      static_cast<std::size_t>(ctx.cfg.get_u64("synth_base_rank", scfg.base_rank));
  scfg.seed = ctx.seed;
  denc::ConfounderLevel level;
  level.delta = ctx.cfg.get_double("synth_delta", level.delta);

  log(LogLevel::info, "synthesizing " + std::to_string(scfg.users) + "x" +
                          std::to_string(scfg.items) + " dataset");
  const auto semi = denc::synthesize(scfg, level);
  log(LogLevel::info,
      "observed ratings: " + std::to_string(semi.dataset.triples.size()) +
          ", trust edges: " + std::to_string(semi.graph.edges.size()));

  {
    std::ofstream out(ctx.out / "ratings.tsv", std::ios::binary);
    denc::write_ratings(out, semi.dataset);
  }
  {
    std::ofstream out(ctx.out / "trust.tsv", std::ios::binary);
    denc::write_social_edges(out, semi.graph, semi.dataset);
  }
  {
    // complete truth table in the same triple format as ratings.tsv
    std::ofstream out(ctx.out / "full_truth.tsv", std::ios::binary);
    for (std::size_t u = 0; u < semi.full_truth.rows; ++u) {
      for (std::size_t i = 0; i < semi.full_truth.cols; ++i) {
        out << semi.dataset.user_label(static_cast<denc::user_id>(u)) << '\t'
            << semi.dataset.item_label(static_cast<denc::item_id>(i)) << '\t'
            << denc::format_double(semi.full_truth.at(u, i)) << '\n';
      }
    }
  }
  {
    // dense 0/1 grid, one row per user
    std::ofstream out(ctx.out / "exposure.tsv", std::ios::binary);
    for (std::size_t u = 0; u < semi.exposure.rows; ++u) {
      for (std::size_t i = 0; i < semi.exposure.cols; ++i) {
        if (i > 0) out << '\t';
        out << (semi.exposure.at(u, i) != 0.0 ? '1' : '0');
      }
      out << '\n';
    }
  }
  denc::json echo{{"users", scfg.users},
                  {"items", scfg.items},
                  {"membership_fraction", scfg.membership_fraction},
                  {"edge_prob", scfg.edge_prob},
                  {"beta", scfg.beta},
                  {"noise_sd", scfg.noise_sd},
                  {"base_rank", scfg.base_rank},
                  {"delta", level.delta},
                  {"seed", scfg.seed},
                  {"observed_ratings", semi.dataset.triples.size()},
                  {"trust_edges", semi.graph.edges.size()}};
  denc::write_json(ctx.out / "synth_config.json", echo);
  write_manifest(ctx, "synth");
  return 0;
}

int run_embed(const CommandArgs& args) {
  RunContext ctx = make_context(args);
  LoadedData data = load_data(ctx, /*trust_required=*/true);
  denc::WalkConfig wcfg = walk_config(ctx.cfg);
  wcfg.seed = denc::derive_stream(ctx.seed, "embed");
  log(LogLevel::info, "embedding " + std::to_string(data.graph.node_count) +
                          " nodes at dim " + std::to_string(wcfg.embed_dim));
  const auto emb = denc::node2vec_embed(data.graph, wcfg);
  denc::write_table(ctx.out / "embeddings.bin", emb.z);
  if (ctx.cfg.get_bool("embed_csv", false)) {
    write_table_csv(ctx.out / "embeddings.csv", emb.z,
                    data.dataset.user_labels);
  }
  std::size_t fallback_rows = 0;
  for (auto f : emb.fallback) fallback_rows += f;
  log(LogLevel::info,
      "rows without walk coverage: " + std::to_string(fallback_rows));
  write_manifest(ctx, "embed");
  return 0;
}

// Shared by train and ablate: split, train, persist, evaluate.
denc::TrainedModel train_and_report(const RunContext& ctx,
                                    const LoadedData& data,
                                    const denc::TrainConfig& tcfg,
                                    const fs::path& out_dir) {
  const auto parts = denc::split_dataset(data.dataset, split_spec(ctx));
  log(LogLevel::info,
      "split: " + std::to_string(parts.train.triples.size()) + " train, " +
          std::to_string(parts.val.triples.size()) + " val, " +
          std::to_string(parts.test.triples.size()) + " test");
  const auto model = denc::train(tcfg, parts.train, parts.val, data.graph);
  log(LogLevel::info,
      "trained " + std::to_string(model.history.size()) + " epochs, best " +
          std::to_string(model.best_epoch) + " (val RMSE " +
          std::to_string(model.history[model.best_epoch - 1].val_rmse) + ")");
  if (model.sinkhorn_nonconverged > 0) {
    log(LogLevel::warn,
        std::to_string(model.sinkhorn_nonconverged) +
            " balance steps hit the transport iteration cap");
  }

  fs::create_directories(out_dir);
  denc::save_checkpoint(model, out_dir / "checkpoint");
  denc::write_history_csv(out_dir / "history.csv", model.history);
  const auto rep = denc::evaluate_checkpoint(model, parts.test);
  denc::write_json(out_dir / "metrics.json", denc::metrics_to_json(rep));
  log(LogLevel::info, "test MAE " + std::to_string(rep.mae) + ", RMSE " +
                          std::to_string(rep.rmse));
  return model;
}

int run_train(const CommandArgs& args) {
  RunContext ctx = make_context(args);
  LoadedData data = load_data(ctx, /*trust_required=*/false);
  const denc::TrainConfig tcfg = train_config(ctx);
  const auto model = train_and_report(ctx, data, tcfg, ctx.out);
  const std::string truth_path = ctx.cfg.get_string("truth_file");
  if (!truth_path.empty()) {
    const auto truth =
        load_truth_table(truth_path, model.user_labels, model.item_labels);
    const auto te = denc::evaluate_on_truth(model, truth, /*exclude_seen=*/true,
                                            tcfg.metrics.clamp);
    denc::write_json(ctx.out / "truth_metrics.json",
                     denc::json{{"mae", te.mae},
                                {"rmse", te.rmse},
                                {"cells", te.cells}});
    log(LogLevel::info, "held-out truth MAE " + std::to_string(te.mae) +
                            ", RMSE " + std::to_string(te.rmse));
  }
  write_manifest(ctx, "train");
  return 0;
}

int run_eval(const CommandArgs& args) {
  RunContext ctx = make_context(args);
  const std::string ckpt = ctx.cfg.require_string("checkpoint_dir");
  auto model = denc::load_checkpoint(ckpt);
  LoadedData data = load_data(ctx, /*trust_required=*/false);
  if (data.dataset.user_count != model.user_count ||
      data.dataset.item_count != model.item_count) {
    denc::fail_invalid("eval: dataset shape does not match checkpoint");
  }
  // Reconstruct the training split so candidate exclusions match training;
  // requires the same ratings file, fractions, and seed as the original run.
  const auto parts = denc::split_dataset(data.dataset, split_spec(ctx));
  model.train_observed = parts.train.observed;
  model.val_observed = parts.val.observed;
  const auto rep = denc::evaluate_checkpoint(model, parts.test);
  denc::write_json(ctx.out / "metrics.json", denc::metrics_to_json(rep));
  log(LogLevel::info, "test MAE " + std::to_string(rep.mae) + ", RMSE " +
                          std::to_string(rep.rmse));
  const std::string truth_path = ctx.cfg.get_string("truth_file");
  if (!truth_path.empty()) {
    const auto truth =
        load_truth_table(truth_path, model.user_labels, model.item_labels);
    const auto te = denc::evaluate_on_truth(model, truth, /*exclude_seen=*/true,
                                            model.config.metrics.clamp);
    denc::write_json(ctx.out / "truth_metrics.json",
                     denc::json{{"mae", te.mae},
                                {"rmse", te.rmse},
                                {"cells", te.cells}});
  }
  write_manifest(ctx, "eval");
  return 0;
}

int run_analyze(const CommandArgs& args) {
  RunContext ctx = make_context(args);
  LoadedData data = load_data(ctx, /*trust_required=*/true);

  denc::write_json(ctx.out / "stats.json",
                   denc::stats_to_json(denc::dataset_stats(data.dataset,
                                                           data.graph)));

  const auto cohort_n =
      static_cast<std::size_t>(ctx.cfg.get_u64("cohort_n", 70));
  const auto pairs_per_user =
      static_cast<std::size_t>(ctx.cfg.get_u64("pairs_per_user", 4));
  const bool fallback = ctx.cfg.get_bool("cohort_fallback", false);

  const auto cohorts =
      denc::sample_cohorts(data.dataset, data.graph, cohort_n, ctx.seed, fallback);
  if (cohorts.fallback_used) {
    log(LogLevel::warn,
        "no degree-0 users available; out-of-network cohort uses the " +
            std::to_string(cohort_n) + " lowest-degree users");
  }
  const auto in_dist =
      denc::interaction_distribution(cohorts.in_network, data.dataset);
  const auto out_dist =
      denc::interaction_distribution(cohorts.out_network, data.dataset);
  denc::write_distribution_csv(ctx.out / "interaction_dist_in.csv", in_dist);
  denc::write_distribution_csv(ctx.out / "interaction_dist_out.csv", out_dist);

  const auto common = denc::common_item_distribution(
      data.dataset, data.graph, cohorts, pairs_per_user, ctx.seed);
  if (common.in_shortfall > 0) {
    log(LogLevel::warn, "common items: " + std::to_string(common.in_shortfall) +
                            " missing neighbor pairs");
  }
  denc::write_distribution_csv(ctx.out / "common_items_in.csv",
                               common.in_network);
  denc::write_distribution_csv(ctx.out / "common_items_out.csv",
                               common.out_network);

  auto labels_of = [&](const std::vector<denc::user_id>& us) {
    denc::json arr = denc::json::array();
    for (auto u : us) arr.push_back(data.dataset.user_label(u));
    return arr;
  };
  denc::write_json(
      ctx.out / "cohorts.json",
      denc::json{{"n", cohort_n},
                 {"pairs_per_user", pairs_per_user},
                 {"fallback_used", cohorts.fallback_used},
                 {"in_network", labels_of(cohorts.in_network)},
                 {"out_network", labels_of(cohorts.out_network)},
                 {"in_mean_interactions", in_dist.mean},
                 {"out_mean_interactions", out_dist.mean},
                 {"in_mean_common_items", common.in_network.mean},
                 {"out_mean_common_items", common.out_network.mean},
                 {"in_pair_shortfall", common.in_shortfall},
                 {"out_pair_shortfall", common.out_shortfall}});

  if (ctx.cfg.get_bool("run_masking_sweep", false)) {
    const auto fractions =
        ctx.cfg.get_double_list("mask_fractions", {0.0, 0.2, 0.5, 0.8});
    const auto seeds =
        ctx.cfg.get_u64_list("sweep_seeds", {1, 2, 3, 4, 5});
    log(LogLevel::info,
        "masking sweep: " + std::to_string(fractions.size()) + " fractions x " +
            std::to_string(seeds.size()) + " seeds");
    const auto rows = denc::masking_sweep(train_config(ctx), data.dataset,
                                          data.graph, fractions, seeds,
                                          split_spec(ctx));
    denc::write_sweep_csv(ctx.out / "masking_sweep.csv", rows);
  }
  write_manifest(ctx, "analyze");
  return 0;
}

int run_ablate(const CommandArgs& args) {
  RunContext ctx = make_context(args);
  LoadedData data = load_data(ctx, /*trust_required=*/false);
  denc::TrainConfig tcfg = train_config(ctx);

  const std::string truth_path = ctx.cfg.get_string("truth_file");
  std::optional<denc::Table> truth;

  const denc::Ablation runs[] = {denc::Ablation::full,
                                 denc::Ablation::no_exposure,
                                 denc::Ablation::no_confounder};
  std::ofstream csv(ctx.out / "ablation_comparison.csv", std::ios::binary);
  if (!csv) denc::fail_runtime("cannot open ablation_comparison.csv");
  csv << "ablation,mae,rmse";
  if (!truth_path.empty()) csv << ",truth_mae,truth_rmse";
  csv << '\n';

  for (const auto ablation : runs) {
    tcfg.ablation = ablation;
    const std::string name = denc::ablation_name(ablation);
    log(LogLevel::info, "ablation run: " + name);
    const auto model =
        train_and_report(ctx, data, tcfg, ctx.out / name);
    const auto rep_path = ctx.out / name / "metrics.json";
    const auto rep = denc::read_json(rep_path);
    csv << name << ',' << denc::format_double(rep.at("mae").get<double>())
        << ',' << denc::format_double(rep.at("rmse").get<double>());
    if (!truth_path.empty()) {
      if (!truth) {
        truth = load_truth_table(truth_path, model.user_labels,
                                 model.item_labels);
      }
      const auto te = denc::evaluate_on_truth(model, *truth,
                                              /*exclude_seen=*/true,
                                              tcfg.metrics.clamp);
      csv << ',' << denc::format_double(te.mae) << ','
          << denc::format_double(te.rmse);
    }
    csv << '\n';
  }
  csv.close();
  write_manifest(ctx, "ablate");
  return 0;
}

void add_common_flags(CLI::App* cmd, CommandArgs& args) {
  cmd->add_option("--config", args.config_path, "flat key=value config file")
      ->required();
  cmd->add_option("--out", args.out_dir, "output directory for artifacts")
      ->required();
  cmd->add_option("--seed", args.seed_override,
                  "root seed override (defaults to the config's seed key)");
  cmd->add_option("--log", args.log_level,
                  "log level: error, warn, info, debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"denc: deconfounded recommendation pipeline"};
  app.require_subcommand(1);

  CommandArgs args;
  int (*handler)(const CommandArgs&) = nullptr;

  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const CommandArgs&);
  };
  const Entry entries[] = {
      {"synth", "generate a semi-synthetic confounded dataset", run_synth},
      {"embed", "train social-graph confounder embeddings", run_embed},
      {"train", "train a rating model and write a checkpoint", run_train},
      {"eval", "evaluate an existing checkpoint", run_eval},
      {"analyze", "dataset statistics, cohort bias study, masking sweep",
       run_analyze},
      {"ablate", "train full / no_exposure / no_confounder and compare",
       run_ablate},
  };
  for (const auto& e : entries) {
    CLI::App* cmd = app.add_subcommand(e.name, e.help);
    add_common_flags(cmd, args);
    cmd->callback([&handler, fn = e.fn] { handler = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or error + usage hint
    return code == 0 ? 0 : 1;
  }

  try {
    return handler(args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
