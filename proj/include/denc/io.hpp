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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "denc/analysis.hpp"
#include "denc/common.hpp"
#include "denc/exposure.hpp"
#include "denc/metrics.hpp"
#include "denc/table.hpp"
#include "denc/trainer.hpp"

namespace denc {

using json = nlohmann::json;

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_runtime("cannot open for writing: " + path.string());
  out << text;
  if (!out) fail_runtime("short write: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_runtime("cannot open for reading: " + path.string());
  std::string s((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  return s;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline json read_json(const std::filesystem::path& path) {
  return json::parse(read_text(path));
}

inline json exposure_to_json(const ExposureModel& model) {
  return json{{"w0", model.params.w0},
              {"b0", model.params.b0},
              {"omega", model.omega},
              {"rating_prior", model.rating_prior},
              {"k_a", model.params.w0.size()}};
}

inline ExposureModel exposure_from_json(const json& j) {
  ExposureModel m;
  m.params.w0 = j.at("w0").get<std::vector<double>>();
  m.params.b0 = j.at("b0").get<double>();
  m.omega = j.at("omega").get<double>();
  m.rating_prior = j.at("rating_prior").get<double>();
  if (j.at("k_a").get<std::size_t>() != m.params.w0.size()) {
    fail_runtime("exposure model: k_a does not match w0 length");
  }
  return m;
}

inline json metrics_to_json(const MetricsReport& rep) {
  json pk = json::object(), rk = json::object();
  for (const auto& [k, v] : rep.precision_at_k) pk[std::to_string(k)] = v;
  for (const auto& [k, v] : rep.recall_at_k) rk[std::to_string(k)] = v;
  return json{{"mae", rep.mae},
              {"rmse", rep.rmse},
              {"k", rep.k_list},
              {"precision_at_k", pk},
              {"recall_at_k", rk},
              {"relevance_threshold", rep.relevance_threshold},
              {"rated_pairs", rep.rated_pairs},
              {"ranked_users", rep.ranked_users}};
}

inline json stats_to_json(const StatsReport& s) {
  return json{{"user_count", s.user_count},
              {"item_count", s.item_count},
              {"rating_count", s.rating_count},
              {"relation_count", s.relation_count},
              {"density_r", s.density_r},
              {"density_sr", s.density_sr}};
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_history_csv(const std::filesystem::path& path,
                              const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_runtime("cannot open for writing: " + path.string());
  out << "epoch,L_y,L_a,L_d,L,val_MAE,val_RMSE\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.l_y) << ',' << format_double(r.l_a)
        << ',' << format_double(r.l_d) << ',' << format_double(r.l_total) << ','
        << format_double(r.val_mae) << ',' << format_double(r.val_rmse) << '\n';
  }
}

inline void write_sweep_csv(const std::filesystem::path& path,
                            const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_runtime("cannot open for writing: " + path.string());
  out << "fraction,seed,mae,rmse,p_at_20,r_at_20\n";
  for (const auto& r : rows) {
    out << format_double(r.fraction) << ',' << r.seed << ','
        << format_double(r.mae) << ',' << format_double(r.rmse) << ','
        << format_double(r.p_at_20) << ',' << format_double(r.r_at_20) << '\n';
  }
}

// Distribution CSV rows are the unit-width integer bins with the KDE curve
// evaluated at the bin value; the full 256-point curve lives in the summary.
inline void write_distribution_csv(const std::filesystem::path& path,
                                   const DistributionSummary& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_runtime("cannot open for writing: " + path.string());
  out << "x,count,kde_density\n";
  for (std::size_t x = 0; x < d.hist_counts.size(); ++x) {
    out << x << ',' << d.hist_counts[x] << ','
        << format_double(kde_density_at(static_cast<double>(x), d.raw,
                                        d.bandwidth))
        << '\n';
  }
}

inline void write_labels(const std::filesystem::path& path,
                         const std::vector<std::string>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_runtime("cannot open for writing: " + path.string());
  for (const auto& s : labels) out << s << '\n';
}

inline std::vector<std::string> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_runtime("cannot open for reading: " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

inline json train_config_to_json(const TrainConfig& cfg) {
  return json{{"lambda_a", cfg.lambda_a},
              {"lambda_z", cfg.lambda_z},
              {"lambda_d", cfg.lambda_d},
              {"l2_reg", cfg.l2_reg},
              {"k_d", cfg.k_d},
              {"k_a", cfg.k_a},
              {"learning_rate", cfg.learning_rate},
              {"batch_size", cfg.batch_size},
              {"max_epochs", cfg.max_epochs},
              {"patience", cfg.patience},
              {"balance_batch_l", cfg.balance_batch_l},
              {"clip_floor", cfg.clip_floor},
              {"omega", cfg.omega},
              {"seed", cfg.seed},
              {"ablation", ablation_name(cfg.ablation)},
              {"joint_exposure_update", cfg.joint_exposure_update},
              {"walks_per_node", cfg.walk.walks_per_node},
              {"walk_length", cfg.walk.walk_length},
              {"window", cfg.walk.window},
              {"return_param", cfg.walk.return_param},
              {"inout_param", cfg.walk.inout_param},
              {"negatives_per_positive", cfg.walk.negatives_per_positive},
              {"embed_epochs", cfg.walk.epochs},
              {"embed_learning_rate", cfg.walk.learning_rate},
              {"exposure_epochs", cfg.exposure_epochs},
              {"exposure_learning_rate", cfg.exposure_learning_rate},
              {"sinkhorn_eps_scale", cfg.sinkhorn_eps_scale},
              {"sinkhorn_max_iters", cfg.sinkhorn_max_iters},
              {"sinkhorn_tol", cfg.sinkhorn_tol},
              {"relevance_threshold", cfg.metrics.relevance_threshold},
              {"k_list", cfg.metrics.k_list},
              {"clamp_predictions", cfg.metrics.clamp},
              {"clamp_lo", cfg.metrics.clamp_lo},
              {"clamp_hi", cfg.metrics.clamp_hi}};
}

// Checkpoint directory layout: binary tables for the three parameter groups
// and the embeddings, the exposure model as JSON, and a metadata file
// sufficient to re-evaluate the model elsewhere.
inline void save_checkpoint(const TrainedModel& model,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_table(dir / "user_factors.bin", model.params.fs.user_factors);
  write_table(dir / "item_factors.bin", model.params.fs.item_factors);
  write_table(dir / "confounder_coef.bin", model.params.confounder_coef);
  write_table(dir / "embeddings.bin", model.embeddings.z);
  write_json(dir / "exposure.json", exposure_to_json(model.exposure));
  json meta{{"user_count", model.user_count},
            {"item_count", model.item_count},
            {"best_epoch", model.best_epoch},
            {"epochs_run", model.history.size()},
            {"l_z", model.l_z},
            {"propensities_are_uniform", model.propensities_are_uniform},
            {"sinkhorn_nonconverged", model.sinkhorn_nonconverged},
            {"config", train_config_to_json(model.config)},
            {"version", kVersion}};
  write_json(dir / "meta.json", meta);
  write_labels(dir / "user_ids.txt", model.user_labels);
  write_labels(dir / "item_ids.txt", model.item_labels);
}

inline TrainConfig train_config_from_json(const json& j);

inline TrainedModel load_checkpoint(const std::filesystem::path& dir) {
  TrainedModel model;
  model.params.fs.user_factors = read_table(dir / "user_factors.bin");
  model.params.fs.item_factors = read_table(dir / "item_factors.bin");
  model.params.confounder_coef = read_table(dir / "confounder_coef.bin");
  model.embeddings.z = read_table(dir / "embeddings.bin");
  model.embeddings.fallback.assign(model.embeddings.z.rows, 0);
  for (std::size_t u = 0; u < model.embeddings.z.rows; ++u) {
    bool zero = true;
    for (double v : model.embeddings.z.row(u)) {
      if (v != 0.0) {
        zero = false;
        break;
      }
    }
    model.embeddings.fallback[u] = zero ? 1 : 0;
  }
  model.exposure = exposure_from_json(read_json(dir / "exposure.json"));
  const json meta = read_json(dir / "meta.json");
  model.user_count = meta.at("user_count").get<std::size_t>();
  model.item_count = meta.at("item_count").get<std::size_t>();
  model.best_epoch = meta.at("best_epoch").get<std::size_t>();
  model.l_z = meta.at("l_z").get<double>();
  model.propensities_are_uniform =
      meta.at("propensities_are_uniform").get<bool>();
  model.sinkhorn_nonconverged = meta.at("sinkhorn_nonconverged").get<std::size_t>();
  model.config = train_config_from_json(meta.at("config"));
  model.user_labels = read_labels(dir / "user_ids.txt");
  model.item_labels = read_labels(dir / "item_ids.txt");
  if (model.params.fs.user_factors.rows != model.user_count ||
      model.params.fs.item_factors.rows != model.item_count) {
    fail_runtime("checkpoint: table shapes do not match metadata");
  }
  return model;
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.lambda_a = j.at("lambda_a").get<double>();
  cfg.lambda_z = j.at("lambda_z").get<double>();
  cfg.lambda_d = j.at("lambda_d").get<double>();
  cfg.l2_reg = j.at("l2_reg").get<double>();
  cfg.k_d = j.at("k_d").get<std::size_t>();
  cfg.k_a = j.at("k_a").get<std::size_t>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.max_epochs = j.at("max_epochs").get<std::size_t>();
  cfg.patience = j.at("patience").get<std::size_t>();
  cfg.balance_batch_l = j.at("balance_batch_l").get<std::size_t>();
  cfg.clip_floor = j.at("clip_floor").get<double>();
  cfg.omega = j.at("omega").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.ablation = ablation_from_name(j.at("ablation").get<std::string>());
  cfg.joint_exposure_update = j.at("joint_exposure_update").get<bool>();
  cfg.walk.walks_per_node = j.at("walks_per_node").get<std::size_t>();
  cfg.walk.walk_length = j.at("walk_length").get<std::size_t>();
  cfg.walk.window = j.at("window").get<std::size_t>();
  cfg.walk.return_param = j.at("return_param").get<double>();
  cfg.walk.inout_param = j.at("inout_param").get<double>();
  cfg.walk.negatives_per_positive =
      j.at("negatives_per_positive").get<std::size_t>();
  cfg.walk.epochs = j.at("embed_epochs").get<std::size_t>();
  cfg.walk.learning_rate = j.at("embed_learning_rate").get<double>();
  cfg.exposure_epochs = j.at("exposure_epochs").get<std::size_t>();
  cfg.exposure_learning_rate = j.at("exposure_learning_rate").get<double>();
  cfg.sinkhorn_eps_scale = j.at("sinkhorn_eps_scale").get<double>();
  cfg.sinkhorn_max_iters = j.at("sinkhorn_max_iters").get<std::size_t>();
  cfg.sinkhorn_tol = j.at("sinkhorn_tol").get<double>();
  cfg.metrics.relevance_threshold = j.at("relevance_threshold").get<double>();
  cfg.metrics.k_list = j.at("k_list").get<std::vector<std::size_t>>();
  cfg.metrics.clamp = j.at("clamp_predictions").get<bool>();
  cfg.metrics.clamp_lo = j.at("clamp_lo").get<double>();
  cfg.metrics.clamp_hi = j.at("clamp_hi").get<double>();
  return cfg;
}

}  // namespace denc
