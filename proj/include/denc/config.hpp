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

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "denc/common.hpp"

namespace denc {

// Flat key=value run configuration. One shared key registry covers every
// CLI subcommand; unknown keys are an error so typos cannot silently fall
// back to defaults.
class RunConfig {
 public:
  static RunConfig parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail_invalid("cannot open config file: " + path.string());
    return parse_stream(in, path.string());
  }

  static RunConfig parse_stream(std::istream& in,
                                const std::string& origin = "<stream>") {
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::string_view s = trim(line);
      if (s.empty() || s.front() == '#') continue;
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) {
        fail_invalid(origin + ":" + std::to_string(lineno) +
                     ": expected key=value");
      }
      std::string key(trim(s.substr(0, eq)));
      std::string value(trim(s.substr(eq + 1)));
      if (key.empty()) {
        fail_invalid(origin + ":" + std::to_string(lineno) + ": empty key");
      }
      cfg.values_[key] = value;
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::map<std::string, std::string>& entries() const { return values_; }

  // Rejects keys outside the registry. Called once per subcommand with the
  // full shared registry.
  void validate_keys(const std::set<std::string>& registry) const {
    for (const auto& [k, v] : values_) {
      if (!registry.count(k)) fail_invalid("unknown config key: " + k);
    }
  }

  std::string get_string(const std::string& key,
                         const std::string& fallback = "") const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) {
      fail_invalid("missing required config key: " + key);
    }
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_double(it->second, key);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_int(it->second, key);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& s = it->second;
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      fail_invalid("config key " + key + ": not an unsigned integer: " + s);
    }
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& s = it->second;
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    fail_invalid("config key " + key + ": not a boolean: " + s);
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fb) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fb;
    std::vector<double> out;
    for (const auto& tok : split_commas(it->second)) {
      out.push_back(parse_double(tok, key));
    }
    return out;
  }

  std::vector<std::size_t> get_size_list(const std::string& key,
                                         const std::vector<std::size_t>& fb) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fb;
    std::vector<std::size_t> out;
    for (const auto& tok : split_commas(it->second)) {
      const std::int64_t v = parse_int(tok, key);
      if (v < 0) fail_invalid("config key " + key + ": negative entry");
      out.push_back(static_cast<std::size_t>(v));
    }
    return out;
  }

  std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                          const std::vector<std::uint64_t>& fb) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fb;
    std::vector<std::uint64_t> out;
    for (const auto& tok : split_commas(it->second)) {
      const std::int64_t v = parse_int(tok, key);
      if (v < 0) fail_invalid("config key " + key + ": negative entry");
      out.push_back(static_cast<std::uint64_t>(v));
    }
    return out;
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
      s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
      s.remove_suffix(1);
    }
    return s;
  }

  static std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string tok;
    std::stringstream ss(s);
    while (std::getline(ss, tok, ',')) {
      out.emplace_back(trim(tok));
    }
    return out;
  }

  static double parse_double(const std::string& s, const std::string& key) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      fail_invalid("config key " + key + ": not a number: " + s);
    }
  }

  static std::int64_t parse_int(const std::string& s, const std::string& key) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      fail_invalid("config key " + key + ": not an integer: " + s);
    }
    return v;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace denc
