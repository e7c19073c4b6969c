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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "denc/common.hpp"

namespace denc {

static_assert(std::endian::native == std::endian::little,
              "binary table format is little-endian; big-endian hosts are not supported");

// Dense row-major matrix of doubles. Deliberately minimal: every factor
// table in the pipeline is small enough that a flat vector wins.
struct Table {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Table() = default;
  Table(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) {
    return {values.data() + r * cols, cols};
  }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }

  bool same_shape(const Table& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Binary layout: "DNCT" magic, u32 version (=1), u64 rows, u64 cols,
// rows*cols little-endian f64 in row-major order.
inline void write_table(const std::filesystem::path& path, const Table& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_runtime("cannot open for writing: " + path.string());
  const char magic[4] = {'D', 'N', 'C', 'T'};
  const std::uint32_t version = 1;
  const std::uint64_t r = t.rows, c = t.cols;
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&r), sizeof r);
  out.write(reinterpret_cast<const char*>(&c), sizeof c);
  out.write(reinterpret_cast<const char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  if (!out) fail_runtime("short write: " + path.string());
}

inline Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_runtime("cannot open for reading: " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t r = 0, c = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&r), sizeof r);
  in.read(reinterpret_cast<char*>(&c), sizeof c);
  if (!in || std::memcmp(magic, "DNCT", 4) != 0) {
    fail_runtime("not a table file: " + path.string());
  }
  if (version != 1) {
    fail_runtime("unsupported table version in " + path.string());
  }
  Table t(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  in.read(reinterpret_cast<char*>(t.values.data()),
          static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  if (!in) fail_runtime("truncated table file: " + path.string());
  return t;
}

}  // namespace denc
