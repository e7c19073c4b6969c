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
#include <limits>
#include <stdexcept>
#include <string>

namespace denc {

inline constexpr const char* kVersion = "0.1.0";

using user_id = std::uint32_t;
using item_id = std::uint32_t;

// Packed (user, item) key used by observation sets.
inline constexpr std::uint64_t pair_key(user_id u, item_id i) {
  return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(i);
}
inline constexpr user_id pair_user(std::uint64_t key) {
  return static_cast<user_id>(key >> 32);
}
inline constexpr item_id pair_item(std::uint64_t key) {
  return static_cast<item_id>(key & 0xffffffffu);
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow; -log sigmoid(x) == softplus(-x).
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Round half away from zero, the convention used for synthetic ratings
// and for split / mask sizing.
inline double round_half_up(double x) {
  return std::floor(x + 0.5);
}

inline double clamp_rating(double y, double lo = 1.0, double hi = 5.0) {
  return y < lo ? lo : (y > hi ? hi : y);
}

[[noreturn]] inline void fail_invalid(const std::string& msg) {
  throw std::invalid_argument(msg);
}

[[noreturn]] inline void fail_runtime(const std::string& msg) {
  throw std::runtime_error(msg);
}

}  // namespace denc
