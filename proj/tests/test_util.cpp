#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "denc/common.hpp"
#include "denc/config.hpp"
#include "denc/parallel.hpp"
#include "denc/rng.hpp"
#include "denc/table.hpp"

#include "support/test_helpers.hpp"

using namespace denc;

TEST_CASE("sigmoid basics and symmetry") {
  CHECK(sigmoid(0.0) == Catch::Approx(0.5));
  CHECK(sigmoid(30.0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(sigmoid(-30.0) == Catch::Approx(0.0).margin(1e-12));
  // extreme inputs must not overflow
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) == 0.0);
  for (double x : {-7.3, -1.0, 0.25, 2.0, 11.0}) {
    CHECK(sigmoid(x) + sigmoid(-x) == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("softplus basics and identity") {
  CHECK(softplus(0.0) == Catch::Approx(std::log(2.0)));
  CHECK(softplus(100.0) == Catch::Approx(100.0));
  CHECK(softplus(-100.0) == Catch::Approx(0.0).margin(1e-12));
  // softplus(x) - softplus(-x) == x
  for (double x : {-20.0, -3.0, 0.5, 4.0, 25.0}) {
    CHECK(softplus(x) - softplus(-x) == Catch::Approx(x).epsilon(1e-10));
  }
  // derivative of softplus is the sigmoid
  double x = 0.7;
  const double fd = testsupport::central_difference(
      [&] { return softplus(x); }, x, 1e-6);
  CHECK(testsupport::gradient_rel_error(sigmoid(0.7), fd) < 1e-6);
}

TEST_CASE("round_half_up rounds .5 toward positive infinity") {
  CHECK(round_half_up(0.5) == 1.0);
  CHECK(round_half_up(1.5) == 2.0);
  CHECK(round_half_up(2.4) == 2.0);
  CHECK(round_half_up(2.5) == 3.0);
  CHECK(round_half_up(-0.5) == 0.0);
  CHECK(round_half_up(-1.5) == -1.0);
  CHECK(round_half_up(3.0) == 3.0);
}

TEST_CASE("clamp_rating clamps into the rating domain") {
  CHECK(clamp_rating(6.0) == 5.0);
  CHECK(clamp_rating(0.0) == 1.0);
  CHECK(clamp_rating(3.2) == 3.2);
  CHECK(clamp_rating(10.0, 0.0, 2.0) == 2.0);
}

TEST_CASE("pair_key round-trips user and item ids") {
  const user_id u = 0xDEADBEEF;
  const item_id i = 0xC0FFEE42;
  const auto key = pair_key(u, i);
  CHECK(pair_user(key) == u);
  CHECK(pair_item(key) == i);
  CHECK(pair_key(0, 0) == 0);
  CHECK(pair_user(pair_key(0xFFFFFFFFu, 1)) == 0xFFFFFFFFu);
}

TEST_CASE("derive_stream separates named streams") {
  const std::uint64_t s = 42;
  CHECK(derive_stream(s, "walk") == derive_stream(s, "walk"));
  CHECK(derive_stream(s, "walk") != derive_stream(s, "init"));
  CHECK(derive_stream(s, "walk") != derive_stream(s + 1, "walk"));
  CHECK(derive_stream(s, "walk", 0) != derive_stream(s, "walk"));
  CHECK(derive_stream(s, "walk", 1) != derive_stream(s, "walk", 2));

  // no collisions across a large family of (tag, index) streams
  std::unordered_set<std::uint64_t> seen;
  const char* tags[] = {"a", "b", "ab", "ba", "walk", "init"};
  for (const char* tag : tags) {
    for (std::uint64_t idx = 0; idx < 500; ++idx) {
      seen.insert(derive_stream(s, tag, idx));
    }
  }
  CHECK(seen.size() == 6 * 500);
}

TEST_CASE("uniform draws stay in range and look uniform") {
  Rng rng(derive_stream(7, "test_uniform"));
  std::size_t buckets[8] = {0};
  const std::size_t n = 80000;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = rng.next_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    ++buckets[static_cast<std::size_t>(u * 8.0)];
  }
  for (auto b : buckets) {
    // each bucket ~ Binomial(n, 1/8); 5 sigma ~ 523
    CHECK(std::llabs(static_cast<long long>(b) - 10000) < 550);
  }
}

TEST_CASE("next_below is exact and in range") {
  Rng rng(derive_stream(7, "test_below"));
  for (std::uint64_t n : {1ull, 2ull, 7ull, 1000ull}) {
    for (int k = 0; k < 2000; ++k) {
      CHECK(rng.next_below(n) < n);
    }
  }
  // n=1 must always yield 0
  Rng one(123);
  for (int k = 0; k < 10; ++k) CHECK(one.next_below(1) == 0);
}

TEST_CASE("normal draws have the requested moments") {
  Rng rng(derive_stream(7, "test_normal"));
  const std::size_t n = 100000;
  double sum = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = rng.next_normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::fabs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(var - 1.0) < 0.03);

  Rng rng2(derive_stream(7, "test_normal2"));
  double sum2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum2 += rng2.next_normal(3.0, 0.5);
  CHECK(sum2 / n == Catch::Approx(3.0).margin(0.02));
}

TEST_CASE("normal draw consumes exactly two uniforms") {
  Rng a(991), b(991);
  (void)a.next_normal();
  (void)b.next_u64();
  (void)b.next_u64();
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("shuffle produces a permutation deterministically") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  Rng rng(derive_stream(11, "test_shuffle"));
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);

  std::vector<int> w(50);
  std::iota(w.begin(), w.end(), 0);
  Rng rng2(derive_stream(11, "test_shuffle"));
  rng2.shuffle(w);
  CHECK(v == w);
}

TEST_CASE("sample_without_replacement yields distinct in-range indices") {
  Rng rng(derive_stream(13, "test_sample"));
  const auto got = rng.sample_without_replacement(100, 17);
  REQUIRE(got.size() == 17);
  std::set<std::size_t> uniq(got.begin(), got.end());
  CHECK(uniq.size() == 17);
  for (auto v : got) CHECK(v < 100);

  Rng rng2(derive_stream(13, "test_sample"));
  CHECK(rng2.sample_without_replacement(100, 17) == got);

  Rng rng3(1);
  const auto all = rng3.sample_without_replacement(10, 10);
  std::set<std::size_t> all_set(all.begin(), all.end());
  CHECK(all_set.size() == 10);
  Rng rng4(1);
  CHECK(rng4.sample_without_replacement(5, 0).empty());
}

TEST_CASE("table storage and access") {
  Table t(2, 3);
  REQUIRE(t.values.size() == 6);
  t.at(0, 0) = 1.0;
  t.at(1, 2) = -2.5;
  CHECK(t.row(1).size() == 3);
  CHECK(t.row(1)[2] == -2.5);
  CHECK(dot(t.row(0), t.row(0)) == 1.0);
  std::vector<double> a{1.0, 2.0}, b{4.0, 6.0};
  CHECK(dot(std::span<const double>(a), std::span<const double>(b)) == 16.0);
  CHECK(squared_distance(std::span<const double>(a),
                         std::span<const double>(b)) == 25.0);
}

TEST_CASE("table round-trips through the binary format exactly") {
  const auto dir = testsupport::scratch_dir("table_io");
  Table t(3, 4);
  Rng rng(77);
  for (auto& v : t.values) v = rng.next_normal() * 1e3;
  t.at(0, 0) = 0.1;  // not exactly representable; must survive bitwise
  write_table(dir / "t.bin", t);
  const Table u = read_table(dir / "t.bin");
  REQUIRE(u.rows == 3);
  REQUIRE(u.cols == 4);
  CHECK(std::memcmp(u.values.data(), t.values.data(),
                    t.values.size() * sizeof(double)) == 0);
}

TEST_CASE("table reader rejects corrupt files") {
  const auto dir = testsupport::scratch_dir("table_bad");
  Table t(2, 2);
  write_table(dir / "t.bin", t);

  auto raw = testsupport::read_file(dir / "t.bin");
  raw[0] = 'X';
  testsupport::write_file(dir / "bad_magic.bin", raw);
  CHECK_THROWS_AS(read_table(dir / "bad_magic.bin"), std::runtime_error);

  raw = testsupport::read_file(dir / "t.bin");
  raw.resize(raw.size() - 5);
  testsupport::write_file(dir / "short.bin", raw);
  CHECK_THROWS_AS(read_table(dir / "short.bin"), std::runtime_error);

  CHECK_THROWS_AS(read_table(dir / "missing.bin"), std::runtime_error);
}

TEST_CASE("run config parses key=value lines") {
  std::stringstream ss;
  ss << "# comment\n"
     << "alpha = 0.5\n"
     << "\n"
     << "name= hello \n"
     << "count =42\r\n"
     << "flag = true\n"
     << "ks = 1, 2,3\n"
     << "fs = 0.1,0.9\n";
  const auto cfg = RunConfig::parse_stream(ss, "test.cfg");
  CHECK(cfg.get_double("alpha", 0.0) == 0.5);
  CHECK(cfg.get_string("name") == "hello");
  CHECK(cfg.get_int("count", 0) == 42);
  CHECK(cfg.get_u64("count", 0) == 42);
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_size_list("ks", {}) == std::vector<std::size_t>{1, 2, 3});
  CHECK(cfg.get_double_list("fs", {}) == std::vector<double>{0.1, 0.9});
  CHECK(cfg.get_double("absent", 7.5) == 7.5);
  CHECK_FALSE(cfg.has("absent"));
  CHECK(cfg.has("alpha"));
}

TEST_CASE("run config rejects malformed input") {
  {
    std::stringstream ss("just a line without equals\n");
    CHECK_THROWS_WITH(RunConfig::parse_stream(ss, "f.cfg"),
                      Catch::Matchers::ContainsSubstring("f.cfg:1"));
  }
  {
    std::stringstream ss(" = value\n");
    CHECK_THROWS_AS(RunConfig::parse_stream(ss, "f.cfg"),
                    std::invalid_argument);
  }
  std::stringstream ok("x = not_a_number\nb = maybe\n");
  const auto cfg = RunConfig::parse_stream(ok);
  CHECK_THROWS_AS(cfg.get_double("x", 0.0), std::invalid_argument);
  CHECK_THROWS_AS(cfg.get_int("x", 0), std::invalid_argument);
  CHECK_THROWS_AS(cfg.get_bool("b", false), std::invalid_argument);
  CHECK_THROWS_AS(cfg.require_string("missing"), std::invalid_argument);
}

TEST_CASE("run config key registry rejects unknown keys") {
  std::stringstream ss("good = 1\nbda_key = 2\n");
  const auto cfg = RunConfig::parse_stream(ss);
  CHECK_THROWS_WITH(cfg.validate_keys({"good"}),
                    Catch::Matchers::ContainsSubstring("bda_key"));
  CHECK_NOTHROW(cfg.validate_keys({"good", "bda_key"}));
}

TEST_CASE("parallel_for touches every slot exactly once") {
  std::vector<int> hits(257, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  parallel_for(0, [&](std::size_t) { FAIL("must not be called"); });
}
