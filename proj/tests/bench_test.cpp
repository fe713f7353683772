#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <sstream>

#include "bench/bench.hpp"
#include "support.hpp"

using namespace oope;
using namespace oope::bench;
using oope::testing::da_key576;
using oope::testing::do_key512;

namespace {

// Advances 1 us per reading, whichever thread reads it.
class StepClock : public proto::Clock {
 public:
  int64_t now_ns() const override { return t_.fetch_add(1000) + 1000; }

 private:
  mutable std::atomic<int64_t> t_{0};
};

std::string golden(const std::string& name) {
  std::ifstream is(std::string(OOPE_GOLDEN_DIR) + "/" + name);
  EXPECT_TRUE(is.good()) << name;
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<TrialSample> fixed_samples() {
  // rounds, total, session, round, decrypt, gc, integrity (ns)
  return {
      {4, 9000000, 8000000, 7000000, 3000000, 1000000, 0},  // warm-up
      {4, 5000000, 4400000, 4000000, 2000000, 1000000, 0},
      {4, 6000000, 4400000, 4000000, 2000000, 600000, 400000},
  };
}

BenchConfig small(std::vector<uint64_t> sizes, uint32_t trials) {
  BenchConfig c;
  c.db_sizes = std::move(sizes);
  c.trials = trials;
  c.warmup = 1;
  c.l = 16;
  c.k = 32;
  c.key_bits = 512;
  c.seed = 3;
  return c;
}

double at(const nlohmann::ordered_json& row, const char* k) { return row.at(k).get<double>(); }

}  // namespace

TEST(BenchReport, EncryptRowArithmetic) {
  auto row = encrypt_row(1000, 4, fixed_samples(), 1);
  EXPECT_EQ(row.at("trials").get<int>(), 3);
  EXPECT_DOUBLE_EQ(at(row, "rounds_mean"), 4.0);
  EXPECT_DOUBLE_EQ(at(row, "total_ms"), 5.5);
  EXPECT_DOUBLE_EQ(at(row, "total_ms_all"), 6.666667);
  EXPECT_DOUBLE_EQ(at(row, "session_ms"), 4.4);
  EXPECT_DOUBLE_EQ(at(row, "compare_ms"), 1.0);
  EXPECT_DOUBLE_EQ(at(row, "decrypt_ms"), 2.0);
  EXPECT_DOUBLE_EQ(at(row, "gc_ms"), 0.8);
  EXPECT_DOUBLE_EQ(at(row, "integrity_ms"), 0.2);
  EXPECT_DOUBLE_EQ(at(row, "net_ms"), 1.0);
  EXPECT_DOUBLE_EQ(at(row, "predicted_ms"), 4.0);
  EXPECT_DOUBLE_EQ(at(row, "decomposition_error"), 0.090909);
}

TEST(BenchReport, CompareRowArithmetic) {
  auto row = compare_row(1000, fixed_samples(), 1);
  EXPECT_DOUBLE_EQ(at(row, "compare_ms"), 1.0);
  EXPECT_DOUBLE_EQ(at(row, "compare_ms_all"), 1.25);
  EXPECT_DOUBLE_EQ(at(row, "stddev_ms"), 0.0);
  EXPECT_DOUBLE_EQ(at(row, "decrypt_ms"), 0.5);
  EXPECT_DOUBLE_EQ(at(row, "gc_ms"), 0.2);
  EXPECT_DOUBLE_EQ(at(row, "integrity_ms"), 0.05);
  EXPECT_DOUBLE_EQ(at(row, "net_ms"), 0.25);
  EXPECT_DOUBLE_EQ(at(row, "decrypt_share"), 0.714286);
}

TEST(BenchReport, WarmupLargerThanTrialsUsesAll) {
  auto row = compare_row(10, fixed_samples(), 5);
  EXPECT_DOUBLE_EQ(at(row, "compare_ms"), 1.25);
}

TEST(BenchReport, GoldenCsvAndJson) {
  Report r{"encrypt", kEncryptColumns, {encrypt_row(1000, 4, fixed_samples(), 1)}, {"skipped db_size 1000000: test"}};
  EXPECT_EQ(to_csv(r), golden("encrypt.csv"));
  EXPECT_EQ(to_json(r), golden("encrypt.json"));
  Report c{"compare", kCompareColumns, {compare_row(1000, fixed_samples(), 1)}, {}};
  EXPECT_EQ(to_csv(c), golden("compare.csv"));
}

TEST(BenchConfigCheck, Log2mBounds) {
  EXPECT_EQ(min_log2m(ope::Mode::det, 1000), 22u);
  EXPECT_EQ(min_log2m(ope::Mode::fh, 1000), 64u);
  BenchConfig c = small({1000}, 1);
  EXPECT_EQ(effective_log2m(c), 32u);
  c.mode = ope::Mode::fh;
  EXPECT_EQ(effective_log2m(c), 64u);
  c.log2m = 40;
  EXPECT_THROW(check_config(c), Error);
  c.db_sizes = {};
  EXPECT_THROW(check_config(c), Error);
}

// Single-node table: exactly one comparison per session. The step clock makes every
// timer positive, and the report identities hold whatever the interleaving.
TEST(BenchRun, FakeClockSingleNode) {
  StepClock clock;
  BenchConfig cfg = small({1, 20}, 4);
  Keys keys{&do_key512(), nullptr, nullptr};
  Report r = bench_encrypt(cfg, keys, &clock);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(at(r.rows[0], "rounds_mean"), 1.0);
  EXPECT_EQ(r.rows[0].at("height").get<int>(), 1);
  for (const auto& row : r.rows) {
    EXPECT_DOUBLE_EQ(at(row, "rounds_mean"), row.at("height").get<double>());
    EXPECT_GT(at(row, "decrypt_ms"), 0);
    EXPECT_GT(at(row, "session_ms"), 0);
    EXPECT_NEAR(at(row, "predicted_ms"), at(row, "rounds_mean") * at(row, "compare_ms"), 1e-5);
  }
  Report c = bench_compare(cfg, keys, &clock);
  ASSERT_EQ(c.rows.size(), 2u);
  for (const auto& row : c.rows) {
    EXPECT_NEAR(at(row, "net_ms"),
                at(row, "compare_ms") - at(row, "decrypt_ms") - at(row, "gc_ms") - at(row, "integrity_ms"), 1e-5);
  }
}

TEST(BenchRun, FhSessions) {
  BenchConfig cfg = small({16}, 3);
  cfg.mode = ope::Mode::fh;
  cfg.log2m = 40;
  Keys keys{&do_key512(), &da_key576(), nullptr};
  Report r = bench_encrypt(cfg, keys);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(at(r.rows[0], "rounds_mean"), r.rows[0].at("height").get<double>());
}

TEST(BenchRun, TreegenByteAccounting) {
  BenchConfig cfg = small({1, 100}, 1);
  Keys keys{&do_key512(), nullptr, nullptr};
  Report r = bench_treegen(cfg, keys);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    const uint64_t n = row.at("db_size").get<uint64_t>();
    EXPECT_EQ(row.at("formula_bytes").get<uint64_t>(), n * (2 * 512 + 32) / 8);
    EXPECT_EQ(row.at("payload_bytes").get<uint64_t>(), row.at("formula_bytes").get<uint64_t>());
    EXPECT_EQ(row.at("table_bytes").get<uint64_t>(),
              row.at("payload_bytes").get<uint64_t>() + row.at("framing_bytes").get<uint64_t>() +
                  row.at("fixed_bytes").get<uint64_t>() + row.at("extra_bytes").get<uint64_t>());
  }
  EXPECT_EQ(r.rows[0].at("payload_bytes").get<uint64_t>(), 132u);
}

TEST(BenchRun, OversizedTableSkippedWithNotice) {
  BenchConfig cfg = small({uint64_t(1) << 50}, 1);
  cfg.log2m = 100;
  Keys keys{&do_key512(), nullptr, nullptr};
  Report r = bench_treegen(cfg, keys);
  EXPECT_TRUE(r.rows.empty());
  ASSERT_EQ(r.notices.size(), 1u);
  EXPECT_NE(r.notices[0].find("skipped"), std::string::npos);
}
