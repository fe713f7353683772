#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "proto/params.hpp"

// Latency and storage measurements over in-process deployments. Sessions run the
// full three-party protocol; timings come from the role engines' counters.
namespace oope::bench {

struct BenchConfig {
  std::vector<uint64_t> db_sizes = {100, 1000, 10000, 100000, 1000000};
  uint32_t trials = 100;
  uint32_t warmup = 1;  // leading trials left out of the mean_* columns
  uint32_t l = 32;
  uint32_t k = 32;
  uint32_t log2m = 0;  // 0 picks the smallest value the invariants allow, at least 32
  uint32_t key_bits = 2048;
  bool tcp = false;
  ope::Mode mode = ope::Mode::det;
  integ::Scheme integrity = integ::Scheme::off;
  uint64_t seed = 1;
  // Derived randomizer pools for table generation and per-session encryptions. They
  // only speed up setup; never use them outside benchmarks.
  bool prefill = true;
};

// Deterministic tables need log2(M) above log2(n) plus a 12-bit margin; FH tables
// need log2(M) >= 6.4 log2(n).
uint32_t min_log2m(ope::Mode mode, uint64_t n);
uint32_t effective_log2m(const BenchConfig& cfg);
// Config error when an explicit log2m is below the minimum for the largest size.
void check_config(const BenchConfig& cfg);

struct Keys {
  const hom::PrivateKey* do_sk = nullptr;
  const hom::PrivateKey* da_sk = nullptr;  // FH mode
  const integ::MacParams* mac = nullptr;   // integrity on
};

// One encryption session, from counter deltas.
struct TrialSample {
  uint32_t rounds = 0;
  int64_t total_ns = 0;  // DA wall time of the call
  int64_t session_ns = 0;
  int64_t round_ns = 0;
  int64_t decrypt_ns = 0;
  int64_t gc_ns = 0;
  int64_t integrity_ns = 0;
};

struct Report {
  std::string name;
  std::vector<std::string> columns;
  std::vector<nlohmann::ordered_json> rows;  // keys follow `columns`
  std::vector<std::string> notices;
};

std::string to_csv(const Report& r);
// {"benchmark": name, "rows": [...], "notices": [...]}
std::string to_json(const Report& r);

// Report rows from samples; pure so the arithmetic can be checked with fixed inputs.
nlohmann::ordered_json encrypt_row(uint64_t db_size, uint32_t height, const std::vector<TrialSample>& s,
                                   uint32_t warmup);
nlohmann::ordered_json compare_row(uint64_t db_size, const std::vector<TrialSample>& s, uint32_t warmup);

extern const std::vector<std::string> kEncryptColumns;
extern const std::vector<std::string> kCompareColumns;
extern const std::vector<std::string> kTreegenColumns;

// `clock` replaces the steady clock in every role (tests).
Report bench_encrypt(const BenchConfig& cfg, const Keys& keys, const proto::Clock* clock = nullptr);
Report bench_compare(const BenchConfig& cfg, const Keys& keys, const proto::Clock* clock = nullptr);
Report bench_treegen(const BenchConfig& cfg, const Keys& keys);

// Bytes a table of n entries is expected to take in memory; sizes that do not fit in
// the available memory are skipped with a notice.
uint64_t estimated_memory(const BenchConfig& cfg, uint64_t n);

}  // namespace oope::bench
