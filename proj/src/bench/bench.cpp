#include "bench/bench.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <set>

#include "common/log.hpp"
#include "ope/persist.hpp"
#include "proto/cluster.hpp"
#include "store/csv.hpp"

namespace oope::bench {

using nlohmann::ordered_json;

const std::vector<std::string> kEncryptColumns = {
    "db_size", "height",       "trials", "rounds_mean", "total_ms", "total_ms_all",  "session_ms",
    "compare_ms", "decrypt_ms", "gc_ms", "integrity_ms", "net_ms",  "predicted_ms", "decomposition_error"};
const std::vector<std::string> kCompareColumns = {"db_size", "trials", "compare_ms", "compare_ms_all", "stddev_ms",
                                                  "decrypt_ms", "gc_ms", "integrity_ms", "net_ms", "decrypt_share"};
const std::vector<std::string> kTreegenColumns = {"db_size",       "key_bits",      "log2m",       "gen_s",
                                                  "pool_s",        "table_bytes",   "payload_bytes", "framing_bytes",
                                                  "fixed_bytes",   "extra_bytes",   "formula_bytes", "payload_mib"};

namespace {

double ms(double ns) { return ns / 1e6; }

// Six decimals keep the reports stable across runs with equal inputs.
double num(double v) { return std::round(v * 1e6) / 1e6; }

uint32_t ceil_log2(uint64_t n) {
  uint32_t b = 0;
  while (b < 64 && (uint64_t(1) << b) < n) ++b;
  return b;
}

std::vector<TrialSample> measured(const std::vector<TrialSample>& s, uint32_t warmup) {
  if (warmup >= s.size()) return s;
  return std::vector<TrialSample>(s.begin() + warmup, s.end());
}

struct Sums {
  double n = 0, rounds = 0, total = 0, session = 0, round = 0, decrypt = 0, gc = 0, integrity = 0;
};

Sums sum(const std::vector<TrialSample>& s) {
  Sums t;
  t.n = static_cast<double>(s.size());
  for (const auto& x : s) {
    t.rounds += x.rounds;
    t.total += static_cast<double>(x.total_ns);
    t.session += static_cast<double>(x.session_ns);
    t.round += static_cast<double>(x.round_ns);
    t.decrypt += static_cast<double>(x.decrypt_ns);
    t.gc += static_cast<double>(x.gc_ns);
    t.integrity += static_cast<double>(x.integrity_ns);
  }
  return t;
}

double per(double a, double b) { return b > 0 ? a / b : 0.0; }

uint64_t available_memory() {
  const long pages = sysconf(_SC_AVPHYS_PAGES);
  const long size = sysconf(_SC_PAGESIZE);
  if (pages <= 0 || size <= 0) return UINT64_MAX;
  return static_cast<uint64_t>(pages) * static_cast<uint64_t>(size);
}

proto::ProtocolParams params_of(const BenchConfig& cfg) {
  proto::ProtocolParams p;
  p.l = cfg.l;
  p.k = cfg.k;
  p.M = ope::max_order_from_log2(static_cast<int>(effective_log2m(cfg)));
  p.mode = cfg.mode;
  p.integrity = cfg.integrity;
  p.validate();
  return p;
}

std::vector<uint64_t> dataset(uint64_t n, uint32_t l, Rng& rng) {
  const uint64_t space = l >= 64 ? UINT64_MAX : (uint64_t(1) << l);
  std::vector<uint64_t> out;
  out.reserve(n);
  if (space / 2 < n) {
    for (uint64_t i = 0; i < n; ++i) out.push_back(rng.below(space));
    return out;
  }
  std::set<uint64_t> seen;
  while (out.size() < n) {
    const uint64_t x = rng.below(space);
    if (seen.insert(x).second) out.push_back(x);
  }
  return out;
}

struct Built {
  ope::ServerState state;
  double gen_s = 0;
  double pool_s = 0;
};

Built build_table(const BenchConfig& cfg, const Keys& keys, const proto::ProtocolParams& P, uint64_t n, Rng& rng) {
  const auto data = dataset(n, cfg.l, rng);
  hom::RandomnessPool pool(keys.do_sk->public_key());
  Built out;
  auto t0 = std::chrono::steady_clock::now();
  if (cfg.prefill) {
    size_t per_entry = cfg.mode == ope::Mode::fh ? 3 : 1;
    if (cfg.integrity == integ::Scheme::pedersen) ++per_entry;
    const size_t count = n * per_entry;
    pool.fill_derived(count, std::clamp<size_t>(count, 2, 256), rng, keys.do_sk);
  }
  auto t1 = std::chrono::steady_clock::now();
  ope::InitOptions io;
  io.mode = cfg.mode;
  io.l = cfg.l;
  io.M = P.M;
  io.integrity = cfg.integrity;
  io.params = keys.mac;
  io.pool = cfg.prefill ? &pool : nullptr;
  out.state = ope::init_state(data, keys.do_sk->public_key(), io, rng).server;
  auto t2 = std::chrono::steady_clock::now();
  out.pool_s = std::chrono::duration<double>(t1 - t0).count();
  out.gen_s = std::chrono::duration<double>(t2 - t1).count();
  return out;
}

bool fits(const BenchConfig& cfg, uint64_t n, uint64_t reserved, Report& r) {
  const uint64_t need = estimated_memory(cfg, n);
  const uint64_t have = available_memory() - std::min(available_memory(), reserved);
  if (need <= have / 10 * 8) return true;
  r.notices.push_back("skipped db_size " + std::to_string(n) + ": needs about " + std::to_string(need >> 20) +
                      " MiB, " + std::to_string(have >> 20) + " MiB available");
  log_warn(r.notices.back());
  return false;
}

// One table and cluster per database size, kept alive so trials can alternate
// between sizes.
struct Run {
  uint64_t n = 0;
  uint32_t height = 0;
  Built built;
  std::unique_ptr<hom::RandomnessPool> csp_pool, da_pool;
  std::unique_ptr<proto::Cluster> cluster;
  std::vector<TrialSample> samples;
};

std::unique_ptr<Run> prepare(const BenchConfig& cfg, const Keys& keys, uint64_t n, const proto::Clock* clock,
                             Rng& rng) {
  const proto::ProtocolParams P = params_of(cfg);
  auto out = std::make_unique<Run>();
  out->n = n;
  out->built = build_table(cfg, keys, P, n, rng);
  out->height = out->built.state.tree.height();

  const hom::PublicKey& pk = keys.do_sk->public_key();
  out->csp_pool = std::make_unique<hom::RandomnessPool>(pk);
  out->da_pool = std::make_unique<hom::RandomnessPool>(pk);
  if (cfg.prefill) {
    // Per session: one blinding per round (two with Pedersen), four for FH min-max.
    const size_t per_round = cfg.integrity == integ::Scheme::pedersen ? 2 : 1;
    const size_t sessions = cfg.trials + 1;
    const size_t csp_count = sessions * ((out->height + 2) * per_round + 4);
    out->csp_pool->fill_derived(csp_count, std::clamp<size_t>(csp_count, 2, 256), rng);
    out->da_pool->fill_derived(sessions * 4, std::clamp<size_t>(sessions * 4, 2, 256), rng);
  }

  proto::ClusterOptions co;
  co.params = P;
  co.tcp = cfg.tcp;
  co.seed = cfg.seed ^ n;
  co.clock = clock;
  co.csp_pool = cfg.prefill ? out->csp_pool.get() : nullptr;
  co.da_pool = cfg.prefill ? out->da_pool.get() : nullptr;
  out->cluster = std::make_unique<proto::Cluster>(co, *keys.do_sk, keys.mac, keys.da_sk);
  out->cluster->add_column("bench", &out->built.state);
  return out;
}

void trial(const BenchConfig& cfg, Run& b, const proto::Clock* clock, Rng& rng) {
  const proto::Clock& clk = clock ? *clock : proto::steady_clock();
  const uint64_t space = cfg.l >= 64 ? UINT64_MAX : (uint64_t(1) << cfg.l);
  const auto before = proto::snapshot(b.cluster->stats());
  const uint64_t x = rng.below(space);
  const int64_t t0 = clk.now_ns();
  const proto::EncryptResult r = b.cluster->da().encrypt("bench", x);
  const int64_t t1 = clk.now_ns();
  // The cleanup also orders this read after the CSP finished the session.
  std::vector<SessionId> sids;
  if (!r.existing) sids.push_back(r.sid);
  b.cluster->da().cleanup("bench", sids);
  const auto after = proto::snapshot(b.cluster->stats());

  TrialSample s;
  s.rounds = r.rounds;
  s.total_ns = t1 - t0;
  s.session_ns = after.session_ns - before.session_ns;
  s.round_ns = after.round_ns - before.round_ns;
  s.decrypt_ns = after.decrypt_ns - before.decrypt_ns;
  s.gc_ns = after.gc_ns - before.gc_ns;
  s.integrity_ns = after.integrity_ns - before.integrity_ns;
  b.samples.push_back(s);
}

// Trials run round-robin over the sizes so slow drift in machine speed lands on
// every size alike instead of separating them.
std::vector<std::unique_ptr<Run>> run_sessions(const BenchConfig& cfg, const Keys& keys, const proto::Clock* clock,
                                               Rng& rng, Report& r) {
  std::vector<std::unique_ptr<Run>> runs;
  uint64_t reserved = 0;
  for (uint64_t n : cfg.db_sizes) {
    if (!fits(cfg, n, reserved, r)) continue;
    reserved += estimated_memory(cfg, n);
    runs.push_back(prepare(cfg, keys, n, clock, rng));
  }
  for (uint32_t t = 0; t < cfg.trials; ++t) {
    for (auto& b : runs) trial(cfg, *b, clock, rng);
  }
  for (auto& b : runs) b->cluster->shutdown();
  return runs;
}


std::string cell(const ordered_json& v) {
  if (v.is_string()) return store::csv_field(v.get<std::string>());
  if (v.is_null()) return "";
  return v.dump();
}

}  // namespace

uint32_t min_log2m(ope::Mode mode, uint64_t n) {
  const uint32_t lg = ceil_log2(std::max<uint64_t>(n, 2));
  if (mode == ope::Mode::fh) return static_cast<uint32_t>(std::ceil(6.4 * lg));
  return lg + 12;
}

uint32_t effective_log2m(const BenchConfig& cfg) {
  if (cfg.log2m) return cfg.log2m;
  uint64_t n = 1;
  for (uint64_t s : cfg.db_sizes) n = std::max(n, s);
  return std::min<uint32_t>(127, std::max<uint32_t>(32, min_log2m(cfg.mode, n)));
}

void check_config(const BenchConfig& cfg) {
  if (cfg.db_sizes.empty()) fail(Errc::config, "no database sizes");
  if (cfg.trials == 0) fail(Errc::config, "trials must be positive");
  uint64_t n = 1;
  for (uint64_t s : cfg.db_sizes) {
    if (s == 0) fail(Errc::config, "database sizes must be positive");
    n = std::max(n, s);
  }
  const uint32_t need = min_log2m(cfg.mode, n);
  const uint32_t have = effective_log2m(cfg);
  if (have < need) {
    fail(Errc::config, "log2m " + std::to_string(have) + " is too small for " + std::to_string(n) + " entries (need " +
                           std::to_string(need) + ")");
  }
  params_of(cfg);
}

uint64_t estimated_memory(const BenchConfig& cfg, uint64_t n) {
  const uint64_t cipher = 2 * uint64_t(cfg.key_bits) / 8;
  const uint64_t ciphers = cfg.mode == ope::Mode::fh ? 3 : 1;
  // Table ciphertexts, the same again for the prefilled pool, plus map and tree nodes.
  return n * (ciphers * cipher * (cfg.prefill ? 2 : 1) + 256);
}

std::string to_csv(const Report& r) {
  std::string out;
  for (size_t i = 0; i < r.columns.size(); ++i) out += (i ? "," : "") + r.columns[i];
  out += '\n';
  for (const auto& row : r.rows) {
    for (size_t i = 0; i < r.columns.size(); ++i) {
      if (i) out += ',';
      out += row.contains(r.columns[i]) ? cell(row.at(r.columns[i])) : "";
    }
    out += '\n';
  }
  return out;
}

std::string to_json(const Report& r) {
  ordered_json j;
  j["benchmark"] = r.name;
  j["rows"] = ordered_json::array();
  for (const auto& row : r.rows) j["rows"].push_back(row);
  j["notices"] = r.notices;
  return j.dump(2) + "\n";
}

ordered_json encrypt_row(uint64_t db_size, uint32_t height, const std::vector<TrialSample>& samples,
                         uint32_t warmup) {
  const Sums a = sum(samples);
  const Sums m = sum(measured(samples, warmup));
  const double compute = m.decrypt + m.gc + m.integrity;
  const double compare_ns = per(m.round, m.rounds);
  const double rounds_mean = per(m.rounds, m.n);
  const double session_ns = per(m.session, m.n);
  const double predicted_ns = rounds_mean * compare_ns;
  ordered_json row;
  row["db_size"] = db_size;
  row["height"] = height;
  row["trials"] = samples.size();
  row["rounds_mean"] = num(rounds_mean);
  row["total_ms"] = num(ms(per(m.total, m.n)));
  row["total_ms_all"] = num(ms(per(a.total, a.n)));
  row["session_ms"] = num(ms(session_ns));
  row["compare_ms"] = num(ms(compare_ns));
  row["decrypt_ms"] = num(ms(per(m.decrypt, m.n)));
  row["gc_ms"] = num(ms(per(m.gc, m.n)));
  row["integrity_ms"] = num(ms(per(m.integrity, m.n)));
  row["net_ms"] = num(ms(per(m.round - compute, m.n)));
  row["predicted_ms"] = num(ms(predicted_ns));
  row["decomposition_error"] = num(session_ns > 0 ? std::abs(session_ns - predicted_ns) / session_ns : 0.0);
  return row;
}

ordered_json compare_row(uint64_t db_size, const std::vector<TrialSample>& samples, uint32_t warmup) {
  const auto ms_samples = measured(samples, warmup);
  const Sums a = sum(samples);
  const Sums m = sum(ms_samples);
  const double mean = per(m.round, m.rounds);
  double var = 0;
  size_t k = 0;
  for (const auto& s : ms_samples) {
    if (!s.rounds) continue;
    const double d = static_cast<double>(s.round_ns) / s.rounds - mean;
    var += d * d;
    ++k;
  }
  const double sd = k > 1 ? std::sqrt(var / static_cast<double>(k - 1)) : 0.0;
  ordered_json row;
  row["db_size"] = db_size;
  row["trials"] = samples.size();
  row["compare_ms"] = num(ms(mean));
  row["compare_ms_all"] = num(ms(per(a.round, a.rounds)));
  row["stddev_ms"] = num(ms(sd));
  row["decrypt_ms"] = num(ms(per(m.decrypt, m.rounds)));
  row["gc_ms"] = num(ms(per(m.gc, m.rounds)));
  row["integrity_ms"] = num(ms(per(m.integrity, m.rounds)));
  row["net_ms"] = num(ms(per(m.round - m.decrypt - m.gc - m.integrity, m.rounds)));
  row["decrypt_share"] = num(per(m.decrypt, m.decrypt + m.gc));
  return row;
}

Report bench_encrypt(const BenchConfig& cfg, const Keys& keys, const proto::Clock* clock) {
  check_config(cfg);
  Report r{"encrypt", kEncryptColumns, {}, {}};
  Rng rng = Rng::from_seed(cfg.seed, "bench-encrypt");
  for (const auto& b : run_sessions(cfg, keys, clock, rng, r)) {
    r.rows.push_back(encrypt_row(b->n, b->height, b->samples, cfg.warmup));
  }
  return r;
}

Report bench_compare(const BenchConfig& cfg, const Keys& keys, const proto::Clock* clock) {
  check_config(cfg);
  Report r{"compare", kCompareColumns, {}, {}};
  Rng rng = Rng::from_seed(cfg.seed, "bench-compare");
  for (const auto& b : run_sessions(cfg, keys, clock, rng, r)) {
    r.rows.push_back(compare_row(b->n, b->samples, cfg.warmup));
  }
  return r;
}

Report bench_treegen(const BenchConfig& cfg, const Keys& keys) {
  check_config(cfg);
  Report r{"treegen", kTreegenColumns, {}, {}};
  Rng rng = Rng::from_seed(cfg.seed, "bench-treegen");
  const proto::ProtocolParams P = params_of(cfg);
  const hom::PublicKey& pk = keys.do_sk->public_key();
  for (uint64_t n : cfg.db_sizes) {
    if (!fits(cfg, n, 0, r)) continue;
    Built built = build_table(cfg, keys, P, n, rng);
    const ope::OpeTable& t = built.state.table;
    const ope::TableHeader h = ope::make_header(t, pk, cfg.integrity, keys.mac);
    ope::CountingSink sink;
    ope::TableWriter w(sink, h);
    for (const auto& [y, e] : t.entries()) w.add(e);
    w.finish();
    const ope::StorageReport rep = ope::storage_report(h);
    // Closed form, independent of the writer: 2 log2 N + log2 M bits per entry.
    const uint64_t formula = t.size() * (2 * uint64_t(pk.key_bits()) + h.log2m) / 8;
    ordered_json row;
    row["db_size"] = n;
    row["key_bits"] = pk.key_bits();
    row["log2m"] = h.log2m;
    row["gen_s"] = num(built.gen_s);
    row["pool_s"] = num(built.pool_s);
    row["table_bytes"] = sink.bytes();
    row["payload_bytes"] = rep.payload_bytes();
    row["framing_bytes"] = rep.framing_bytes();
    row["fixed_bytes"] = rep.fixed_bytes;
    row["extra_bytes"] = rep.extra_bytes;
    row["formula_bytes"] = formula;
    row["payload_mib"] = num(static_cast<double>(rep.payload_bytes()) / (1024.0 * 1024.0));
    r.rows.push_back(std::move(row));
  }
  return r;
}

}  // namespace oope::bench
