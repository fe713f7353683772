#include "oope/oope.h"

#include <cstring>
#include <iostream>
#include <mutex>
#include <new>
#include <string>

#include "app/deploy.hpp"
#include "app/files.hpp"
#include "bench/bench.hpp"
#include "common/log.hpp"
#include "store/bridge.hpp"

using namespace oope;

struct oope_key {
  hom::PrivateKey sk;
};

struct oope_csp {
  std::unique_ptr<app::CspServer> server;
};

struct oope_do {
  std::unique_ptr<app::DoDaemon> daemon;
};

struct oope_da {
  std::unique_ptr<app::DaSession> session;
};

namespace {

thread_local std::string last_error;

oope_status set_error(oope_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

template <class F>
oope_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return OOPE_OK;
  } catch (const Error& e) {
    return set_error(static_cast<oope_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(OOPE_E_CAPACITY, "out of memory");
  } catch (const std::exception& e) {
    return set_error(OOPE_E_INTERNAL, e.what());
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) fail(Errc::usage, std::string(what) + " must not be NULL");
}

std::string str(const char* s) { return s ? s : ""; }

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

std::vector<std::string> split_list(const char* text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char* p = text ? text : ""; ; ++p) {
    if (*p == ',' || *p == '\0') {
      size_t b = cur.find_first_not_of(' '), e = cur.find_last_not_of(' ');
      if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
      cur.clear();
      if (*p == '\0') break;
    } else {
      cur += *p;
    }
  }
  return out;
}

ope::Mode to_mode(oope_mode m) {
  switch (m) {
    case OOPE_MODE_DET: return ope::Mode::det;
    case OOPE_MODE_FH: return ope::Mode::fh;
  }
  fail(Errc::usage, "unknown mode " + std::to_string(static_cast<int>(m)));
}

integ::Scheme to_scheme(oope_integrity s) {
  switch (s) {
    case OOPE_INTEGRITY_OFF: return integ::Scheme::off;
    case OOPE_INTEGRITY_DLMAC: return integ::Scheme::dlmac;
    case OOPE_INTEGRITY_PEDERSEN: return integ::Scheme::pedersen;
  }
  fail(Errc::usage, "unknown integrity scheme " + std::to_string(static_cast<int>(s)));
}

proto::ProtocolParams to_params(const oope_params& p) {
  proto::ProtocolParams out;
  out.l = p.l;
  out.k = p.k;
  if (p.max_order) {
    out.M = Order::parse(p.max_order);
  } else {
    if (p.log2m < 2 || p.log2m > 127) fail(Errc::config, "log2m must be in [2, 127]");
    out.M = ope::max_order_from_log2(static_cast<int>(p.log2m));
  }
  out.mode = to_mode(p.mode);
  out.integrity = to_scheme(p.integrity);
  out.validate();
  return out;
}

void copy_field(char (&dst)[40], const std::string& s) {
  std::snprintf(dst, sizeof dst, "%s", s.c_str());
}

}  // namespace

extern "C" {

const char* oope_last_error(void) { return last_error.c_str(); }

const char* oope_status_name(oope_status s) {
  if (s == OOPE_OK) return "ok";
  if (s < OOPE_E_USAGE || s > OOPE_E_INTERNAL) return "unknown";
  return errc_name(static_cast<Errc>(s)).data();
}

void oope_string_free(char* s) { std::free(s); }

void oope_set_verbosity(int level) {
  const LogLevel min = level >= 2 ? LogLevel::info : level == 1 ? LogLevel::warn : LogLevel::error;
  set_log_sink([min](LogLevel lv, std::string_view msg) {
    if (lv < min) return;
    static std::mutex mu;
    std::lock_guard lock(mu);
    std::cerr << "oope: " << msg << '\n';
  });
}

void oope_params_default(oope_params* p) {
  if (!p) return;
  *p = oope_params{32, 32, 32, nullptr, OOPE_MODE_DET, OOPE_INTEGRITY_OFF};
}

oope_status oope_parse_mode(const char* text, oope_mode* out) {
  return guarded([&] {
    require(out, "out");
    *out = ope::parse_mode(str(text)) == ope::Mode::fh ? OOPE_MODE_FH : OOPE_MODE_DET;
  });
}

oope_status oope_parse_integrity(const char* text, oope_integrity* out) {
  return guarded([&] {
    require(out, "out");
    *out = static_cast<oope_integrity>(integ::parse_scheme(str(text)));
  });
}

oope_status oope_key_generate(int bits, uint64_t seed, int allow_test_sizes, oope_key** out) {
  return guarded([&] {
    require(out, "out");
    Rng rng = app::make_rng(seed, "keygen");
    *out = new oope_key{hom::keygen(bits, rng, {.allow_test_sizes = allow_test_sizes != 0})};
  });
}

oope_status oope_key_load(const char* path, oope_key** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new oope_key{app::load_private_key(path)};
  });
}

oope_status oope_key_save(const oope_key* key, const char* private_path, const char* public_path) {
  return guarded([&] {
    require(key, "key");
    require(private_path, "private_path");
    app::save_private_key(private_path, key->sk);
    if (public_path) app::save_public_key(public_path, key->sk.public_key());
  });
}

oope_status oope_key_id(const oope_key* key, char** out) {
  return guarded([&] {
    require(key, "key");
    require(out, "out");
    *out = dup(to_hex(key->sk.public_key().id()));
  });
}

oope_status oope_public_key_id(const char* public_path, char** out) {
  return guarded([&] {
    require(public_path, "public_path");
    require(out, "out");
    *out = dup(to_hex(app::load_public_key(public_path).id()));
  });
}

void oope_key_free(oope_key* key) { delete key; }

oope_status oope_mac_generate(unsigned p_bits, unsigned q_bits, uint64_t seed, const char* path) {
  return guarded([&] {
    require(path, "path");
    Rng rng = app::make_rng(seed, "mac");
    app::save_mac_params(path, integ::generate_params(p_bits, q_bits, rng));
  });
}

oope_status oope_ingest(const oope_ingest_config* cfg, oope_ingest_result* out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(cfg->csv_path, "csv_path");
    require(cfg->db_dir, "db_dir");
    require(cfg->owner_file, "owner_file");
    require(cfg->public_key, "public_key");
    const auto params = to_params(cfg->params);
    const hom::PublicKey pk = app::load_public_key(cfg->public_key);
    std::optional<integ::MacParams> mac;
    if (params.integrity != integ::Scheme::off) {
      if (!cfg->mac_path) fail(Errc::config, "integrity needs the group parameter file");
      mac = app::load_mac_params(cfg->mac_path);
    }
    store::IngestOptions o;
    o.ope_columns = split_list(cfg->ope_columns);
    o.mode = params.mode;
    o.l = params.l;
    o.M = params.M;
    o.balance_tree = cfg->balance_tree != 0;
    o.integrity = params.integrity;
    o.params = mac ? &*mac : nullptr;
    Rng rng = app::make_rng(cfg->seed, "ingest");
    auto res = store::ingest_file(cfg->csv_path, pk, o, rng);
    store::save_database(cfg->db_dir, res.db);
    store::save_owner(cfg->owner_file, res.owner);
    if (out) *out = oope_ingest_result{res.db.rows.size(), res.rebalances};
  });
}

oope_status oope_csp_create(const oope_csp_config* cfg, oope_csp** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    require(cfg->db_dir, "db_dir");
    require(cfg->do_public_key, "do_public_key");
    app::CspServerConfig c;
    c.params = to_params(cfg->params);
    if (cfg->listen) c.listen = cfg->listen;
    c.db_dir = cfg->db_dir;
    c.do_pk = app::load_public_key(cfg->do_public_key);
    c.allow_rebalance = cfg->allow_rebalance != 0;
    c.seed = cfg->seed;
    if (cfg->idle_timeout_ms) c.da_idle_timeout = net::Millis(cfg->idle_timeout_ms);
    *out = new oope_csp{std::make_unique<app::CspServer>(std::move(c))};
  });
}

uint16_t oope_csp_port(const oope_csp* csp) { return csp ? csp->server->port() : 0; }

oope_status oope_csp_run(oope_csp* csp) {
  return guarded([&] {
    require(csp, "csp");
    csp->server->run();
  });
}

void oope_csp_stop(oope_csp* csp) {
  if (csp) csp->server->stop();
}

void oope_csp_free(oope_csp* csp) { delete csp; }

oope_status oope_do_create(const oope_do_config* cfg, oope_do** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    require(cfg->key, "key");
    app::DoDaemonConfig c;
    c.params = to_params(cfg->params);
    if (cfg->listen) c.listen = cfg->listen;
    if (cfg->csp) c.csp = cfg->csp;
    if (cfg->owner_file) c.owner_file = cfg->owner_file;
    c.seed = cfg->seed;
    if (cfg->connect_timeout_ms) c.connect_timeout = net::Millis(cfg->connect_timeout_ms);
    std::optional<integ::MacParams> mac;
    if (c.params.integrity != integ::Scheme::off) {
      if (!cfg->mac_path) fail(Errc::config, "integrity needs the group parameter file");
      mac = app::load_mac_params(cfg->mac_path);
    }
    *out = new oope_do{std::make_unique<app::DoDaemon>(std::move(c), cfg->key->sk, std::move(mac))};
  });
}

uint16_t oope_do_port(const oope_do* d) { return d ? d->daemon->port() : 0; }

oope_status oope_do_run(oope_do* d) {
  return guarded([&] {
    require(d, "do");
    d->daemon->run();
  });
}

void oope_do_stop(oope_do* d) {
  if (d) d->daemon->stop();
}

void oope_do_free(oope_do* d) { delete d; }

oope_status oope_da_connect(const oope_da_config* cfg, oope_da** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    app::DaConnectConfig c;
    c.params = to_params(cfg->params);
    if (cfg->csp) c.csp = cfg->csp;
    if (cfg->do_addr) c.do_addr = cfg->do_addr;
    c.seed = cfg->seed;
    if (cfg->connect_timeout_ms) c.connect_timeout = net::Millis(cfg->connect_timeout_ms);
    if (cfg->io_timeout_ms) c.io_timeout = net::Millis(cfg->io_timeout_ms);
    if (cfg->expect_do_key) c.expect_do_key = app::load_public_key(cfg->expect_do_key).id();
    if (c.params.mode == ope::Mode::fh && !cfg->da_key) fail(Errc::config, "FH mode needs a DA key");
    *out = new oope_da{std::make_unique<app::DaSession>(std::move(c), cfg->da_key ? &cfg->da_key->sk : nullptr)};
  });
}

oope_status oope_da_encrypt(oope_da* da, const char* column, uint64_t value, oope_encrypt_result* out) {
  return guarded([&] {
    require(da, "da");
    require(column, "column");
    require(out, "out");
    auto e = da->session->client().encrypt(column, value);
    *out = oope_encrypt_result{};
    copy_field(out->order, e.y.to_string());
    if (e.c_min) copy_field(out->c_min, e.c_min->to_string());
    if (e.c_max) copy_field(out->c_max, e.c_max->to_string());
    std::snprintf(out->session, sizeof out->session, "%s", to_hex(e.sid).c_str());
    out->rounds = e.rounds;
    out->height = e.h;
    out->existing = e.existing;
    out->rebalanced = e.rebalanced;
  });
}

oope_status oope_da_query(oope_da* da, const char* where, const char* select, const char* format, char** out) {
  return guarded([&] {
    require(da, "da");
    require(where, "where");
    require(out, "out");
    const std::string fmt = format ? format : "csv";
    if (fmt != "csv" && fmt != "jsonl") fail(Errc::usage, "format must be csv or jsonl");
    const auto cols = split_list(select);
    auto res = store::da_range_query(da->session->client(), da->session->params(), store::parse_where(where),
                                     cols.empty(), cols);
    *out = dup(fmt == "csv" ? store::render_csv(res.result) : store::render_jsonl(res.result));
  });
}

oope_status oope_da_cleanup(oope_da* da, const char* column, const char* sessions, uint64_t* removed) {
  return guarded([&] {
    require(da, "da");
    require(column, "column");
    std::vector<SessionId> sids;
    for (const auto& h : split_list(sessions)) {
      SessionId sid{};
      if (h.size() != 2 * sid.size() || h.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
        fail(Errc::usage, "session id must be 32 hex digits: " + h);
      }
      const Bytes b = from_hex(h);
      std::copy(b.begin(), b.end(), sid.begin());
      sids.push_back(sid);
    }
    const uint64_t n = da->session->client().cleanup(column, sids);
    if (removed) *removed = n;
  });
}

void oope_da_free(oope_da* da) { delete da; }

void oope_bench_default(oope_bench_config* cfg) {
  if (!cfg) return;
  const bench::BenchConfig d;
  *cfg = oope_bench_config{"encrypt", nullptr, 0,  d.trials, d.warmup, d.l, d.k, d.log2m, d.key_bits,
                           0,         OOPE_MODE_DET, OOPE_INTEGRITY_OFF, d.seed, 0};
}

oope_status oope_bench_run(const oope_bench_config* cfg, const char* format, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    const std::string kind = str(cfg->kind);
    const std::string fmt = format ? format : "csv";
    if (fmt != "csv" && fmt != "json") fail(Errc::usage, "format must be csv or json");
    if (kind != "encrypt" && kind != "compare" && kind != "treegen") {
      fail(Errc::usage, "benchmark must be encrypt, compare or treegen");
    }
    bench::BenchConfig b;
    if (cfg->n_db_sizes) b.db_sizes.assign(cfg->db_sizes, cfg->db_sizes + cfg->n_db_sizes);
    b.trials = cfg->trials;
    b.warmup = cfg->warmup;
    b.l = cfg->l;
    b.k = cfg->k;
    b.log2m = cfg->log2m;
    b.key_bits = cfg->key_bits;
    b.tcp = cfg->tcp != 0;
    b.mode = to_mode(cfg->mode);
    b.integrity = to_scheme(cfg->integrity);
    b.seed = cfg->seed;
    bench::check_config(b);

    Rng rng = Rng::from_seed(b.seed, "bench-keys");
    const hom::KeygenOptions ko{.allow_test_sizes = cfg->allow_test_sizes != 0};
    const hom::PrivateKey do_sk = hom::keygen(static_cast<int>(b.key_bits), rng, ko);
    std::optional<hom::PrivateKey> da_sk;
    std::optional<integ::MacParams> mac;
    bench::Keys keys{&do_sk, nullptr, nullptr};
    if (kind != "treegen" && b.mode == ope::Mode::fh) {
      // Only has to be wider than the DO modulus.
      da_sk = hom::keygen(static_cast<int>(b.key_bits) + 64, rng, {.allow_test_sizes = true});
      keys.da_sk = &*da_sk;
    }
    if (kind != "treegen" && b.integrity != integ::Scheme::off) {
      mac = b.key_bits >= 2048 ? integ::generate_params(2048, 256, rng) : integ::generate_params(512, 160, rng);
      keys.mac = &*mac;
    }
    const bench::Report r = kind == "encrypt"   ? bench::bench_encrypt(b, keys)
                            : kind == "compare" ? bench::bench_compare(b, keys)
                                                : bench::bench_treegen(b, keys);
    for (const auto& n : r.notices) log_warn(n);
    *out = dup(fmt == "csv" ? bench::to_csv(r) : bench::to_json(r));
  });
}

}  // extern "C"
