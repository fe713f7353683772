// Operator CLI. Everything goes through the C API in liboope.
#include <oope/oope.h>

#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <sstream>
#include <thread>

namespace {

struct Failure {
  oope_status status;
};

void check(oope_status s) {
  if (s != OOPE_OK) throw Failure{s};
}

// Environment variables win over flags: OOPE_ plus the long name in upper case with
// dashes as underscores, e.g. OOPE_KEY_BITS.
class EnvOverrides {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& name, T& var, const std::string& desc) {
    CLI::Option* opt = app->add_option("--" + name, var, desc);
    std::string env = "OOPE_";
    for (char c : name) env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    // envname lets the variable satisfy required(); apply() then gives it precedence.
    opt->envname(env);
    opt->description(desc + " [env " + env + "]");
    apply_.push_back([env, &var, name] {
      const char* v = std::getenv(env.c_str());
      if (!v) return;
      std::vector<std::string> parts{v};
      if constexpr (CLI::detail::is_mutable_container<T>::value) parts = CLI::detail::split(v, ',');
      if (!CLI::detail::lexical_conversion<T, T>(parts, var)) {
        throw CLI::ConversionError(env, "--" + name);
      }
    });
    return opt;
  }

  void flag(CLI::App* app, const std::string& name, bool& var, const std::string& desc) {
    app->add_flag("--" + name, var, desc);
    std::string env = "OOPE_";
    for (char c : name) env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    apply_.push_back([env, &var] {
      if (const char* v = std::getenv(env.c_str())) var = std::string(v) == "1" || std::string(v) == "true";
    });
  }

  void apply() const {
    for (const auto& f : apply_) f();
  }

 private:
  std::vector<std::function<void()>> apply_;
};

struct Common {
  uint32_t l = 32;
  uint32_t k = 32;
  uint32_t log2m = 0;  // 0: 32 for the services, the smallest admissible value for bench
  std::string max_order;
  std::string mode = "det";
  std::string integrity = "off";
  uint64_t seed = 0;
  std::string out = "csv";
  int verbose = 1;

  oope_params params() const {
    oope_params p;
    oope_params_default(&p);
    p.l = l;
    p.k = k;
    p.log2m = log2m ? log2m : 32;
    p.max_order = max_order.empty() ? nullptr : max_order.c_str();
    check(oope_parse_mode(mode.c_str(), &p.mode));
    check(oope_parse_integrity(integrity.c_str(), &p.integrity));
    return p;
  }
};

struct KeyHandle {
  oope_key* k = nullptr;
  ~KeyHandle() { oope_key_free(k); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  oope_string_free(s);
  return out;
}

// Runs a blocking service on a worker thread; SIGINT or SIGTERM stops it.
void serve_until_signal(const std::function<oope_status()>& run, const std::function<void()>& stop) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  const pthread_t main_thread = pthread_self();
  oope_status status = OOPE_OK;
  std::string error;
  std::thread worker([&] {
    status = run();
    if (status != OOPE_OK) error = oope_last_error();
    pthread_kill(main_thread, SIGTERM);
  });
  int sig = 0;
  sigwait(&set, &sig);
  stop();
  worker.join();
  if (status != OOPE_OK) {
    std::cerr << "oope: " << oope_status_name(status) << ": " << error << '\n';
    throw Failure{status};
  }
}

void print_encrypt(const Common& c, const std::string& column, uint64_t value, const oope_encrypt_result& r,
                   bool minmax) {
  if (c.out == "json") {
    nlohmann::ordered_json j;
    j["column"] = column;
    j["value"] = value;
    j["order"] = r.order;
    if (minmax) {
      j["c_min"] = r.c_min;
      j["c_max"] = r.c_max;
    }
    j["existing"] = r.existing != 0;
    j["rebalanced"] = r.rebalanced != 0;
    j["rounds"] = r.rounds;
    j["height"] = r.height;
    j["session"] = r.session;
    std::cout << j.dump() << '\n';
    return;
  }
  std::cout << "column,value,order," << (minmax ? "c_min,c_max," : "") << "existing,rebalanced,rounds,height,session\n";
  std::cout << column << ',' << value << ',' << r.order << ',';
  if (minmax) std::cout << r.c_min << ',' << r.c_max << ',';
  std::cout << r.existing << ',' << r.rebalanced << ',' << r.rounds << ',' << r.height << ',' << r.session << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oblivious order-preserving encryption: keys, ingestion, services, queries and benchmarks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  EnvOverrides env;
  Common c;

  auto common = [&](CLI::App* sub) {
    env.add(sub, "l", c.l, "plaintext bits");
    env.add(sub, "k", c.k, "statistical blinding bits");
    env.add(sub, "log2m", c.log2m, "M = 2^log2m - 1 (default 32; bench picks the smallest admissible value)");
    env.add(sub, "max-order", c.max_order, "explicit M in decimal, overrides --log2m");
    env.add(sub, "mode", c.mode, "det or fh")->check(CLI::IsMember({"det", "fh"}));
    env.add(sub, "integrity", c.integrity, "off, dlmac or pedersen")
        ->check(CLI::IsMember({"off", "dlmac", "pedersen"}));
    env.add(sub, "seed", c.seed, "RNG seed; 0 uses OS randomness");
    env.add(sub, "out", c.out, "output format")->check(CLI::IsMember({"csv", "json"}));
    env.add(sub, "verbose", c.verbose, "0 quiet, 1 warnings, 2 info");
  };

  // keygen
  auto* keygen = app.add_subcommand("keygen", "generate a Paillier key pair and optionally the integrity group");
  int key_bits = 2048;
  bool allow_test = false;
  std::string key_file = "do.key", pub_file = "do.pub", mac_file;
  unsigned mac_p = 2048, mac_q = 256;
  common(keygen);
  env.add(keygen, "key-bits", key_bits, "modulus size");
  env.flag(keygen, "allow-test-sizes", allow_test, "permit non-standard key sizes");
  env.add(keygen, "key", key_file, "private key file");
  env.add(keygen, "pub", pub_file, "public key file");
  env.add(keygen, "mac", mac_file, "also write integrity group parameters here");
  env.add(keygen, "mac-p-bits", mac_p, "group modulus bits");
  env.add(keygen, "mac-q-bits", mac_q, "subgroup order bits");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "encrypt a CSV file into a CSP database and a DO state file");
  std::string csv, db_dir = "db", owner_file = "owner.bin", ope_columns;
  bool no_balance = false;
  common(ingest);
  env.add(ingest, "csv", csv, "input CSV with a header row")->required();
  env.add(ingest, "db", db_dir, "CSP database directory");
  env.add(ingest, "owner", owner_file, "DO state file");
  env.add(ingest, "pub", pub_file, "DO public key file");
  env.add(ingest, "mac", mac_file, "integrity group parameters");
  env.add(ingest, "ope-columns", ope_columns, "comma separated integer columns to encrypt")->required();
  env.flag(ingest, "no-balance", no_balance, "insert in file order instead of building a balanced tree");

  // serve
  auto* serve = app.add_subcommand("serve", "run the CSP or DO service until interrupted");
  std::string role;
  std::string listen, peer;
  bool no_rebalance = false;
  common(serve);
  serve->add_option("service", role, "csp or do (same as --role)");
  env.add(serve, "role", role, "csp or do");
  env.add(serve, "listen", listen, "host:port to listen on (csp 127.0.0.1:7001, do 127.0.0.1:7002)");
  env.add(serve, "peer", peer, "do: address of the CSP");
  env.add(serve, "db", db_dir, "csp: database directory");
  env.add(serve, "pub", pub_file, "csp: DO public key file");
  env.add(serve, "key", key_file, "do: private key file");
  env.add(serve, "owner", owner_file, "do: state file kept in step with rebalances");
  env.add(serve, "mac", mac_file, "do: integrity group parameters");
  env.flag(serve, "no-rebalance", no_rebalance, "csp: fail insertions that need a rebalance");

  // da
  auto* da = app.add_subcommand("da", "data analyst commands");
  da->require_subcommand(1);
  std::string csp_addr = "127.0.0.1:7001", do_addr = "127.0.0.1:7002", da_key, do_pub, column, where, select;
  std::string sessions;
  uint64_t value = 0;
  auto da_common = [&](CLI::App* sub) {
    common(sub);
    env.add(sub, "csp", csp_addr, "CSP address");
    env.add(sub, "do", do_addr, "DO address");
    env.add(sub, "peer", csp_addr, "alias of --csp");
    env.add(sub, "da-key", da_key, "DA private key, needed in FH mode");
    env.add(sub, "do-pub", do_pub, "refuse a DO whose key differs from this public key");
  };
  auto* da_encrypt = da->add_subcommand("encrypt", "encrypt a value and print its order");
  da_common(da_encrypt);
  env.add(da_encrypt, "column", column, "OPE column")->required();
  env.add(da_encrypt, "value", value, "plaintext value")->required();
  auto* da_minmax = da->add_subcommand("minmax", "FH mode: print c_min and c_max of a value");
  da_common(da_minmax);
  env.add(da_minmax, "column", column, "OPE column")->required();
  env.add(da_minmax, "value", value, "plaintext value")->required();
  auto* da_query = da->add_subcommand("query", "run a range query on plaintext bounds");
  da_common(da_query);
  env.add(da_query, "where", where, "conjunction such as \"X1<32 AND X2>=5\"")->required();
  env.add(da_query, "select", select, "comma separated plain columns; COUNT when absent");
  auto* cleanup = app.add_subcommand("cleanup", "remove entries a DA inserted, by session id");
  da_common(cleanup);
  env.add(cleanup, "column", column, "OPE column")->required();
  env.add(cleanup, "sessions", sessions, "comma separated session ids printed by da encrypt")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "run a benchmark and print a report");
  std::string kind;
  std::vector<uint64_t> sizes;
  uint32_t trials = 100, warmup = 1;
  bool tcp = false;
  common(bench);
  bench->add_option("kind", kind, "encrypt, compare or treegen")
      ->required()
      ->check(CLI::IsMember({"encrypt", "compare", "treegen"}));
  env.add(bench, "db-sizes", sizes, "database sizes (default 100 to 1000000)")->delimiter(',');
  env.add(bench, "trials", trials, "sessions per size");
  env.add(bench, "warmup", warmup, "leading trials left out of the means");
  env.add(bench, "key-bits", key_bits, "modulus size");
  env.flag(bench, "tcp", tcp, "TCP loopback instead of in-process pipes");
  env.flag(bench, "allow-test-sizes", allow_test, "permit non-standard key sizes");

  try {
    app.parse(argc, argv);
    env.apply();
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  oope_set_verbosity(c.verbose);

  try {
    if (*keygen) {
      KeyHandle key;
      check(oope_key_generate(key_bits, c.seed, allow_test, &key.k));
      check(oope_key_save(key.k, key_file.c_str(), pub_file.c_str()));
      char* id = nullptr;
      check(oope_key_id(key.k, &id));
      std::cout << "key " << take(id) << '\n';
      if (!mac_file.empty()) check(oope_mac_generate(mac_p, mac_q, c.seed, mac_file.c_str()));
    } else if (*ingest) {
      oope_ingest_config ic{};
      ic.csv_path = csv.c_str();
      ic.db_dir = db_dir.c_str();
      ic.owner_file = owner_file.c_str();
      ic.public_key = pub_file.c_str();
      ic.mac_path = mac_file.empty() ? nullptr : mac_file.c_str();
      ic.ope_columns = ope_columns.c_str();
      ic.params = c.params();
      ic.balance_tree = !no_balance;
      ic.seed = c.seed;
      oope_ingest_result r{};
      check(oope_ingest(&ic, &r));
      std::cout << "rows " << r.rows << "\nrebalances " << r.rebalances << '\n';
    } else if (*serve) {
      if (role == "csp") {
        oope_csp_config cc{};
        cc.listen = listen.empty() ? "127.0.0.1:7001" : listen.c_str();
        cc.db_dir = db_dir.c_str();
        cc.do_public_key = pub_file.c_str();
        cc.params = c.params();
        cc.allow_rebalance = !no_rebalance;
        cc.seed = c.seed;
        oope_csp* csp = nullptr;
        check(oope_csp_create(&cc, &csp));
        std::unique_ptr<oope_csp, void (*)(oope_csp*)> guard(csp, oope_csp_free);
        std::cout << "csp listening on port " << oope_csp_port(csp) << std::endl;
        serve_until_signal([&] { return oope_csp_run(csp); }, [&] { oope_csp_stop(csp); });
      } else if (role == "do") {
        KeyHandle key;
        check(oope_key_load(key_file.c_str(), &key.k));
        oope_do_config dc{};
        dc.listen = listen.empty() ? "127.0.0.1:7002" : listen.c_str();
        dc.csp = peer.empty() ? "127.0.0.1:7001" : peer.c_str();
        dc.key = key.k;
        dc.mac_path = mac_file.empty() ? nullptr : mac_file.c_str();
        dc.owner_file = owner_file.empty() ? nullptr : owner_file.c_str();
        dc.params = c.params();
        dc.seed = c.seed;
        oope_do* d = nullptr;
        check(oope_do_create(&dc, &d));
        std::unique_ptr<oope_do, void (*)(oope_do*)> guard(d, oope_do_free);
        std::cout << "do listening on port " << oope_do_port(d) << std::endl;
        serve_until_signal([&] { return oope_do_run(d); }, [&] { oope_do_stop(d); });
      } else {
        std::cerr << "oope: serve needs a role: csp or do\n";
        return OOPE_E_USAGE;
      }
    } else if (*da || *cleanup) {
      KeyHandle dk;
      if (!da_key.empty()) check(oope_key_load(da_key.c_str(), &dk.k));
      oope_da_config ac{};
      ac.csp = csp_addr.c_str();
      ac.do_addr = do_addr.c_str();
      ac.da_key = dk.k;
      ac.expect_do_key = do_pub.empty() ? nullptr : do_pub.c_str();
      ac.params = c.params();
      ac.seed = c.seed;
      oope_da* session = nullptr;
      check(oope_da_connect(&ac, &session));
      std::unique_ptr<oope_da, void (*)(oope_da*)> guard(session, oope_da_free);
      if (*da_encrypt || *da_minmax) {
        oope_encrypt_result r{};
        check(oope_da_encrypt(session, column.c_str(), value, &r));
        print_encrypt(c, column, value, r, da_minmax->parsed());
      } else if (*da_query) {
        char* out = nullptr;
        check(oope_da_query(session, where.c_str(), select.empty() ? nullptr : select.c_str(),
                            c.out == "json" ? "jsonl" : "csv", &out));
        std::cout << take(out);
      } else {
        uint64_t removed = 0;
        check(oope_da_cleanup(session, column.c_str(), sessions.c_str(), &removed));
        std::cout << "removed " << removed << '\n';
      }
    } else if (*bench) {
      oope_bench_config bc;
      oope_bench_default(&bc);
      bc.kind = kind.c_str();
      bc.db_sizes = sizes.data();
      bc.n_db_sizes = sizes.size();
      bc.trials = trials;
      bc.warmup = warmup;
      bc.l = c.l;
      bc.k = c.k;
      bc.log2m = c.log2m;
      bc.key_bits = static_cast<uint32_t>(key_bits);
      bc.tcp = tcp;
      check(oope_parse_mode(c.mode.c_str(), &bc.mode));
      check(oope_parse_integrity(c.integrity.c_str(), &bc.integrity));
      bc.seed = c.seed ? c.seed : 1;  // benchmarks stay reproducible
      bc.allow_test_sizes = allow_test;
      char* out = nullptr;
      check(oope_bench_run(&bc, c.out.c_str(), &out));
      std::cout << take(out);
    }
  } catch (const Failure& f) {
    if (f.status != OOPE_OK && *oope_last_error()) {
      std::cerr << "oope: " << oope_status_name(f.status) << ": " << oope_last_error() << '\n';
    }
    return f.status;
  }
  return 0;
}
