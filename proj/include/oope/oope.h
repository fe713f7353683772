#ifndef OOPE_OOPE_H
#define OOPE_OOPE_H

/* Oblivious order-preserving encryption: key management, ingestion, the CSP/DO/DA
 * services and the benchmark harness behind a C ABI.
 *
 * Every function returns an oope_status. On failure the calling thread's last
 * error message is set; read it with oope_last_error(). Strings returned through
 * char** out-parameters are owned by the caller and released with oope_string_free().
 * Order values are up to 128 bits wide and travel as decimal strings. */

#include <stddef.h>
#include <stdint.h>

#if defined(OOPE_BUILDING)
#define OOPE_API __attribute__((visibility("default")))
#else
#define OOPE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum oope_status {
  OOPE_OK = 0,
  OOPE_E_USAGE = 1,
  OOPE_E_DOMAIN = 2,
  OOPE_E_CONFIG = 3,
  OOPE_E_PROTOCOL = 4,
  OOPE_E_INTEGRITY = 5,
  OOPE_E_HANDSHAKE = 6,
  OOPE_E_IO = 7,
  OOPE_E_CAPACITY = 8,
  OOPE_E_RETRYABLE = 9,
  OOPE_E_ABORTED = 10,
  OOPE_E_FRAMING = 11,
  OOPE_E_INTERNAL = 12
} oope_status;

typedef enum oope_mode { OOPE_MODE_DET = 0, OOPE_MODE_FH = 1 } oope_mode;

typedef enum oope_integrity {
  OOPE_INTEGRITY_OFF = 0,
  OOPE_INTEGRITY_DLMAC = 1,
  OOPE_INTEGRITY_PEDERSEN = 2
} oope_integrity;

OOPE_API const char* oope_last_error(void);
OOPE_API const char* oope_status_name(oope_status s);
OOPE_API void oope_string_free(char* s);
/* 0 quiet, 1 warnings, 2 info. Log lines go to stderr. */
OOPE_API void oope_set_verbosity(int level);

/* Protocol parameters. All parties of one deployment must agree on them. */
typedef struct oope_params {
  uint32_t l;            /* plaintext bits */
  uint32_t k;            /* statistical blinding bits */
  uint32_t log2m;        /* M = 2^log2m - 1 */
  const char* max_order; /* decimal M; overrides log2m when not NULL */
  oope_mode mode;
  oope_integrity integrity;
} oope_params;

/* l = 32, k = 32, log2m = 32, deterministic, integrity off. */
OOPE_API void oope_params_default(oope_params* p);
OOPE_API oope_status oope_parse_mode(const char* text, oope_mode* out);
OOPE_API oope_status oope_parse_integrity(const char* text, oope_integrity* out);

/* Paillier private key. */
typedef struct oope_key oope_key;

/* seed 0 draws from the OS. Sizes other than 1024/2048/3072/4096 need allow_test_sizes. */
OOPE_API oope_status oope_key_generate(int bits, uint64_t seed, int allow_test_sizes, oope_key** out);
OOPE_API oope_status oope_key_load(const char* path, oope_key** out);
/* Writes the private key (mode 0600) and, when public_path is not NULL, the public key. */
OOPE_API oope_status oope_key_save(const oope_key* key, const char* private_path, const char* public_path);
/* Hex fingerprint of the public key. */
OOPE_API oope_status oope_key_id(const oope_key* key, char** out);
OOPE_API oope_status oope_public_key_id(const char* public_path, char** out);
OOPE_API void oope_key_free(oope_key* key);

/* Group for the integrity schemes, generated by the DO. */
OOPE_API oope_status oope_mac_generate(unsigned p_bits, unsigned q_bits, uint64_t seed, const char* path);

typedef struct oope_ingest_config {
  const char* csv_path;
  const char* db_dir;        /* CSP database directory */
  const char* owner_file;    /* DO state */
  const char* public_key;    /* DO public (or private) key file */
  const char* mac_path;      /* required when integrity is on */
  const char* ope_columns;   /* comma separated */
  oope_params params;
  int balance_tree;
  uint64_t seed;
} oope_ingest_config;

typedef struct oope_ingest_result {
  uint64_t rows;
  uint64_t rebalances;
} oope_ingest_result;

OOPE_API oope_status oope_ingest(const oope_ingest_config* cfg, oope_ingest_result* out);

/* CSP service. The DO and the DAs connect to the same address. */
typedef struct oope_csp oope_csp;

typedef struct oope_csp_config {
  const char* listen; /* host:port; port 0 picks one */
  const char* db_dir;
  const char* do_public_key;
  oope_params params;
  int allow_rebalance;
  uint64_t seed;
  uint32_t idle_timeout_ms; /* DA connections; 0 keeps the default */
} oope_csp_config;

OOPE_API oope_status oope_csp_create(const oope_csp_config* cfg, oope_csp** out);
OOPE_API uint16_t oope_csp_port(const oope_csp* csp);
/* Blocks until oope_csp_stop() is called from another thread. */
OOPE_API oope_status oope_csp_run(oope_csp* csp);
OOPE_API void oope_csp_stop(oope_csp* csp);
OOPE_API void oope_csp_free(oope_csp* csp);

/* DO service: dials the CSP and accepts DA links. */
typedef struct oope_do oope_do;

typedef struct oope_do_config {
  const char* listen;
  const char* csp;
  const oope_key* key;
  const char* mac_path;   /* NULL when integrity is off */
  const char* owner_file; /* NULL to skip following rebalances */
  oope_params params;
  uint64_t seed;
  uint32_t connect_timeout_ms;
} oope_do_config;

OOPE_API oope_status oope_do_create(const oope_do_config* cfg, oope_do** out);
OOPE_API uint16_t oope_do_port(const oope_do* d);
/* Blocks until the CSP link closes or oope_do_stop() is called. */
OOPE_API oope_status oope_do_run(oope_do* d);
OOPE_API void oope_do_stop(oope_do* d);
OOPE_API void oope_do_free(oope_do* d);

/* DA connection to both services. */
typedef struct oope_da oope_da;

typedef struct oope_da_config {
  const char* csp;
  const char* do_addr;
  const oope_key* da_key;        /* required in FH mode; wider than the DO key */
  const char* expect_do_key;     /* public key file; NULL accepts any DO */
  oope_params params;
  uint64_t seed;
  uint32_t connect_timeout_ms;
  uint32_t io_timeout_ms;
} oope_da_config;

typedef struct oope_encrypt_result {
  char order[40];
  char c_min[40]; /* FH mode; empty otherwise */
  char c_max[40];
  char session[33]; /* hex id, names the inserted entry for cleanup */
  uint32_t rounds;
  uint32_t height;
  int existing;
  int rebalanced;
} oope_encrypt_result;

OOPE_API oope_status oope_da_connect(const oope_da_config* cfg, oope_da** out);
OOPE_API oope_status oope_da_encrypt(oope_da* da, const char* column, uint64_t value, oope_encrypt_result* out);
/* where: e.g. "X1<32 AND X2>=5". select: comma separated plain columns, or NULL for
 * COUNT. format: "csv" or "jsonl". Temporary bound entries are removed afterwards. */
OOPE_API oope_status oope_da_query(oope_da* da, const char* where, const char* select, const char* format,
                                   char** out);
/* sessions: comma separated hex ids from oope_encrypt_result.session. */
OOPE_API oope_status oope_da_cleanup(oope_da* da, const char* column, const char* sessions, uint64_t* removed);
OOPE_API void oope_da_free(oope_da* da);

typedef struct oope_bench_config {
  const char* kind; /* "encrypt", "compare" or "treegen" */
  const uint64_t* db_sizes;
  size_t n_db_sizes; /* 0 keeps the default sizes */
  uint32_t trials;
  uint32_t warmup;
  uint32_t l;
  uint32_t k;
  uint32_t log2m; /* 0 picks the smallest admissible value */
  uint32_t key_bits;
  int tcp;
  oope_mode mode;
  oope_integrity integrity;
  uint64_t seed;
  int allow_test_sizes;
} oope_bench_config;

OOPE_API void oope_bench_default(oope_bench_config* cfg);
/* format: "csv" or "json". */
OOPE_API oope_status oope_bench_run(const oope_bench_config* cfg, const char* format, char** out);

#ifdef __cplusplus
}
#endif

#endif
