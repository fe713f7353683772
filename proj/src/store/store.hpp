#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "ope/persist.hpp"
#include "ope/state.hpp"

namespace oope::store {

enum class ColumnKind : uint8_t { plain = 0, ope = 1 };

struct ColumnDef {
  std::string name;
  ColumnKind kind = ColumnKind::plain;
};

// OPE columns hold orders only; their plaintexts stay with the DO.
struct Row {
  uint64_t id = 0;
  std::vector<std::string> plain;  // one per plain column, in column order
  std::vector<Order> orders;       // one per OPE column, in column order
};

// CSP-side database: rows plus the encrypted table of each OPE column.
struct Database {
  std::vector<ColumnDef> columns;
  std::vector<Row> rows;
  std::map<std::string, ope::ServerState> tables;
  // Key and integrity layout of each table file, so the CSP can rewrite them.
  std::map<std::string, ope::TableHeader> headers;

  int index_of(std::string_view column) const;  // -1 when absent
  const ColumnDef& column(std::string_view name) const;
  // Position of the column within Row::plain or Row::orders.
  size_t slot(std::string_view column) const;
  std::vector<std::string> ope_columns() const;

  // Rewrites the stored orders of a column after a rebalance.
  void apply_remap(std::string_view column, const ope::Remap& remap);
};

// Owner-side state for every OPE column.
struct OwnerFile {
  std::map<std::string, ope::OwnerState> columns;
};

struct IngestOptions {
  std::vector<std::string> ope_columns;
  ope::Mode mode = ope::Mode::det;
  uint32_t l = 32;
  Order M = ope::max_order_from_log2(32);
  bool balance_tree = true;
  integ::Scheme integrity = integ::Scheme::off;
  const integ::MacParams* params = nullptr;
  hom::RandomnessPool* pool = nullptr;
};

struct IngestResult {
  Database db;
  OwnerFile owner;
  size_t rebalances = 0;
};

// Usage error on a duplicate or unsafe header name, a ragged row or an unknown OPE
// column; domain error on a non-integer OPE value or one that needs more than l bits.
// Empty input gives an empty database (OPE columns still need a header naming them).
IngestResult ingest_csv(std::string_view text, const hom::PublicKey& pk, const IngestOptions& opts, Rng& rng);
IngestResult ingest_file(const std::filesystem::path& csv, const hom::PublicKey& pk, const IngestOptions& opts,
                         Rng& rng);

// Column names become file names, so they are limited to [A-Za-z0-9_-].
bool valid_column_name(std::string_view name);

// Directory layout: rows.bin plus <column>.tbl per OPE column. Files are written to
// a temporary name and renamed into place.
void save_database(const std::filesystem::path& dir, const Database& db);
// Rewrites rows.bin only.
void save_rows(const std::filesystem::path& dir, const Database& db);
// Rewrites one column's table file only.
void save_column(const std::filesystem::path& dir, const Database& db, std::string_view column);
// Io error on a missing file or checksum mismatch.
Database load_database(const std::filesystem::path& dir);

void save_owner(const std::filesystem::path& file, const OwnerFile& owner);
OwnerFile load_owner(const std::filesystem::path& file);

// Inclusive order interval on one OPE column. lo > hi selects nothing.
struct OrderRange {
  std::string column;
  Order lo;
  Order hi;
};

struct RangeQuery {
  std::vector<OrderRange> where;  // conjunction
  bool count = true;
  std::vector<std::string> select;  // plain columns, used when count is false
};

struct QueryResult {
  uint64_t count = 0;
  std::vector<std::string> header;  // empty for COUNT
  std::vector<std::vector<std::string>> rows;
};

// Order comparisons only. Usage error on an unknown or non-OPE predicate column and
// on projecting a non-plain column.
QueryResult exec_range(const Database& db, const RangeQuery& q);

Bytes encode(const RangeQuery& q);
RangeQuery decode_query(std::span<const uint8_t> data);
Bytes encode(const QueryResult& r);
QueryResult decode_result(std::span<const uint8_t> data);

std::string render_csv(const QueryResult& r);
// One JSON object per line: {"count": n} or one object per projected row.
std::string render_jsonl(const QueryResult& r);

// Plaintext predicate as the DA writes it, e.g. "X1<32".
enum class Cmp { lt, le, gt, ge, eq };

struct ValuePredicate {
  std::string column;
  Cmp op = Cmp::lt;
  uint64_t value = 0;
};

// Conjunction joined by AND (case-insensitive); operators <, <=, >, >=, =.
std::vector<ValuePredicate> parse_where(std::string_view text);

// Orders the DA obtained for the predicate bound. Deterministic mode: c_min = c_max =
// the encrypted order.
struct BoundOrders {
  Order c_min;
  Order c_max;
};

OrderRange to_range(const ValuePredicate& p, const BoundOrders& b, Order M);

// Serializes access to the rows: queries share, remaps are exclusive.
class Store {
 public:
  explicit Store(Database db) : db_(std::move(db)) {}

  QueryResult query(const RangeQuery& q) const;
  void apply_remap(std::string_view column, const ope::Remap& remap);

  Database& db() { return db_; }
  const Database& db() const { return db_; }
  std::shared_mutex& mutex() const { return mu_; }

 private:
  Database db_;
  mutable std::shared_mutex mu_;
};

}  // namespace oope::store
