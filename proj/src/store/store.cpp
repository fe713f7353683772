#include "store/store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "store/csv.hpp"

namespace oope::store {

namespace {

constexpr char kRowMagic[8] = {'O', 'O', 'P', 'E', 'R', 'O', 'W', '1'};
constexpr char kOwnerMagic[8] = {'O', 'O', 'P', 'E', 'O', 'W', 'N', '1'};
constexpr uint16_t kFileVersion = 1;

uint64_t parse_value(std::string_view s, const std::string& column, size_t line, uint32_t l) {
  uint64_t v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (s.empty() || ec == std::errc::invalid_argument || p != e) {
    fail(Errc::domain, "line " + std::to_string(line) + ": column " + column + " is not a non-negative integer: '" +
                           std::string(s) + "'");
  }
  if (ec == std::errc::result_out_of_range || (l < 64 && v >> l)) {
    fail(Errc::domain,
         "line " + std::to_string(line) + ": column " + column + " value does not fit in " + std::to_string(l) + " bits");
  }
  return v;
}

// Writes through a temporary file so a crash never leaves a half-written file.
void write_file_atomic(const std::filesystem::path& path, const Bytes& data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(Errc::io, "cannot write " + tmp.string());
    os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!os) fail(Errc::io, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(Errc::io, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

void seal(Bytes& body) {
  const Digest d = sha256(body);
  body.insert(body.end(), d.begin(), d.end());
}

// Checks magic, version and trailer; returns the body between header and trailer.
std::span<const uint8_t> unseal(const Bytes& file, const char (&magic)[8], const std::string& what) {
  if (file.size() < 8 + 2 + 32 || !std::equal(magic, magic + 8, file.begin())) {
    fail(Errc::io, what + ": not a valid file");
  }
  std::span<const uint8_t> all(file);
  const auto body = all.first(all.size() - 32);
  const Digest d = sha256(body);
  if (!std::equal(d.begin(), d.end(), all.last(32).begin())) fail(Errc::io, what + ": checksum mismatch");
  ByteReader r(body.subspan(8, 2));
  if (r.u16() != kFileVersion) fail(Errc::io, what + ": unsupported version");
  return body.subspan(10);
}

void write_header(ByteWriter& w, const char (&magic)[8]) {
  w.raw(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(magic), 8));
  w.u16(kFileVersion);
}

std::filesystem::path table_path(const std::filesystem::path& dir, std::string_view column) {
  return dir / (std::string(column) + ".tbl");
}

}  // namespace

int Database::index_of(std::string_view column) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == column) return static_cast<int>(i);
  }
  return -1;
}

const ColumnDef& Database::column(std::string_view name) const {
  const int i = index_of(name);
  if (i < 0) fail(Errc::usage, "unknown column " + std::string(name));
  return columns[i];
}

size_t Database::slot(std::string_view column) const {
  const int i = index_of(column);
  if (i < 0) fail(Errc::usage, "unknown column " + std::string(column));
  size_t s = 0;
  for (int j = 0; j < i; ++j) s += columns[j].kind == columns[i].kind;
  return s;
}

std::vector<std::string> Database::ope_columns() const {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (c.kind == ColumnKind::ope) out.push_back(c.name);
  }
  return out;
}

void Database::apply_remap(std::string_view name, const ope::Remap& remap) {
  if (column(name).kind != ColumnKind::ope) fail(Errc::usage, "remap on a plain column");
  const size_t s = slot(name);
  for (auto& row : rows) row.orders[s] = ope::remap_lookup(remap, row.orders[s]);
}

bool valid_column_name(std::string_view name) {
  if (name.empty() || name.size() > 64) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

IngestResult ingest_csv(std::string_view text, const hom::PublicKey& pk, const IngestOptions& opts, Rng& rng) {
  const std::vector<CsvRecord> recs = parse_csv(text);
  IngestResult out;
  if (recs.empty()) {
    if (!opts.ope_columns.empty()) fail(Errc::usage, "empty input has no column " + opts.ope_columns.front());
    return out;
  }

  Database& db = out.db;
  std::set<std::string> seen;
  for (const auto& name : recs[0]) {
    if (!valid_column_name(name)) fail(Errc::usage, "invalid column name '" + name + "'");
    if (!seen.insert(name).second) fail(Errc::usage, "duplicate column " + name);
    db.columns.push_back({name, ColumnKind::plain});
  }
  for (const auto& name : opts.ope_columns) {
    const int i = db.index_of(name);
    if (i < 0) fail(Errc::usage, "no column " + name + " in the header");
    db.columns[i].kind = ColumnKind::ope;
  }

  const size_t ncols = db.columns.size();
  std::vector<std::vector<uint64_t>> values(ncols);
  for (size_t r = 1; r < recs.size(); ++r) {
    const CsvRecord& rec = recs[r];
    if (rec.size() != ncols) {
      fail(Errc::usage, "line " + std::to_string(r + 1) + ": expected " + std::to_string(ncols) + " fields, got " +
                            std::to_string(rec.size()));
    }
    Row row;
    row.id = r - 1;
    for (size_t c = 0; c < ncols; ++c) {
      if (db.columns[c].kind == ColumnKind::ope) {
        values[c].push_back(parse_value(rec[c], db.columns[c].name, r + 1, opts.l));
      } else {
        row.plain.push_back(rec[c]);
      }
    }
    db.rows.push_back(std::move(row));
  }

  ope::InitOptions io;
  io.mode = opts.mode;
  io.l = opts.l;
  io.M = opts.M;
  io.balance_tree = opts.balance_tree;
  io.integrity = opts.integrity;
  io.params = opts.params;
  io.pool = opts.pool;
  for (size_t c = 0; c < ncols; ++c) {
    if (db.columns[c].kind != ColumnKind::ope) continue;
    const std::string& name = db.columns[c].name;
    ope::InitResult init = ope::init_state(values[c], pk, io, rng);
    out.rebalances += init.rebalances;

    // Row k-th occurrence of x takes the k-th smallest order of x; for deterministic
    // tables every occurrence shares one order.
    std::map<uint64_t, std::vector<Order>> by_value;
    for (const auto& [x, y] : init.owner.pairs()) by_value[x].push_back(y);
    std::map<uint64_t, size_t> used;
    for (size_t r = 0; r < db.rows.size(); ++r) {
      const uint64_t x = values[c][r];
      const auto& ys = by_value.at(x);
      size_t& k = used[x];
      db.rows[r].orders.push_back(opts.mode == ope::Mode::fh ? ys.at(k++) : ys.front());
    }
    db.headers.emplace(name, ope::make_header(init.server.table, pk, opts.integrity, opts.params));
    db.tables.emplace(name, std::move(init.server));
    out.owner.columns.emplace(name, std::move(init.owner));
  }
  return out;
}

IngestResult ingest_file(const std::filesystem::path& csv, const hom::PublicKey& pk, const IngestOptions& opts,
                         Rng& rng) {
  const Bytes data = read_file(csv);
  return ingest_csv(std::string_view(reinterpret_cast<const char*>(data.data()), data.size()), pk, opts, rng);
}

void save_column(const std::filesystem::path& dir, const Database& db, std::string_view column) {
  auto it = db.tables.find(std::string(column));
  auto h = db.headers.find(std::string(column));
  if (it == db.tables.end() || h == db.headers.end()) fail(Errc::usage, "no table for column " + std::string(column));
  std::ostringstream os;
  ope::save_table(os, it->second.table, h->second);
  const std::string s = std::move(os).str();
  write_file_atomic(table_path(dir, column), Bytes(s.begin(), s.end()));
}

void save_database(const std::filesystem::path& dir, const Database& db) {
  std::filesystem::create_directories(dir);
  for (const auto& name : db.ope_columns()) save_column(dir, db, name);
  save_rows(dir, db);
}

void save_rows(const std::filesystem::path& dir, const Database& db) {
  ByteWriter w;
  write_header(w, kRowMagic);
  w.u32(static_cast<uint32_t>(db.columns.size()));
  for (const auto& c : db.columns) {
    w.str(c.name);
    w.u8(static_cast<uint8_t>(c.kind));
  }
  w.u64(db.rows.size());
  for (const auto& row : db.rows) {
    w.u64(row.id);
    for (const auto& s : row.plain) w.str(s);
    for (Order y : row.orders) w.order(y);
  }
  Bytes body = w.take();
  seal(body);
  write_file_atomic(dir / "rows.bin", body);
}

Database load_database(const std::filesystem::path& dir) {
  const Bytes file = read_file(dir / "rows.bin");
  ByteReader r(unseal(file, kRowMagic, "rows.bin"));
  Database db;
  const uint32_t ncols = r.u32();
  size_t nplain = 0, nope = 0;
  for (uint32_t i = 0; i < ncols; ++i) {
    ColumnDef c;
    c.name = r.str();
    const uint8_t kind = r.u8();
    if (kind > 1 || !valid_column_name(c.name)) fail(Errc::io, "rows.bin: bad column definition");
    c.kind = static_cast<ColumnKind>(kind);
    (c.kind == ColumnKind::ope ? nope : nplain)++;
    db.columns.push_back(std::move(c));
  }
  const uint64_t nrows = r.u64();
  for (uint64_t i = 0; i < nrows; ++i) {
    Row row;
    row.id = r.u64();
    for (size_t j = 0; j < nplain; ++j) row.plain.push_back(r.str());
    for (size_t j = 0; j < nope; ++j) row.orders.push_back(r.order());
    db.rows.push_back(std::move(row));
  }
  r.expect_done("rows.bin");

  for (const auto& name : db.ope_columns()) {
    std::ifstream is(table_path(dir, name), std::ios::binary);
    if (!is) fail(Errc::io, "missing table file for column " + name);
    ope::TableHeader h;
    db.tables.emplace(name, ope::load_server_state(is, &h));
    db.headers.emplace(name, h);
  }
  return db;
}

void save_owner(const std::filesystem::path& file, const OwnerFile& owner) {
  ByteWriter w;
  write_header(w, kOwnerMagic);
  w.u32(static_cast<uint32_t>(owner.columns.size()));
  for (const auto& [name, st] : owner.columns) {
    w.str(name);
    w.u8(static_cast<uint8_t>(st.mode()));
    w.u64(st.size());
    for (const auto& [x, y] : st.pairs()) {
      w.u64(x);
      w.order(y);
    }
  }
  Bytes body = w.take();
  seal(body);
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  write_file_atomic(file, body);
}

OwnerFile load_owner(const std::filesystem::path& file) {
  const Bytes data = read_file(file);
  ByteReader r(unseal(data, kOwnerMagic, file.filename().string()));
  OwnerFile out;
  const uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    const uint8_t mode = r.u8();
    if (mode > 1) fail(Errc::io, "owner file: bad mode");
    ope::OwnerState st(static_cast<ope::Mode>(mode));
    const uint64_t count = r.u64();
    for (uint64_t j = 0; j < count; ++j) {
      const uint64_t x = r.u64();
      st.add(x, r.order());
    }
    out.columns.emplace(std::move(name), std::move(st));
  }
  r.expect_done("owner file");
  return out;
}

QueryResult exec_range(const Database& db, const RangeQuery& q) {
  struct Pred {
    size_t slot;
    Order lo, hi;
  };
  std::vector<Pred> preds;
  for (const auto& p : q.where) {
    if (db.column(p.column).kind != ColumnKind::ope) fail(Errc::usage, "column " + p.column + " is not encrypted");
    preds.push_back({db.slot(p.column), p.lo, p.hi});
  }
  std::vector<size_t> proj;
  QueryResult out;
  if (!q.count) {
    for (const auto& name : q.select) {
      if (db.column(name).kind != ColumnKind::plain) fail(Errc::usage, "cannot project encrypted column " + name);
      proj.push_back(db.slot(name));
      out.header.push_back(name);
    }
  }
  for (const auto& row : db.rows) {
    bool ok = true;
    for (const auto& p : preds) {
      const Order y = row.orders[p.slot];
      if (y < p.lo || y > p.hi) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    ++out.count;
    if (!q.count) {
      std::vector<std::string> vals;
      for (size_t s : proj) vals.push_back(row.plain[s]);
      out.rows.push_back(std::move(vals));
    }
  }
  return out;
}

Bytes encode(const RangeQuery& q) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(q.where.size()));
  for (const auto& p : q.where) {
    w.str(p.column);
    w.order(p.lo);
    w.order(p.hi);
  }
  w.u8(q.count ? 1 : 0);
  w.u32(static_cast<uint32_t>(q.select.size()));
  for (const auto& s : q.select) w.str(s);
  return w.take();
}

RangeQuery decode_query(std::span<const uint8_t> data) {
  ByteReader r(data);
  RangeQuery q;
  const uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    OrderRange p;
    p.column = r.str();
    p.lo = r.order();
    p.hi = r.order();
    q.where.push_back(std::move(p));
  }
  const uint8_t c = r.u8();
  if (c > 1) fail(Errc::protocol, "malformed query");
  q.count = c == 1;
  const uint32_t m = r.u32();
  for (uint32_t i = 0; i < m; ++i) q.select.push_back(r.str());
  r.expect_done("query");
  return q;
}

Bytes encode(const QueryResult& res) {
  ByteWriter w;
  w.u64(res.count);
  w.u32(static_cast<uint32_t>(res.header.size()));
  for (const auto& h : res.header) w.str(h);
  w.u64(res.rows.size());
  for (const auto& row : res.rows) {
    for (const auto& v : row) w.str(v);
  }
  return w.take();
}

QueryResult decode_result(std::span<const uint8_t> data) {
  ByteReader r(data);
  QueryResult res;
  res.count = r.u64();
  const uint32_t nh = r.u32();
  for (uint32_t i = 0; i < nh; ++i) res.header.push_back(r.str());
  const uint64_t nr = r.u64();
  if (nh == 0 && nr) fail(Errc::protocol, "malformed query result");
  for (uint64_t i = 0; i < nr; ++i) {
    std::vector<std::string> row;
    for (uint32_t j = 0; j < nh; ++j) row.push_back(r.str());
    res.rows.push_back(std::move(row));
  }
  r.expect_done("query result");
  return res;
}

std::string render_csv(const QueryResult& r) {
  std::string out;
  if (r.header.empty()) return "count\n" + std::to_string(r.count) + "\n";
  auto line = [&](const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_field(fields[i]);
    }
    out += '\n';
  };
  line(r.header);
  for (const auto& row : r.rows) line(row);
  return out;
}

std::string render_jsonl(const QueryResult& r) {
  if (r.header.empty()) return nlohmann::json{{"count", r.count}}.dump() + "\n";
  std::string out;
  for (const auto& row : r.rows) {
    nlohmann::ordered_json j;
    for (size_t i = 0; i < r.header.size(); ++i) j[r.header[i]] = row[i];
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ValuePredicate> parse_where(std::string_view text) {
  std::vector<ValuePredicate> out;
  std::string upper(text);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  size_t pos = 0;
  for (;;) {
    size_t next = upper.find(" AND ", pos);
    std::string_view part = text.substr(pos, next == std::string::npos ? std::string_view::npos : next - pos);
    auto trim = [](std::string_view s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
      return s;
    };
    part = trim(part);
    const size_t op_at = part.find_first_of("<>=");
    if (op_at == std::string_view::npos || op_at == 0) fail(Errc::usage, "bad predicate '" + std::string(part) + "'");
    ValuePredicate p;
    p.column = std::string(trim(part.substr(0, op_at)));
    size_t op_len = 1;
    const bool eq_next = op_at + 1 < part.size() && part[op_at + 1] == '=';
    switch (part[op_at]) {
      case '<':
        p.op = eq_next ? Cmp::le : Cmp::lt;
        op_len += eq_next;
        break;
      case '>':
        p.op = eq_next ? Cmp::ge : Cmp::gt;
        op_len += eq_next;
        break;
      default:
        p.op = Cmp::eq;
    }
    const std::string_view num = trim(part.substr(op_at + op_len));
    auto [end, ec] = std::from_chars(num.data(), num.data() + num.size(), p.value);
    if (num.empty() || ec != std::errc() || end != num.data() + num.size()) {
      fail(Errc::usage, "bad predicate value '" + std::string(num) + "'");
    }
    out.push_back(std::move(p));
    if (next == std::string::npos) break;
    pos = next + 5;
  }
  return out;
}

OrderRange to_range(const ValuePredicate& p, const BoundOrders& b, Order M) {
  OrderRange r;
  r.column = p.column;
  const Order zero(0);
  // Empty interval for "< smallest possible order".
  const auto below = [&](Order y) { return y.value() == 0 ? std::pair{Order(1), zero} : std::pair{zero, Order(y.value() - 1)}; };
  switch (p.op) {
    case Cmp::lt:
      std::tie(r.lo, r.hi) = below(b.c_min);
      break;
    case Cmp::le:
      r.lo = zero;
      r.hi = b.c_max;
      break;
    case Cmp::gt:
      r.lo = Order(b.c_max.value() + 1);
      r.hi = M;
      break;
    case Cmp::ge:
      r.lo = b.c_min;
      r.hi = M;
      break;
    case Cmp::eq:
      r.lo = b.c_min;
      r.hi = b.c_max;
      break;
  }
  return r;
}

QueryResult Store::query(const RangeQuery& q) const {
  std::shared_lock lock(mu_);
  return exec_range(db_, q);
}

void Store::apply_remap(std::string_view column, const ope::Remap& remap) {
  std::unique_lock lock(mu_);
  db_.apply_remap(column, remap);
}

}  // namespace oope::store
