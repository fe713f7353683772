#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "oracle.hpp"
#include "proto/cluster.hpp"
#include "store/bridge.hpp"
#include "store/csv.hpp"
#include "support.hpp"

using namespace oope;
using namespace oope::store;
using oope::testing::da_key576;
using oope::testing::do_key512;

namespace {

const hom::PublicKey& pk() { return do_key512().public_key(); }

IngestOptions opts(std::vector<std::string> cols, Order M, ope::Mode mode = ope::Mode::det, uint32_t l = 32) {
  IngestOptions o;
  o.ope_columns = std::move(cols);
  o.M = M;
  o.mode = mode;
  o.l = l;
  return o;
}

proto::ProtocolParams params_for(const IngestOptions& o) {
  proto::ProtocolParams p;
  p.l = o.l;
  p.k = 32;
  p.M = o.M;
  p.mode = o.mode;
  return p;
}

// Example 1 rows in insertion order.
const char* kExample1 = "name,X1\nalice,32\nbob,20\ncarol,25\ndave,69\nerin,10\n";

IngestResult example1() {
  Rng rng = Rng::from_seed(1, "store");
  IngestOptions o = opts({"X1"}, Order(28));
  o.balance_tree = false;
  return ingest_csv(kExample1, pk(), o, rng);
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("oope_store_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

Bytes table_bytes(const ope::ServerState& st) {
  std::ostringstream os;
  ope::save_table(os, st.table, pk(), integ::Scheme::off, nullptr);
  const std::string s = os.str();
  return Bytes(s.begin(), s.end());
}

// Plaintext of each stored order, read with the DO key.
std::map<Order, uint64_t> decrypt_orders(const ope::ServerState& st) {
  std::map<Order, uint64_t> out;
  for (const auto& [y, e] : st.table.entries()) out[y] = oope::testing::plain(do_key512(), e);
  return out;
}

uint64_t count_if_plain(const std::vector<uint64_t>& xs, const ValuePredicate& p) {
  return std::count_if(xs.begin(), xs.end(), [&](uint64_t x) {
    switch (p.op) {
      case Cmp::lt: return x < p.value;
      case Cmp::le: return x <= p.value;
      case Cmp::gt: return x > p.value;
      case Cmp::ge: return x >= p.value;
      case Cmp::eq: return x == p.value;
    }
    return false;
  });
}

std::string csv_of(const std::string& col, const std::vector<uint64_t>& xs) {
  std::string s = "id," + col + "\n";
  for (size_t i = 0; i < xs.size(); ++i) s += "r" + std::to_string(i) + "," + std::to_string(xs[i]) + "\n";
  return s;
}

}  // namespace

TEST(Csv, QuotedFieldsAndLineEnds) {
  auto r = parse_csv("a,\"b,c\",\"say \"\"hi\"\"\"\r\n1,\"multi\nline\",\r\n");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0], (CsvRecord{"a", "b,c", "say \"hi\""}));
  EXPECT_EQ(r[1], (CsvRecord{"1", "multi\nline", ""}));
}

TEST(Csv, NoTrailingNewline) {
  auto r = parse_csv("x,y\n1,2");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1], (CsvRecord{"1", "2"}));
  EXPECT_TRUE(parse_csv("").empty());
}

TEST(Csv, MalformedQuotes) {
  EXPECT_THROW(parse_csv("a,\"open\n"), Error);
  EXPECT_THROW(parse_csv("a,\"x\"y\n"), Error);
}

TEST(Csv, FieldQuotingRoundTrips) {
  for (std::string s : {"plain", "a,b", "q\"uote", "line\nbreak", ""}) {
    auto r = parse_csv(csv_field(s) + "\n");
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].at(0), s);
  }
}

TEST(Ingest, Example1Orders) {
  auto res = example1();
  const Database& db = res.db;
  ASSERT_EQ(db.rows.size(), 5u);
  const std::vector<Order> want = {Order(14), Order(7), Order(11), Order(21), Order(4)};
  for (size_t i = 0; i < 5; ++i) EXPECT_EQ(db.rows[i].orders.at(0), want[i]) << "row " << i;
  EXPECT_EQ(db.rows[2].plain.at(0), "carol");
  EXPECT_EQ(res.owner.columns.at("X1").order_of(32), Order(14));
  EXPECT_EQ(db.tables.at("X1").table.size(), 5u);
}

TEST(Ingest, EmptyFileIsValid) {
  Rng rng = Rng::from_seed(2, "store");
  auto res = ingest_csv("", pk(), opts({}, Order(28)), rng);
  EXPECT_TRUE(res.db.columns.empty());
  EXPECT_TRUE(res.db.rows.empty());
  EXPECT_TRUE(res.db.tables.empty());
}

TEST(Ingest, HeaderOnlyGivesEmptyTable) {
  Rng rng = Rng::from_seed(3, "store");
  auto res = ingest_csv("id,X1\n", pk(), opts({"X1"}, Order(28)), rng);
  EXPECT_TRUE(res.db.rows.empty());
  EXPECT_TRUE(res.db.tables.at("X1").table.empty());
}

TEST(Ingest, Errors) {
  Rng rng = Rng::from_seed(4, "store");
  auto code = [&](const char* csv, IngestOptions o) {
    try {
      ingest_csv(csv, pk(), o, rng);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::internal;
  };
  const IngestOptions o = opts({"X1"}, Order(1 << 20), ope::Mode::det, 8);
  EXPECT_EQ(code("X1,X1\n1,2\n", o), Errc::usage);
  EXPECT_EQ(code("id,X1\na,1.5\n", o), Errc::domain);
  EXPECT_EQ(code("id,X1\na,-3\n", o), Errc::domain);
  EXPECT_EQ(code("id,X1\na,\n", o), Errc::domain);
  EXPECT_EQ(code("id,X1\na,256\n", o), Errc::domain);
  EXPECT_EQ(code("id,X1\na,99999999999999999999\n", o), Errc::domain);
  EXPECT_EQ(code("id,X1\na\n", o), Errc::usage);
  EXPECT_EQ(code("id,X2\na,1\n", o), Errc::usage);
  EXPECT_EQ(code("id,\"bad name\"\na,1\n", opts({}, Order(28))), Errc::usage);
}

TEST(Ingest, TenThousandRowsSortLikePlaintext) {
  Rng rng = Rng::from_seed(5, "store-10k");
  std::vector<uint64_t> xs(10000);
  for (auto& x : xs) x = rng.below(1u << 20);
  auto res = ingest_csv(csv_of("X", xs), pk(), opts({"X"}, ope::max_order_from_log2(48)), rng);
  ASSERT_EQ(res.db.rows.size(), xs.size());

  std::vector<size_t> idx(xs.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto by_order = idx, by_plain = idx;
  std::stable_sort(by_order.begin(), by_order.end(),
                   [&](size_t a, size_t b) { return res.db.rows[a].orders[0] < res.db.rows[b].orders[0]; });
  std::stable_sort(by_plain.begin(), by_plain.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
  EXPECT_EQ(by_order, by_plain);
  for (size_t i = 1; i < xs.size(); ++i) {
    const auto &a = res.db.rows[by_plain[i - 1]], &b = res.db.rows[by_plain[i]];
    EXPECT_EQ(xs[by_plain[i - 1]] == xs[by_plain[i]], a.orders[0] == b.orders[0]);
  }
}

TEST(Query, Example1BelowBoundCountsThree) {
  auto res = example1();
  RangeQuery q;
  q.where.push_back({"X1", Order(0), Order(13)});
  EXPECT_EQ(exec_range(res.db, q).count, 3u);

  q.count = false;
  q.select = {"name"};
  auto r = exec_range(res.db, q);
  std::vector<std::string> names;
  for (const auto& row : r.rows) names.push_back(row.at(0));
  EXPECT_EQ(names, (std::vector<std::string>{"bob", "carol", "erin"}));
}

TEST(Query, FullRangeCountsEveryRow) {
  auto res = example1();
  RangeQuery q;
  q.where.push_back({"X1", Order(1), Order(27)});
  EXPECT_EQ(exec_range(res.db, q).count, res.db.rows.size());
  EXPECT_EQ(exec_range(res.db, RangeQuery{}).count, res.db.rows.size());
}

TEST(Query, InvertedBoundsAreEmpty) {
  auto res = example1();
  RangeQuery q;
  q.where.push_back({"X1", Order(20), Order(5)});
  EXPECT_EQ(exec_range(res.db, q).count, 0u);
}

TEST(Query, UnknownOrPlainColumnRejected) {
  auto res = example1();
  RangeQuery q;
  q.where.push_back({"nope", Order(0), Order(5)});
  EXPECT_THROW(exec_range(res.db, q), Error);
  q.where = {{"name", Order(0), Order(5)}};
  EXPECT_THROW(exec_range(res.db, q), Error);
  RangeQuery p;
  p.count = false;
  p.select = {"X1"};
  EXPECT_THROW(exec_range(res.db, p), Error);
}

// Two encrypted columns, random conjunctions with bounds taken from the dataset. The
// expected count comes from decrypting the table entries.
TEST(Query, SoundnessAgainstDecryptedOracle) {
  Rng rng = Rng::from_seed(6, "store-sound");
  for (int trial = 0; trial < 5; ++trial) {
    const size_t n = 60;
    std::string csv = "id,A,B\n";
    std::vector<uint64_t> a(n), b(n);
    for (size_t i = 0; i < n; ++i) {
      a[i] = rng.below(40);
      b[i] = rng.below(1000);
      csv += std::to_string(i) + "," + std::to_string(a[i]) + "," + std::to_string(b[i]) + "\n";
    }
    auto res = ingest_csv(csv, pk(), opts({"A", "B"}, ope::max_order_from_log2(24)), rng);
    auto da = decrypt_orders(res.db.tables.at("A"));
    auto db = decrypt_orders(res.db.tables.at("B"));
    auto order_of = [](const std::map<Order, uint64_t>& m, uint64_t x) {
      for (const auto& [y, v] : m) {
        if (v == x) return y;
      }
      ADD_FAILURE() << "value missing";
      return Order(0);
    };
    for (int qn = 0; qn < 20; ++qn) {
      uint64_t a1 = a[rng.below(n)], a2 = a[rng.below(n)], b1 = b[rng.below(n)], b2 = b[rng.below(n)];
      RangeQuery q;
      q.where.push_back({"A", order_of(da, a1), order_of(da, a2)});
      q.where.push_back({"B", order_of(db, b1), order_of(db, b2)});
      uint64_t want = 0;
      for (size_t i = 0; i < n; ++i) want += a1 <= a[i] && a[i] <= a2 && b1 <= b[i] && b[i] <= b2;
      EXPECT_EQ(exec_range(res.db, q).count, want) << "trial " << trial << " query " << qn;
    }
  }
}

TEST(Query, CodecsRoundTrip) {
  RangeQuery q;
  q.where.push_back({"X1", Order(3), Order((u128(1) << 100) + 7)});
  q.count = false;
  q.select = {"a", "b"};
  RangeQuery back = decode_query(encode(q));
  ASSERT_EQ(back.where.size(), 1u);
  EXPECT_EQ(back.where[0].hi, q.where[0].hi);
  EXPECT_EQ(back.select, q.select);
  EXPECT_FALSE(back.count);

  QueryResult r{2, {"name", "note"}, {{"a", "x,y"}, {"b", "\"q\""}}};
  QueryResult rb = decode_result(encode(r));
  EXPECT_EQ(rb.rows, r.rows);
  EXPECT_EQ(render_csv(r), "name,note\na,\"x,y\"\nb,\"\"\"q\"\"\"\n");
  EXPECT_EQ(render_jsonl(r), "{\"name\":\"a\",\"note\":\"x,y\"}\n{\"name\":\"b\",\"note\":\"\\\"q\\\"\"}\n");
  EXPECT_EQ(render_csv(QueryResult{3, {}, {}}), "count\n3\n");
  EXPECT_EQ(render_jsonl(QueryResult{3, {}, {}}), "{\"count\":3}\n");
}

TEST(Query, WhereParsing) {
  auto ps = parse_where("X1<32 and X2 >= 5 AND Y=7 AND z<=1 AND w>0");
  ASSERT_EQ(ps.size(), 5u);
  EXPECT_EQ(ps[0].column, "X1");
  EXPECT_EQ(ps[0].op, Cmp::lt);
  EXPECT_EQ(ps[0].value, 32u);
  EXPECT_EQ(ps[1].op, Cmp::ge);
  EXPECT_EQ(ps[2].op, Cmp::eq);
  EXPECT_EQ(ps[3].op, Cmp::le);
  EXPECT_EQ(ps[4].op, Cmp::gt);
  EXPECT_THROW(parse_where("X1 32"), Error);
  EXPECT_THROW(parse_where("<3"), Error);
  EXPECT_THROW(parse_where("X<abc"), Error);
}

TEST(Query, PredicateTranslation) {
  const Order M(100);
  const BoundOrders b{Order(10), Order(20)};
  auto r = [&](Cmp op) { return to_range({"c", op, 0}, b, M); };
  EXPECT_EQ(r(Cmp::lt).lo, Order(0));
  EXPECT_EQ(r(Cmp::lt).hi, Order(9));
  EXPECT_EQ(r(Cmp::le).hi, Order(20));
  EXPECT_EQ(r(Cmp::gt).lo, Order(21));
  EXPECT_EQ(r(Cmp::gt).hi, M);
  EXPECT_EQ(r(Cmp::ge).lo, Order(10));
  EXPECT_EQ(r(Cmp::eq).lo, Order(10));
  EXPECT_EQ(r(Cmp::eq).hi, Order(20));
  auto empty = to_range({"c", Cmp::lt, 0}, {Order(0), Order(0)}, M);
  EXPECT_GT(empty.lo, empty.hi);
}

TEST(Persist, DatabaseRoundTrip) {
  auto res = example1();
  auto dir = temp_dir("db");
  save_database(dir, res.db);
  Database back = load_database(dir);
  EXPECT_EQ(back.headers.at("X1").M, Order(28));
  ASSERT_EQ(back.rows.size(), res.db.rows.size());
  for (size_t i = 0; i < back.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].plain, res.db.rows[i].plain);
    EXPECT_EQ(back.rows[i].orders, res.db.rows[i].orders);
  }
  EXPECT_EQ(table_bytes(back.tables.at("X1")), table_bytes(res.db.tables.at("X1")));

  // One flipped byte in the row file is caught by the checksum.
  {
    std::fstream f(dir / "rows.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(20);
    char c;
    f.seekg(20);
    f.get(c);
    f.seekp(20);
    f.put(static_cast<char>(c ^ 1));
  }
  try {
    load_database(dir);
    ADD_FAILURE() << "corruption not detected";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io);
  }
  std::filesystem::remove_all(dir);
}

TEST(Persist, OwnerRoundTrip) {
  auto res = example1();
  auto dir = temp_dir("owner");
  save_owner(dir / "owner.bin", res.owner);
  OwnerFile back = load_owner(dir / "owner.bin");
  EXPECT_EQ(back.columns.at("X1").pairs(), res.owner.columns.at("X1").pairs());
  std::filesystem::remove_all(dir);
}

TEST(Persist, EmptyDatabaseRoundTrip) {
  auto dir = temp_dir("empty");
  save_database(dir, Database{});
  Database back = load_database(dir);
  EXPECT_TRUE(back.columns.empty());
  std::filesystem::remove_all(dir);
}

TEST(Served, Example1QueryThroughTheProtocol) {
  auto res = example1();
  Store store(std::move(res.db));
  const auto p = params_for(opts({"X1"}, Order(28)));
  proto::Cluster c({.params = p}, do_key512());
  attach(c.csp(), store);

  auto out = da_range_query(c.da(), p, parse_where("X1<32"), true);
  EXPECT_EQ(out.result.count, 3u);
  EXPECT_EQ(out.query.where.at(0).hi, Order(13));
  EXPECT_TRUE(out.temporary.empty());

  // 30 is absent: its temporary entry is removed again.
  out = da_range_query(c.da(), p, parse_where("X1<=30"), false, {"name"});
  EXPECT_EQ(out.result.count, 3u);
  EXPECT_EQ(out.temporary.size(), 1u);
  EXPECT_EQ(out.removed, 1u);
  EXPECT_EQ(store.db().tables.at("X1").table.size(), 5u);
}

TEST(Served, CleanupRestoresTheSnapshot) {
  auto res = example1();
  Store store(std::move(res.db));
  const auto p = params_for(opts({"X1"}, Order(28)));
  proto::Cluster c({.params = p}, do_key512());
  attach(c.csp(), store);
  const Bytes before = table_bytes(store.db().tables.at("X1"));

  auto e = c.da().encrypt("X1", 15);
  EXPECT_FALSE(e.existing);
  EXPECT_NE(table_bytes(store.db().tables.at("X1")), before);
  EXPECT_EQ(c.da().cleanup("X1", {e.sid}), 1u);
  EXPECT_EQ(table_bytes(store.db().tables.at("X1")), before);
  EXPECT_EQ(c.da().cleanup("X1", {e.sid}), 0u);
  EXPECT_EQ(store.db().rows.size(), 5u);
}

// Ten DA insertions interleaved with queries; every answer matches the plaintext
// count over the ingested rows.
TEST(Served, InterleavedInsertsAndQueries) {
  Rng rng = Rng::from_seed(8, "store-interleave");
  std::vector<uint64_t> xs(30);
  for (auto& x : xs) x = rng.below(500);
  const IngestOptions o = opts({"X"}, ope::max_order_from_log2(20));
  auto res = ingest_csv(csv_of("X", xs), pk(), o, rng);
  Store store(std::move(res.db));
  const auto p = params_for(o);
  proto::Cluster c({.params = p, .seed = 9}, do_key512());
  attach(c.csp(), store);

  std::vector<SessionId> inserted;
  for (int i = 0; i < 10; ++i) {
    auto e = c.da().encrypt("X", rng.below(500));
    if (!e.existing) inserted.push_back(e.sid);
    ValuePredicate pred{"X", static_cast<Cmp>(rng.below(5)), xs[rng.below(xs.size())]};
    auto out = da_range_query(c.da(), p, {pred}, true);
    EXPECT_EQ(out.result.count, count_if_plain(xs, pred)) << "step " << i;
  }
  c.da().cleanup("X", inserted);
  EXPECT_EQ(store.db().tables.at("X").table.size(), std::set<uint64_t>(xs.begin(), xs.end()).size());
  ValuePredicate all{"X", Cmp::ge, 0};
  EXPECT_EQ(da_range_query(c.da(), p, {all}, true).result.count, xs.size());
}

// Rows follow the table through a rebalance triggered by a DA insertion.
TEST(Served, RemapKeepsRowsConsistent) {
  const std::vector<uint64_t> xs = {10, 20, 30, 40};
  const IngestOptions o = opts({"X"}, Order(40));
  Rng rng = Rng::from_seed(10, "store-remap");
  auto res = ingest_csv(csv_of("X", xs), pk(), o, rng);
  Store store(std::move(res.db));
  const auto p = params_for(o);
  proto::Cluster c({.params = p}, do_key512());
  attach(c.csp(), store);

  bool rebalanced = false;
  for (uint64_t v = 41; v < 60 && !rebalanced; ++v) rebalanced = c.da().encrypt("X", v).rebalanced;
  ASSERT_TRUE(rebalanced);
  auto st_orders = decrypt_orders(store.db().tables.at("X"));
  for (size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(st_orders.at(store.db().rows[i].orders[0]), xs[i]);
  for (uint64_t b : {10, 25, 40}) {
    ValuePredicate pred{"X", Cmp::le, b};
    EXPECT_EQ(da_range_query(c.da(), p, {pred}, true).result.count, count_if_plain(xs, pred)) << b;
  }
}

// Frequency-hiding column with duplicates: predicates rewritten through the min-max
// outputs count like the plaintext.
TEST(Served, FhDuplicatesCountLikePlaintext) {
  Rng rng = Rng::from_seed(11, "store-fh");
  std::vector<uint64_t> xs(40);
  for (auto& x : xs) x = 2 * rng.below(8);  // even values only, so odd bounds are absent
  const IngestOptions o = opts({"X"}, ope::max_order_from_log2(24), ope::Mode::fh);
  auto res = ingest_csv(csv_of("X", xs), pk(), o, rng);
  std::set<Order> distinct;
  for (const auto& r : res.db.rows) distinct.insert(r.orders[0]);
  EXPECT_EQ(distinct.size(), xs.size());

  Store store(std::move(res.db));
  const auto p = params_for(o);
  proto::Cluster c({.params = p, .seed = 12}, do_key512(), nullptr, &da_key576());
  attach(c.csp(), store);
  for (uint64_t b : {0, 5, 6, 14, 15}) {
    for (Cmp op : {Cmp::lt, Cmp::le, Cmp::gt, Cmp::ge, Cmp::eq}) {
      ValuePredicate pred{"X", op, b};
      auto out = da_range_query(c.da(), p, {pred}, true);
      EXPECT_EQ(out.result.count, count_if_plain(xs, pred)) << "bound " << b << " op " << int(op);
    }
  }
  EXPECT_EQ(store.db().tables.at("X").table.size(), xs.size());
}
