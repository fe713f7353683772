#include "ope/state.hpp"

#include <algorithm>
#include <iterator>
#include <map>
#include <string>

#include "common/log.hpp"

namespace oope::ope {

Order remap_lookup(const Remap& remap, Order old) {
  auto it = std::lower_bound(remap.begin(), remap.end(), old,
                             [](const std::pair<Order, Order>& p, Order v) { return p.first < v; });
  if (it == remap.end() || it->first != old) fail(Errc::internal, "order " + old.to_string() + " missing from remap");
  return it->second;
}

void OwnerState::add(uint64_t x, Order y) {
  if (mode_ == Mode::det && order_of(x)) fail(Errc::usage, "deterministic owner state already holds the value");
  pairs_.emplace(x, y);
}

std::optional<Order> OwnerState::order_of(uint64_t x) const {
  auto it = pairs_.lower_bound({x, Order(0)});
  if (it == pairs_.end() || it->first != x) return std::nullopt;
  return it->second;
}

std::optional<std::pair<Order, Order>> OwnerState::min_max(uint64_t x) const {
  auto lo = pairs_.lower_bound({x, Order(0)});
  if (lo == pairs_.end() || lo->first != x) return std::nullopt;
  auto hi = pairs_.upper_bound({x, Order(~u128{0})});
  return std::make_pair(lo->second, std::prev(hi)->second);
}

void OwnerState::apply(const Remap& remap) {
  std::set<std::pair<uint64_t, Order>> next;
  for (const auto& [x, y] : pairs_) next.emplace(x, remap_lookup(remap, y));
  pairs_ = std::move(next);
}

namespace {

void check_capacity(size_t n, Order M) {
  if (u128{n} >= M.value() - 1) {
    fail(Errc::capacity, "order space exhausted: " + std::to_string(n) + " entries do not fit below M = " +
                             M.to_string());
  }
}

}  // namespace

OrderAssignment assign_dataset(const std::vector<uint64_t>& dataset, Mode mode, Order M, Rng* coin) {
  if (mode == Mode::fh && !coin) fail(Errc::usage, "frequency-hiding assignment needs a coin source");
  OrderAssignment out;
  std::set<std::pair<uint64_t, Order>> sorted;

  auto respread = [&] {
    check_capacity(sorted.size(), M);
    Remap remap;
    remap.reserve(sorted.size());
    std::set<std::pair<uint64_t, Order>> next;
    u128 i = 0;
    for (const auto& [x, y] : sorted) {
      Order ny = spread_order(++i, sorted.size(), M);
      remap.emplace_back(y, ny);
      next.emplace_hint(next.end(), x, ny);
    }
    sorted = std::move(next);
    for (auto& item : out.items) item.second = remap_lookup(remap, item.second);
    ++out.rebalances;
  };

  for (uint64_t x : dataset) {
    for (int attempt = 0;; ++attempt) {
      auto lo = sorted.lower_bound({x, Order(0)});
      auto hi = sorted.upper_bound({x, Order(~u128{0})});
      const size_t run = static_cast<size_t>(std::distance(lo, hi));
      if (run > 0 && mode == Mode::det) break;

      // Gap g of the run: between run element g-1 and g.
      size_t g = run == 0 ? 0 : static_cast<size_t>(coin->below(run + 1));
      auto succ = std::next(lo, static_cast<std::ptrdiff_t>(g));
      Order left = succ == sorted.begin() ? Order(0) : std::prev(succ)->second;
      Order right = succ == sorted.end() ? M : succ->second;
      if (auto y = assign_order(left, right)) {
        sorted.emplace(x, *y);
        out.items.emplace_back(x, *y);
        break;
      }
      if (attempt > 0) fail(Errc::capacity, "no free order even after rebalancing");
      respread();
    }
  }
  return out;
}

InitResult init_state(const std::vector<uint64_t>& dataset, const hom::PublicKey& pk, const InitOptions& opts,
                      Rng& rng) {
  if (opts.l == 0 || opts.l > 64) fail(Errc::config, "plaintext length l must lie in [1, 64]");
  const size_t n = dataset.size();
  if (n > 0) {
    int need = 0;
    while ((size_t{1} << need) < n) ++need;
    if (opts.M.bit_length() <= need || u128{n} >= opts.M.value() - 1) {
      fail(Errc::config, "maximum order M = " + opts.M.to_string() + " is too small for " + std::to_string(n) +
                             " values");
    }
  }
  if (is_power_of_two(opts.M)) log_warn("maximum order M is a power of two; 2^k - 1 is recommended");
  for (uint64_t x : dataset) {
    if (opts.l < 64 && (x >> opts.l) != 0) {
      fail(Errc::domain, "value " + std::to_string(x) + " does not fit in " + std::to_string(opts.l) + " bits");
    }
  }
  if (mpz_sizeinbase(pk.n().get_mpz_t(), 2) <= opts.l + 1) fail(Errc::config, "Paillier modulus too small for l");
  if (opts.integrity != integ::Scheme::off && (!opts.params || !opts.params->present())) {
    fail(Errc::config, "integrity mode requires parameters");
  }

  Rng coin = rng.fork("init-coin");
  OrderAssignment assigned = assign_dataset(dataset, opts.mode, opts.M, &coin);

  InitResult out;
  out.rebalances = assigned.rebalances;
  out.owner = OwnerState(opts.mode);
  for (const auto& [x, y] : assigned.items) out.owner.add(x, y);

  out.server.table = OpeTable(opts.M, opts.l, opts.mode);
  std::map<uint64_t, std::pair<Order, Order>> fh_bounds;
  if (opts.mode == Mode::fh) {
    for (const auto& [x, y] : out.owner.pairs()) {
      auto [it, fresh] = fh_bounds.try_emplace(x, y, y);
      if (!fresh) it->second.second = y;
    }
  }
  for (const auto& [x, y] : assigned.items) {
    OpeEntry e;
    e.cipher = hom::encrypt(pk, x, rng, opts.pool);
    e.order = y;
    if (opts.mode == Mode::fh) {
      const auto& b = fh_bounds.at(x);
      e.fh_min = hom::encrypt(pk, to_mpz(b.first), rng, opts.pool);
      e.fh_max = hom::encrypt(pk, to_mpz(b.second), rng, opts.pool);
    }
    if (opts.integrity != integ::Scheme::off) e.tag = integ::make_tag(opts.integrity, x, *opts.params, pk, rng, opts.pool);
    out.server.table.insert(std::move(e));
  }

  if (opts.balance_tree) {
    std::vector<Order> orders;
    orders.reserve(out.server.table.size());
    for (const auto& [y, e] : out.server.table.entries()) orders.push_back(y);
    out.server.tree.build_balanced(orders);
  } else {
    for (const auto& [x, y] : assigned.items) out.server.tree.insert(y);
  }
  return out;
}

Remap compute_rebalance(const OpeTable& table) {
  if (table.empty()) fail(Errc::usage, "rebalance of an empty table");
  check_capacity(table.size(), table.M());
  Remap remap;
  remap.reserve(table.size());
  u128 i = 0;
  for (const auto& [y, e] : table.entries()) remap.emplace_back(y, spread_order(++i, table.size(), table.M()));
  return remap;
}

void apply_remap(ServerState& s, const Remap& remap) {
  auto& entries = s.table.mutable_entries();
  if (remap.size() != entries.size()) fail(Errc::internal, "remap does not cover the table");
  std::map<Order, OpeEntry> next;
  for (auto& [y, e] : entries) {
    Order ny = remap_lookup(remap, y);
    e.order = ny;
    next.emplace_hint(next.end(), ny, std::move(e));
  }
  entries = std::move(next);
  std::vector<Order> orders;
  orders.reserve(entries.size());
  for (const auto& [y, e] : entries) orders.push_back(y);
  s.tree.build_balanced(orders);
}

Remap rebalance(ServerState& s) {
  Remap remap = compute_rebalance(s.table);
  apply_remap(s, remap);
  return remap;
}

void insert_entry(ServerState& s, OpeEntry entry, std::optional<Order> parent, Side side) {
  const Order y = entry.order;
  if (s.table.find(y)) fail(Errc::integrity, "order collision at " + y.to_string());
  if (parent) {
    Neighbors nb = neighbors(s.table, *parent, side);
    if (!(nb.y_left < y && y < nb.y_right)) {
      fail(Errc::usage, "order " + y.to_string() + " is not between the parent-side neighbors");
    }
  } else if (s.tree.root() != OpeTree::kNil) {
    fail(Errc::usage, "entry without parent can only be inserted into an empty tree");
  }
  s.table.insert(std::move(entry));
  try {
    if (parent) {
      s.tree.insert_child(*parent, side, y);
    } else {
      s.tree.insert(y);
    }
  } catch (...) {
    s.table.erase(y);
    throw;
  }
}

void remove_entry(ServerState& s, Order y) {
  s.table.erase(y);
  s.tree.remove(y);
}

namespace {

std::optional<Order> order_next_to(const OpeTable& t, Order node, Side side) {
  Neighbors nb = neighbors(t, node, side);
  return assign_order(nb.y_left, nb.y_right);
}

}  // namespace

InsertPlan plan_insert(const ServerState& s, std::optional<Order> node, Side side, bool allow_rebalance) {
  if (!node) {
    if (!s.table.empty()) fail(Errc::usage, "insert position needs a node in a non-empty table");
    return {*assign_order(Order(0), s.table.M()), std::nullopt};
  }
  if (auto y = order_next_to(s.table, *node, side)) return {*y, std::nullopt};
  if (!allow_rebalance) {
    fail(Errc::capacity, "order gap exhausted next to " + node->to_string() + " and rebalancing is not permitted");
  }
  Remap remap = compute_rebalance(s.table);
  // Neighbors under the new spacing; ranks are unchanged.
  Order moved = remap_lookup(remap, *node);
  Order left, right;
  const OpeEntry* nb = side == Side::left ? s.table.predecessor(*node) : s.table.successor(*node);
  if (side == Side::left) {
    left = nb ? remap_lookup(remap, nb->order) : Order(0);
    right = moved;
  } else {
    left = moved;
    right = nb ? remap_lookup(remap, nb->order) : s.table.M();
  }
  auto y = assign_order(left, right);
  if (!y) fail(Errc::capacity, "order space exhausted even after rebalancing");
  return {*y, std::move(remap)};
}

void commit_insert(ServerState& s, const InsertPlan& plan, OpeEntry entry) {
  if (plan.remap) apply_remap(s, *plan.remap);
  entry.order = plan.y;
  s.table.insert(std::move(entry));
  try {
    s.tree.insert(plan.y);
  } catch (...) {
    s.table.erase(plan.y);
    throw;
  }
}

size_t remove_da_entries(ServerState& s, const std::set<SessionId>& sessions, std::set<SessionId>* seen) {
  std::vector<Order> drop;
  for (const auto& [y, e] : s.table.entries()) {
    if (e.da_session && sessions.count(*e.da_session)) {
      drop.push_back(y);
      if (seen) seen->insert(*e.da_session);
    }
  }
  for (Order y : drop) remove_entry(s, y);
  return drop.size();
}

}  // namespace oope::ope
