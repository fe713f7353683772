#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "ope/orders.hpp"
#include "ope/table.hpp"
#include "ope/tree.hpp"

namespace oope::ope {

// Old order -> new order, sorted by old order.
using Remap = std::vector<std::pair<Order, Order>>;

Order remap_lookup(const Remap& remap, Order old);

// The DO's plaintext/order pairs.
class OwnerState {
 public:
  OwnerState() = default;
  explicit OwnerState(Mode mode) : mode_(mode) {}

  Mode mode() const { return mode_; }
  size_t size() const { return pairs_.size(); }
  const std::set<std::pair<uint64_t, Order>>& pairs() const { return pairs_; }

  void add(uint64_t x, Order y);
  // Deterministic mode: order of x if present.
  std::optional<Order> order_of(uint64_t x) const;
  // Smallest and largest order held for x, if any.
  std::optional<std::pair<Order, Order>> min_max(uint64_t x) const;
  void apply(const Remap& remap);

 private:
  Mode mode_ = Mode::det;
  std::set<std::pair<uint64_t, Order>> pairs_;
};

struct ServerState {
  OpeTable table;
  OpeTree tree;
};

struct InitOptions {
  Mode mode = Mode::det;
  uint32_t l = 32;
  Order M;
  // Rebuild the tree by median split after construction; otherwise the tree keeps
  // the shape produced by inserting the dataset in the given order.
  bool balance_tree = true;
  integ::Scheme integrity = integ::Scheme::off;
  const integ::MacParams* params = nullptr;
  hom::RandomnessPool* pool = nullptr;
};

struct InitResult {
  OwnerState owner;
  ServerState server;
  size_t rebalances = 0;
};

// Runs the order assignment for every dataset value in sequence, then encrypts the
// table. Deterministic mode collapses duplicates; FH mode gives every occurrence its
// own order, placing it at a random gap among equal plaintexts, and attaches
// encryptions of c_min(x) and c_max(x).
InitResult init_state(const std::vector<uint64_t>& dataset, const hom::PublicKey& pk, const InitOptions& opts,
                      Rng& rng);

// Orders only, without encryption: the sequential assignment used by init_state.
// Returns (x, y) per inserted item in insertion order.
struct OrderAssignment {
  std::vector<std::pair<uint64_t, Order>> items;
  size_t rebalances = 0;
};
OrderAssignment assign_dataset(const std::vector<uint64_t>& dataset, Mode mode, Order M, Rng* coin);

// Reassigns the orders of n entries to ceil(i * M / (n + 1)) and rebuilds the tree
// balanced. Capacity error when n >= M - 1.
Remap compute_rebalance(const OpeTable& table);
Remap rebalance(ServerState& s);
void apply_remap(ServerState& s, const Remap& remap);

// Adds the entry to table and tree under the given parent (no parent: empty tree).
void insert_entry(ServerState& s, OpeEntry entry, std::optional<Order> parent, Side side);
// Removes entry and tree node.
void remove_entry(ServerState& s, Order y);
// Removes every entry inserted by one of the given DA sessions; records the sessions
// that had entries in `seen`. Returns the number removed.
size_t remove_da_entries(ServerState& s, const std::set<SessionId>& sessions, std::set<SessionId>* seen = nullptr);

// Order for a new value adjacent to `node` on `side` (node absent only for an empty
// table). When the gap is exhausted a rebalance is planned (not applied) if allowed.
struct InsertPlan {
  Order y;
  std::optional<Remap> remap;
};
InsertPlan plan_insert(const ServerState& s, std::optional<Order> node, Side side, bool allow_rebalance);
// Applies a plan's rebalance (if any) and inserts the entry with order plan.y.
void commit_insert(ServerState& s, const InsertPlan& plan, OpeEntry entry);

}  // namespace oope::ope
