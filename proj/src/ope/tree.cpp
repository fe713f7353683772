#include "ope/tree.hpp"

#include <algorithm>
#include <string>

#include "common/error.hpp"

namespace oope::ope {

void OpeTree::clear() {
  nodes_.clear();
  free_.clear();
  index_.clear();
  root_ = kNil;
}

int32_t OpeTree::alloc(Order y, int32_t parent) {
  if (!index_.emplace(y, 0).second) fail(Errc::integrity, "tree already holds order " + y.to_string());
  int32_t i;
  if (!free_.empty()) {
    i = free_.back();
    free_.pop_back();
    nodes_[static_cast<size_t>(i)] = Node{y, kNil, kNil, parent, 1};
  } else {
    i = static_cast<int32_t>(nodes_.size());
    nodes_.push_back(Node{y, kNil, kNil, parent, 1});
  }
  index_[y] = i;
  return i;
}

void OpeTree::release(int32_t i) {
  index_.erase(nodes_[static_cast<size_t>(i)].order);
  free_.push_back(i);
}

void OpeTree::fix_heights(int32_t from) {
  for (int32_t i = from; i != kNil; i = nodes_[static_cast<size_t>(i)].parent) {
    Node& n = nodes_[static_cast<size_t>(i)];
    uint32_t hl = n.left == kNil ? 0 : node(n.left).height;
    uint32_t hr = n.right == kNil ? 0 : node(n.right).height;
    n.height = 1 + std::max(hl, hr);
  }
}

int32_t OpeTree::build(const std::vector<Order>& sorted, size_t lo, size_t hi, int32_t parent) {
  if (lo >= hi) return kNil;
  size_t mid = lo + (hi - lo) / 2;
  int32_t i = alloc(sorted[mid], parent);
  int32_t l = build(sorted, lo, mid, i);
  int32_t r = build(sorted, mid + 1, hi, i);
  Node& n = nodes_[static_cast<size_t>(i)];
  n.left = l;
  n.right = r;
  n.height = 1 + std::max(l == kNil ? 0u : node(l).height, r == kNil ? 0u : node(r).height);
  return i;
}

void OpeTree::build_balanced(const std::vector<Order>& sorted) {
  for (size_t i = 1; i < sorted.size(); ++i) {
    if (!(sorted[i - 1] < sorted[i])) fail(Errc::usage, "balanced build needs strictly increasing orders");
  }
  clear();
  nodes_.reserve(sorted.size());
  root_ = build(sorted, 0, sorted.size(), kNil);
}

int32_t OpeTree::insert(Order y) {
  if (root_ == kNil) {
    root_ = alloc(y, kNil);
    return root_;
  }
  int32_t cur = root_;
  for (;;) {
    const Node& n = node(cur);
    if (y == n.order) fail(Errc::integrity, "tree already holds order " + y.to_string());
    Side side = y < n.order ? Side::left : Side::right;
    int32_t next = child(cur, side);
    if (next == kNil) return insert_child(n.order, side, y);
    cur = next;
  }
}

int32_t OpeTree::insert_child(Order parent, Side side, Order y) {
  int32_t p = find(parent);
  if (p == kNil) fail(Errc::usage, "parent order " + parent.to_string() + " is not in the tree");
  if (child(p, side) != kNil) fail(Errc::usage, "parent already has a child on that side");
  if ((side == Side::left) != (y < parent)) fail(Errc::usage, "child order violates the search-tree ordering");
  int32_t i = alloc(y, p);
  Node& pn = nodes_[static_cast<size_t>(p)];
  (side == Side::left ? pn.left : pn.right) = i;
  fix_heights(p);
  return i;
}

void OpeTree::replace_in_parent(int32_t i, int32_t with) {
  int32_t p = node(i).parent;
  if (with != kNil) nodes_[static_cast<size_t>(with)].parent = p;
  if (p == kNil) {
    root_ = with;
    return;
  }
  Node& pn = nodes_[static_cast<size_t>(p)];
  if (pn.left == i) {
    pn.left = with;
  } else {
    pn.right = with;
  }
}

void OpeTree::remove(Order y) {
  int32_t i = find(y);
  if (i == kNil) fail(Errc::usage, "order " + y.to_string() + " is not in the tree");
  Node n = node(i);
  int32_t fix_from;
  if (n.left == kNil || n.right == kNil) {
    replace_in_parent(i, n.left == kNil ? n.right : n.left);
    fix_from = n.parent;
  } else {
    // Two children: splice out the in-order successor and move it into i's place.
    int32_t s = n.right;
    while (node(s).left != kNil) s = node(s).left;
    int32_t s_parent = node(s).parent;
    replace_in_parent(s, node(s).right);
    fix_from = s_parent == i ? s : s_parent;
    Node& sn = nodes_[static_cast<size_t>(s)];
    const Node& cur = node(i);
    sn.left = cur.left;
    sn.right = cur.right;
    if (sn.left != kNil) nodes_[static_cast<size_t>(sn.left)].parent = s;
    if (sn.right != kNil) nodes_[static_cast<size_t>(sn.right)].parent = s;
    replace_in_parent(i, s);
  }
  release(i);
  if (fix_from != kNil) fix_heights(fix_from);
}

int32_t OpeTree::find(Order y) const {
  auto it = index_.find(y);
  return it == index_.end() ? kNil : it->second;
}

std::vector<Order> OpeTree::in_order() const {
  std::vector<Order> out;
  out.reserve(index_.size());
  std::vector<int32_t> stack;
  int32_t cur = root_;
  while (cur != kNil || !stack.empty()) {
    while (cur != kNil) {
      stack.push_back(cur);
      cur = node(cur).left;
    }
    cur = stack.back();
    stack.pop_back();
    out.push_back(node(cur).order);
    cur = node(cur).right;
  }
  return out;
}

bool OpeTree::check_invariants() const {
  size_t seen = 0;
  bool ok = true;
  // Returns subtree height; validates bounds on the way.
  auto walk = [&](auto&& self, int32_t i, int32_t parent, const Order* lo, const Order* hi) -> uint32_t {
    if (i == kNil) return 0;
    const Node& n = node(i);
    ++seen;
    if (n.parent != parent) ok = false;
    if ((lo && !(*lo < n.order)) || (hi && !(n.order < *hi))) ok = false;
    uint32_t h = 1 + std::max(self(self, n.left, i, lo, &n.order), self(self, n.right, i, &n.order, hi));
    if (h != n.height) ok = false;
    return h;
  };
  walk(walk, root_, kNil, nullptr, nullptr);
  return ok && seen == index_.size();
}

}  // namespace oope::ope
