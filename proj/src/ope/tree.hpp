#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "common/order.hpp"
#include "ope/table.hpp"

namespace oope::ope {

// Binary search tree over table orders. Node heights are cached so the protocol can
// read the live tree height in O(1).
class OpeTree {
 public:
  static constexpr int32_t kNil = -1;

  struct Node {
    Order order;
    int32_t left = kNil;
    int32_t right = kNil;
    int32_t parent = kNil;
    uint32_t height = 1;  // nodes on the longest downward path
  };

  void clear();
  // Median-split construction; `sorted` must be strictly increasing.
  void build_balanced(const std::vector<Order>& sorted);

  // Plain BST insertion by order. Duplicate order raises an integrity error.
  int32_t insert(Order y);
  // Attaches y as the `side` child of `parent`, which must currently be empty there.
  int32_t insert_child(Order parent, Side side, Order y);
  void remove(Order y);

  int32_t root() const { return root_; }
  int32_t find(Order y) const;
  const Node& node(int32_t i) const { return nodes_[static_cast<size_t>(i)]; }
  int32_t child(int32_t i, Side side) const { return side == Side::left ? node(i).left : node(i).right; }
  // Number of nodes on the longest root-to-leaf path; 0 for an empty tree.
  uint32_t height() const { return root_ == kNil ? 0 : node(root_).height; }
  size_t size() const { return index_.size(); }

  std::vector<Order> in_order() const;
  // Checks BST ordering, parent links and cached heights. Used by tests.
  bool check_invariants() const;

 private:
  int32_t alloc(Order y, int32_t parent);
  void release(int32_t i);
  void fix_heights(int32_t from);
  int32_t build(const std::vector<Order>& sorted, size_t lo, size_t hi, int32_t parent);
  void replace_in_parent(int32_t i, int32_t with);

  std::vector<Node> nodes_;
  std::vector<int32_t> free_;
  std::map<Order, int32_t> index_;
  int32_t root_ = kNil;
};

}  // namespace oope::ope
