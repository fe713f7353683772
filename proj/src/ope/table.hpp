#pragma once

#include <map>
#include <optional>
#include <vector>

#include "common/bytes.hpp"
#include "homcrypto/paillier.hpp"
#include "integrity/integrity.hpp"

namespace oope::ope {

enum class Mode : uint8_t { det = 0, fh = 1 };

std::string_view mode_name(Mode m);
Mode parse_mode(std::string_view text);

struct OpeEntry {
  hom::Ciphertext cipher;
  Order order;
  std::optional<hom::Ciphertext> fh_min;
  std::optional<hom::Ciphertext> fh_max;
  integ::NodeTag tag;
  // Set for entries inserted by a DA session; they are removable by cleanup.
  std::optional<SessionId> da_session;
};

enum class Side : uint8_t { left = 0, right = 1 };

struct Neighbors {
  Order y_left;
  Order y_right;
  const OpeEntry* neighbor = nullptr;  // null when the bound is virtual
};

// Entries keyed and sorted by order. Real entries occupy [1, M-1]; 0 and M are the
// virtual bounds.
class OpeTable {
 public:
  OpeTable() = default;
  OpeTable(Order M, uint32_t l, Mode mode);

  Order M() const { return M_; }
  uint32_t l() const { return l_; }
  Mode mode() const { return mode_; }
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const OpeEntry* find(Order y) const;
  const OpeEntry& at(Order y) const;
  // Order collision raises an integrity error; orders outside [1, M-1] a domain error.
  void insert(OpeEntry e);
  void erase(Order y);

  // Nearest entry strictly below / above y. With skip_da, entries inserted by DA
  // sessions are passed over.
  const OpeEntry* predecessor(Order y, bool skip_da = false) const;
  const OpeEntry* successor(Order y, bool skip_da = false) const;

  const std::map<Order, OpeEntry>& entries() const { return entries_; }
  std::map<Order, OpeEntry>& mutable_entries() { return entries_; }

 private:
  Order M_;
  uint32_t l_ = 0;
  Mode mode_ = Mode::det;
  std::map<Order, OpeEntry> entries_;
};

// left: (predecessor or 0, node); right: (node, successor or M). Absent node order is
// a usage error.
Neighbors neighbors(const OpeTable& t, Order node, Side dir);

}  // namespace oope::ope
