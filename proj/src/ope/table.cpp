#include "ope/table.hpp"

#include <string>

namespace oope::ope {

std::string_view mode_name(Mode m) { return m == Mode::det ? "det" : "fh"; }

Mode parse_mode(std::string_view text) {
  if (text == "det") return Mode::det;
  if (text == "fh") return Mode::fh;
  fail(Errc::usage, "unknown mode '" + std::string(text) + "' (det|fh)");
}

OpeTable::OpeTable(Order M, uint32_t l, Mode mode) : M_(M), l_(l), mode_(mode) {
  if (M.value() < 2) fail(Errc::config, "maximum order M must be at least 2");
  if (l == 0 || l > 64) fail(Errc::config, "plaintext length l must lie in [1, 64]");
}

const OpeEntry* OpeTable::find(Order y) const {
  auto it = entries_.find(y);
  return it == entries_.end() ? nullptr : &it->second;
}

const OpeEntry& OpeTable::at(Order y) const {
  const OpeEntry* e = find(y);
  if (!e) fail(Errc::usage, "order " + y.to_string() + " is not in the table");
  return *e;
}

void OpeTable::insert(OpeEntry e) {
  if (e.order.value() == 0 || !(e.order < M_)) {
    fail(Errc::domain, "order " + e.order.to_string() + " outside [1, M-1]");
  }
  Order y = e.order;
  auto [it, fresh] = entries_.try_emplace(y, std::move(e));
  if (!fresh) fail(Errc::integrity, "order collision at " + y.to_string());
}

void OpeTable::erase(Order y) {
  if (entries_.erase(y) == 0) fail(Errc::usage, "order " + y.to_string() + " is not in the table");
}

const OpeEntry* OpeTable::predecessor(Order y, bool skip_da) const {
  auto it = entries_.lower_bound(y);
  while (it != entries_.begin()) {
    --it;
    if (!skip_da || !it->second.da_session) return &it->second;
  }
  return nullptr;
}

const OpeEntry* OpeTable::successor(Order y, bool skip_da) const {
  for (auto it = entries_.upper_bound(y); it != entries_.end(); ++it) {
    if (!skip_da || !it->second.da_session) return &it->second;
  }
  return nullptr;
}

Neighbors neighbors(const OpeTable& t, Order node, Side dir) {
  t.at(node);
  if (dir == Side::left) {
    const OpeEntry* p = t.predecessor(node);
    return {p ? p->order : Order(0), node, p};
  }
  const OpeEntry* s = t.successor(node);
  return {node, s ? s->order : t.M(), s};
}

}  // namespace oope::ope
