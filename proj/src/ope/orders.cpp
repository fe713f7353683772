#include "ope/orders.hpp"

#include <string>

#include "common/error.hpp"

namespace oope::ope {

std::optional<Order> assign_order(Order y_left, Order y_right) {
  if (!(y_left < y_right)) fail(Errc::usage, "assign_order needs y_left < y_right");
  const u128 gap = y_right.value() - y_left.value();
  if (gap == 1) return std::nullopt;
  return Order(y_left.value() + gap / 2 + gap % 2);
}

Order spread_order(u128 i, u128 n, Order M) {
  // M = q (n + 1) + r, so i M / (n + 1) = q i + r i / (n + 1) without overflow.
  const u128 d = n + 1;
  const u128 q = M.value() / d;
  const u128 r = M.value() % d;
  const u128 ri = r * i;
  return Order(q * i + ri / d + (ri % d != 0));
}

Order max_order_from_log2(int log2m) {
  if (log2m < 2 || log2m > 127) fail(Errc::config, "log2m must lie in [2, 127], got " + std::to_string(log2m));
  return Order((u128{1} << log2m) - 1);
}

bool is_power_of_two(Order M) { return M.value() != 0 && (M.value() & (M.value() - 1)) == 0; }

}  // namespace oope::ope
