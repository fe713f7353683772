#pragma once

#include <optional>
#include <vector>

#include "common/order.hpp"

namespace oope::ope {

// Midpoint rule: y_left + ceil((y_right - y_left) / 2). Returns nullopt when the gap
// is 1 and the caller has to rebalance. Requires y_left < y_right.
std::optional<Order> assign_order(Order y_left, Order y_right);

// Order of rank i (1-based) among n entries spread over (0, M): ceil(i * M / (n + 1)).
Order spread_order(u128 i, u128 n, Order M);

// Maximum order for a log2(M) parameter: 2^log2m - 1, which keeps M off powers of two.
Order max_order_from_log2(int log2m);

bool is_power_of_two(Order M);

}  // namespace oope::ope
