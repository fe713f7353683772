#pragma once

#include <cstdint>
#include <vector>

#include "common/order.hpp"

namespace oope::gc {

enum class GateKind : uint8_t { XOR = 0, AND = 1, OR = 2, NOT = 3 };

struct Gate {
  GateKind kind;
  uint32_t a;
  uint32_t b;  // unused for NOT
  uint32_t out;
};

enum CircuitId : uint32_t {
  kComparator = 1,
  kFhComparator = 2,
};

// Gates are stored in topological order: every gate input is an input wire or the
// output of an earlier gate.
struct Circuit {
  uint32_t id = 0;
  uint32_t width = 0;
  uint32_t num_wires = 0;
  std::vector<uint32_t> gen_inputs;
  std::vector<uint32_t> eval_inputs;
  std::vector<Gate> gates;
  std::vector<uint32_t> outputs;

  size_t count(GateKind kind) const;
  // Number of gates that need a garbled table (AND and OR).
  size_t nonlinear_gates() const;
};

using Bits = std::vector<uint8_t>;

// Comparator of two width-bit values, least significant bit first.
//   generator: [zero, x_0..x_{w-1}, b_x, b'_x]
//   evaluator: [xbar_0..xbar_{w-1}, b_xbar, b'_xbar]
//   outputs:   [c_e, c_g] with c_e = [xbar != x] ^ b_x ^ b_xbar, c_g = [xbar > x] ^ b'_x ^ b'_xbar
// The zero input is a constant the generator always sets to 0; it seeds the two
// carry chains so every bit position has one equality stage and one greater-than stage.
Circuit build_comparator(uint32_t width);

// Comparator with the random-coin extension.
//   generator: [zero, x bits, b_o, r_x, e_do, r_do, m_e, m_r]
//   evaluator: [xbar bits, b_a, r_xbar, e_da, r_da]
//   outputs:   [b ^ b_o ^ b_a, next_e ^ m_e, next_r ^ m_r]
// (e_do ^ e_da, r_do ^ r_da) is the carried state (prev_e, prev_r). With
// be = [xbar != x], bg = [xbar > x] and coin = r_x ^ r_xbar:
//   next_r = prev_e ? coin : prev_r
//   b      = be ? bg : next_r
//   next_e = be
// The generator keeps (m_e, m_r) as its next-round shares, the evaluator keeps the
// masked outputs.
Circuit build_fh_comparator(uint32_t width);

// Reference evaluator. `gen` and `eval` follow the circuit's input order.
Bits eval_plain(const Circuit& c, const Bits& gen, const Bits& eval);
// Evaluates and returns every wire value, for tests that inspect intermediate wires.
Bits eval_plain_wires(const Circuit& c, const Bits& gen, const Bits& eval);

// Input assembly helpers; `value` must fit in `width` bits.
Bits comparator_gen_bits(uint32_t width, u128 value, bool mask_e, bool mask_g);
Bits comparator_eval_bits(uint32_t width, u128 value, bool mask_e, bool mask_g);

struct FhGenInput {
  u128 value = 0;
  bool mask = false;
  bool coin = false;
  bool share_e = false;
  bool share_r = false;
  bool next_mask_e = false;
  bool next_mask_r = false;
};

struct FhEvalInput {
  u128 value = 0;
  bool mask = false;
  bool coin = false;
  bool share_e = false;
  bool share_r = false;
};

Bits fh_gen_bits(uint32_t width, const FhGenInput& in);
Bits fh_eval_bits(uint32_t width, const FhEvalInput& in);

}  // namespace oope::gc
