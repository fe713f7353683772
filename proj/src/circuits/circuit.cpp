#include "circuits/circuit.hpp"

#include <string>

#include "common/error.hpp"

namespace oope::gc {

size_t Circuit::count(GateKind kind) const {
  size_t n = 0;
  for (const auto& g : gates) n += g.kind == kind;
  return n;
}

size_t Circuit::nonlinear_gates() const { return count(GateKind::AND) + count(GateKind::OR); }

namespace {

class Builder {
 public:
  uint32_t wire() { return next_++; }
  uint32_t gate(GateKind kind, uint32_t a, uint32_t b) {
    uint32_t out = wire();
    c_.gates.push_back({kind, a, b, out});
    return out;
  }
  uint32_t x(uint32_t a, uint32_t b) { return gate(GateKind::XOR, a, b); }
  uint32_t and_(uint32_t a, uint32_t b) { return gate(GateKind::AND, a, b); }
  uint32_t or_(uint32_t a, uint32_t b) { return gate(GateKind::OR, a, b); }
  // a ? t : f
  uint32_t mux(uint32_t a, uint32_t t, uint32_t f) { return x(f, and_(a, x(t, f))); }

  uint32_t gen_input() {
    uint32_t w = wire();
    c_.gen_inputs.push_back(w);
    return w;
  }
  uint32_t eval_input() {
    uint32_t w = wire();
    c_.eval_inputs.push_back(w);
    return w;
  }

  Circuit& c() { return c_; }
  Circuit finish() {
    c_.num_wires = next_;
    return std::move(c_);
  }

 private:
  Circuit c_;
  uint32_t next_ = 0;
};

struct CompareWires {
  uint32_t ne;  // [xbar != x]
  uint32_t gt;  // [xbar > x]
};

// Equality and greater-than chains over wires x[j], xbar[j], LSB first.
//   ce_{j+1} = (xbar_j ^ x_j) | ce_j
//   cg_{j+1} = ((xbar_j ^ cg_j) & (x_j ^ cg_j)) ^ xbar_j
CompareWires compare_chain(Builder& b, uint32_t zero, const std::vector<uint32_t>& x,
                           const std::vector<uint32_t>& xbar) {
  uint32_t ce = zero;
  uint32_t cg = zero;
  for (size_t j = 0; j < x.size(); ++j) {
    ce = b.or_(b.x(xbar[j], x[j]), ce);
    cg = b.x(b.and_(b.x(xbar[j], cg), b.x(x[j], cg)), xbar[j]);
  }
  return {ce, cg};
}

void check_width(uint32_t width) {
  if (width == 0) fail(Errc::domain, "comparator width must be at least 1");
  if (width > 127) fail(Errc::domain, "comparator width above 127 bits is not supported");
}

}  // namespace

Circuit build_comparator(uint32_t width) {
  check_width(width);
  Builder b;
  b.c().id = kComparator;
  b.c().width = width;
  uint32_t zero = b.gen_input();
  std::vector<uint32_t> x(width), xbar(width);
  for (auto& w : x) w = b.gen_input();
  uint32_t bx = b.gen_input();
  uint32_t bx2 = b.gen_input();
  for (auto& w : xbar) w = b.eval_input();
  uint32_t bxbar = b.eval_input();
  uint32_t bxbar2 = b.eval_input();

  auto cmp = compare_chain(b, zero, x, xbar);
  uint32_t ce = b.x(b.x(cmp.ne, bx), bxbar);
  uint32_t cg = b.x(b.x(cmp.gt, bx2), bxbar2);
  b.c().outputs = {ce, cg};
  return b.finish();
}

Circuit build_fh_comparator(uint32_t width) {
  check_width(width);
  Builder b;
  b.c().id = kFhComparator;
  b.c().width = width;
  uint32_t zero = b.gen_input();
  std::vector<uint32_t> x(width), xbar(width);
  for (auto& w : x) w = b.gen_input();
  uint32_t b_o = b.gen_input();
  uint32_t r_x = b.gen_input();
  uint32_t e_do = b.gen_input();
  uint32_t r_do = b.gen_input();
  uint32_t m_e = b.gen_input();
  uint32_t m_r = b.gen_input();
  for (auto& w : xbar) w = b.eval_input();
  uint32_t b_a = b.eval_input();
  uint32_t r_xbar = b.eval_input();
  uint32_t e_da = b.eval_input();
  uint32_t r_da = b.eval_input();

  auto cmp = compare_chain(b, zero, x, xbar);
  uint32_t coin = b.x(r_x, r_xbar);
  uint32_t prev_e = b.x(e_do, e_da);
  uint32_t prev_r = b.x(r_do, r_da);
  uint32_t next_r = b.mux(prev_e, coin, prev_r);
  uint32_t out = b.mux(cmp.ne, cmp.gt, next_r);

  b.c().outputs = {b.x(b.x(out, b_o), b_a), b.x(cmp.ne, m_e), b.x(next_r, m_r)};
  return b.finish();
}

Bits eval_plain_wires(const Circuit& c, const Bits& gen, const Bits& eval) {
  if (gen.size() != c.gen_inputs.size() || eval.size() != c.eval_inputs.size()) {
    fail(Errc::usage, "input assignment does not cover every circuit input (expected " +
                          std::to_string(c.gen_inputs.size()) + "+" + std::to_string(c.eval_inputs.size()) +
                          " bits, got " + std::to_string(gen.size()) + "+" + std::to_string(eval.size()) + ")");
  }
  Bits w(c.num_wires, 0);
  for (size_t i = 0; i < gen.size(); ++i) w[c.gen_inputs[i]] = gen[i] & 1;
  for (size_t i = 0; i < eval.size(); ++i) w[c.eval_inputs[i]] = eval[i] & 1;
  for (const auto& g : c.gates) {
    switch (g.kind) {
      case GateKind::XOR: w[g.out] = w[g.a] ^ w[g.b]; break;
      case GateKind::AND: w[g.out] = w[g.a] & w[g.b]; break;
      case GateKind::OR: w[g.out] = w[g.a] | w[g.b]; break;
      case GateKind::NOT: w[g.out] = w[g.a] ^ 1; break;
    }
  }
  return w;
}

Bits eval_plain(const Circuit& c, const Bits& gen, const Bits& eval) {
  Bits w = eval_plain_wires(c, gen, eval);
  Bits out;
  out.reserve(c.outputs.size());
  for (uint32_t o : c.outputs) out.push_back(w[o]);
  return out;
}

namespace {

void push_value(Bits& out, uint32_t width, u128 value) {
  if (width < 128 && (value >> width) != 0) {
    fail(Errc::domain, "comparator input does not fit in " + std::to_string(width) + " bits");
  }
  for (uint32_t j = 0; j < width; ++j) out.push_back(static_cast<uint8_t>((value >> j) & 1));
}

}  // namespace

Bits comparator_gen_bits(uint32_t width, u128 value, bool mask_e, bool mask_g) {
  Bits out{0};
  push_value(out, width, value);
  out.push_back(mask_e);
  out.push_back(mask_g);
  return out;
}

Bits comparator_eval_bits(uint32_t width, u128 value, bool mask_e, bool mask_g) {
  Bits out;
  push_value(out, width, value);
  out.push_back(mask_e);
  out.push_back(mask_g);
  return out;
}

Bits fh_gen_bits(uint32_t width, const FhGenInput& in) {
  Bits out{0};
  push_value(out, width, in.value);
  for (bool v : {in.mask, in.coin, in.share_e, in.share_r, in.next_mask_e, in.next_mask_r}) out.push_back(v);
  return out;
}

Bits fh_eval_bits(uint32_t width, const FhEvalInput& in) {
  Bits out;
  push_value(out, width, in.value);
  for (bool v : {in.mask, in.coin, in.share_e, in.share_r}) out.push_back(v);
  return out;
}

}  // namespace oope::gc
