#include "circuits/garble.hpp"

#include <string>

#include <openssl/sha.h>

#include "common/error.hpp"

namespace oope::gc {

std::array<uint8_t, 16> Block::bytes() const {
  std::array<uint8_t, 16> out{};
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<uint8_t>(hi >> (56 - 8 * i));
    out[8 + i] = static_cast<uint8_t>(lo >> (56 - 8 * i));
  }
  return out;
}

Block Block::from_bytes(const uint8_t* p) {
  Block b;
  for (int i = 0; i < 8; ++i) {
    b.hi = b.hi << 8 | p[i];
    b.lo = b.lo << 8 | p[8 + i];
  }
  return b;
}

Block Block::random(Rng& rng) {
  std::array<uint8_t, 16> buf{};
  rng.fill(buf);
  return from_bytes(buf.data());
}

Block hash_block(const Block& label, uint64_t tweak) {
  uint8_t in[24];
  for (int i = 0; i < 8; ++i) in[i] = static_cast<uint8_t>(tweak >> (56 - 8 * i));
  auto lb = label.bytes();
  std::copy(lb.begin(), lb.end(), in + 8);
  uint8_t md[SHA256_DIGEST_LENGTH];
  SHA256(in, sizeof(in), md);
  return Block::from_bytes(md);
}

namespace {

constexpr uint64_t kOutputTweak = uint64_t{1} << 63;

}  // namespace

Garbling garble(const Circuit& c, Rng& rng) {
  Garbling g;
  g.delta = Block::random(rng);
  g.delta.lo |= 1;
  g.zero.assign(c.num_wires, Block{});
  for (uint32_t w : c.gen_inputs) g.zero[w] = Block::random(rng);
  for (uint32_t w : c.eval_inputs) g.zero[w] = Block::random(rng);
  g.tables.reserve(2 * c.nonlinear_gates());

  uint64_t gid = 0;
  for (const auto& gate : c.gates) {
    const Block& a0 = g.zero[gate.a];
    switch (gate.kind) {
      case GateKind::XOR:
        g.zero[gate.out] = a0 ^ g.zero[gate.b];
        break;
      case GateKind::NOT:
        g.zero[gate.out] = a0 ^ g.delta;
        break;
      case GateKind::AND:
      case GateKind::OR: {
        const Block& b0 = g.zero[gate.b];
        const Block a1 = a0 ^ g.delta;
        const Block b1 = b0 ^ g.delta;
        const bool pa = a0.lsb();
        const bool pb = b0.lsb();
        const uint64_t j0 = 2 * gid;
        const uint64_t j1 = 2 * gid + 1;
        ++gid;
        const Block ha0 = hash_block(a0, j0);
        const Block hb0 = hash_block(b0, j1);
        // Generator half.
        Block tg = ha0 ^ hash_block(a1, j0) ^ g.delta.masked(pb);
        Block wg = ha0 ^ tg.masked(pa);
        // Evaluator half.
        Block te = hb0 ^ hash_block(b1, j1) ^ a0;
        Block we = hb0 ^ (te ^ a0).masked(pb);
        g.tables.push_back(tg);
        g.tables.push_back(te);
        Block and0 = wg ^ we;
        g.zero[gate.out] = gate.kind == GateKind::AND ? and0 : and0 ^ a0 ^ b0;
        break;
      }
    }
  }

  g.decode.reserve(c.outputs.size());
  for (size_t i = 0; i < c.outputs.size(); ++i) {
    auto p = g.pair(c.outputs[i]);
    g.decode.push_back({hash_block(p[0], kOutputTweak | i), hash_block(p[1], kOutputTweak | i)});
  }
  return g;
}

GarbledPayload make_payload(const Circuit& c, const Garbling& g, const Bits& gen_bits) {
  if (gen_bits.size() != c.gen_inputs.size()) fail(Errc::usage, "generator input length mismatch");
  GarbledPayload p;
  p.circuit_id = c.id;
  p.width = c.width;
  p.gate_count = static_cast<uint32_t>(c.gates.size());
  p.tables = g.tables;
  p.gen_labels.reserve(gen_bits.size());
  for (size_t i = 0; i < gen_bits.size(); ++i) p.gen_labels.push_back(g.label(c.gen_inputs[i], gen_bits[i] & 1));
  p.decode = g.decode;
  return p;
}

Bytes GarbledPayload::serialize() const {
  ByteWriter w;
  w.u32(circuit_id);
  w.u32(width);
  w.u32(gate_count);
  for (const auto& b : tables) write_block(w, b);
  for (const auto& b : gen_labels) write_block(w, b);
  for (const auto& d : decode) {
    write_block(w, d[0]);
    write_block(w, d[1]);
  }
  return w.take();
}

GarbledPayload GarbledPayload::parse(std::span<const uint8_t> data, const Circuit& c) {
  ByteReader r(data);
  GarbledPayload p;
  p.circuit_id = r.u32();
  p.width = r.u32();
  p.gate_count = r.u32();
  if (p.circuit_id != c.id || p.width != c.width || p.gate_count != c.gates.size()) {
    fail(Errc::protocol, "garbled circuit header (id " + std::to_string(p.circuit_id) + ", width " +
                             std::to_string(p.width) + ") does not match the expected circuit");
  }
  const size_t records = 2 * c.nonlinear_gates() + c.gen_inputs.size() + 2 * c.outputs.size();
  if (r.remaining() != 16 * records) fail(Errc::protocol, "garbled circuit payload has the wrong length");
  p.tables.resize(2 * c.nonlinear_gates());
  for (auto& b : p.tables) b = read_block(r);
  p.gen_labels.resize(c.gen_inputs.size());
  for (auto& b : p.gen_labels) b = read_block(r);
  p.decode.resize(c.outputs.size());
  for (auto& d : p.decode) {
    d[0] = read_block(r);
    d[1] = read_block(r);
  }
  return p;
}

std::vector<Block> evaluate(const Circuit& c, const GarbledPayload& p, const std::vector<Block>& eval_labels) {
  if (eval_labels.size() != c.eval_inputs.size() || p.gen_labels.size() != c.gen_inputs.size() ||
      p.tables.size() != 2 * c.nonlinear_gates()) {
    fail(Errc::protocol, "garbled evaluation inputs do not match the circuit");
  }
  std::vector<Block> w(c.num_wires);
  for (size_t i = 0; i < c.gen_inputs.size(); ++i) w[c.gen_inputs[i]] = p.gen_labels[i];
  for (size_t i = 0; i < c.eval_inputs.size(); ++i) w[c.eval_inputs[i]] = eval_labels[i];

  uint64_t gid = 0;
  for (const auto& gate : c.gates) {
    const Block& a = w[gate.a];
    switch (gate.kind) {
      case GateKind::XOR:
        w[gate.out] = a ^ w[gate.b];
        break;
      case GateKind::NOT:
        w[gate.out] = a;
        break;
      case GateKind::AND:
      case GateKind::OR: {
        const Block& b = w[gate.b];
        const Block& tg = p.tables[2 * gid];
        const Block& te = p.tables[2 * gid + 1];
        Block wg = hash_block(a, 2 * gid) ^ tg.masked(a.lsb());
        Block we = hash_block(b, 2 * gid + 1) ^ (te ^ a).masked(b.lsb());
        ++gid;
        Block out = wg ^ we;
        w[gate.out] = gate.kind == GateKind::AND ? out : out ^ a ^ b;
        break;
      }
    }
  }
  std::vector<Block> out;
  out.reserve(c.outputs.size());
  for (uint32_t o : c.outputs) out.push_back(w[o]);
  return out;
}

Bits decode(const GarbledPayload& p, const std::vector<Block>& output_labels) {
  if (output_labels.size() != p.decode.size()) fail(Errc::protocol, "output label count mismatch");
  Bits out;
  out.reserve(output_labels.size());
  for (size_t i = 0; i < output_labels.size(); ++i) {
    Block h = hash_block(output_labels[i], kOutputTweak | i);
    if (h == p.decode[i][0]) {
      out.push_back(0);
    } else if (h == p.decode[i][1]) {
      out.push_back(1);
    } else {
      fail(Errc::integrity, "output label " + std::to_string(i) + " matches no decoding record");
    }
  }
  return out;
}

Bits Evaluation::run(const Circuit& c, const std::vector<Block>& eval_labels) {
  if (used_) fail(Errc::protocol, "garbled circuit instance was already evaluated");
  used_ = true;
  return decode(payload_, evaluate(c, payload_, eval_labels));
}

}  // namespace oope::gc
