#pragma once

#include <array>
#include <span>
#include <vector>

#include "circuits/block.hpp"
#include "circuits/circuit.hpp"

// Free-XOR garbling with half-gate AND tables. OR gates cost one AND table
// (a | b = a ^ b ^ ab), NOT gates are free.
namespace oope::gc {

using LabelPair = std::array<Block, 2>;

// The generator's secret view: encoding information e and decoding information d.
struct Garbling {
  Block delta;
  std::vector<Block> zero;  // zero label of every wire
  std::vector<Block> tables;
  std::vector<LabelPair> decode;

  LabelPair pair(uint32_t wire) const { return {zero[wire], zero[wire] ^ delta}; }
  Block label(uint32_t wire, bool bit) const { return bit ? zero[wire] ^ delta : zero[wire]; }
};

Garbling garble(const Circuit& c, Rng& rng);

// What the generator sends to the evaluator.
// Wire format: circuit id, width, gate count (u32 big-endian each), then 16-byte
// records: garbled tables, the generator's active input labels, two decoding
// records per output wire.
struct GarbledPayload {
  uint32_t circuit_id = 0;
  uint32_t width = 0;
  uint32_t gate_count = 0;
  std::vector<Block> tables;
  std::vector<Block> gen_labels;
  std::vector<LabelPair> decode;

  Bytes serialize() const;
  // Validates the header and record counts against the expected circuit.
  static GarbledPayload parse(std::span<const uint8_t> data, const Circuit& c);
};

GarbledPayload make_payload(const Circuit& c, const Garbling& g, const Bits& gen_bits);

// Evaluation labels -> output labels.
std::vector<Block> evaluate(const Circuit& c, const GarbledPayload& p, const std::vector<Block>& eval_labels);
// Maps each output label to its bit; a label matching neither decoding record raises
// an integrity error.
Bits decode(const GarbledPayload& p, const std::vector<Block>& output_labels);

// Single-use wrapper: a payload can be evaluated exactly once.
class Evaluation {
 public:
  explicit Evaluation(GarbledPayload p) : payload_(std::move(p)) {}
  Bits run(const Circuit& c, const std::vector<Block>& eval_labels);
  bool used() const { return used_; }

 private:
  GarbledPayload payload_;
  bool used_ = false;
};

}  // namespace oope::gc
