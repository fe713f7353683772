#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "ope/state.hpp"

// Table file layout (all integers big-endian):
//   header   magic "OOPETBL1", version u16, l u16, log2(M) u16, mode u8, integrity u8,
//            key_bits u32, group_bytes u32, M (16 bytes), key id (32 bytes), count u64
//   entries  order (16 bytes), ciphertext record, [fh_min record, fh_max record],
//            [integrity tag]
//   da tags  count u64, then (order, session id) pairs
//   trailer  SHA-256 over everything before it
// A ciphertext record is a 4-byte length followed by the residue left-padded to
// 2 * key_bits / 8 bytes; the key id lives in the header only.
namespace oope::ope {

constexpr uint16_t kTableVersion = 1;
constexpr size_t kTableHeaderBytes = 80;
constexpr size_t kTableTrailerBytes = 32;

struct TableHeader {
  uint16_t version = kTableVersion;
  uint32_t l = 32;
  uint32_t log2m = 0;  // bit length of M
  Mode mode = Mode::det;
  integ::Scheme integrity = integ::Scheme::off;
  uint32_t key_bits = 0;
  uint32_t group_bytes = 0;  // byte width of integrity group elements
  Order M;
  hom::KeyId key_id{};
  uint64_t count = 0;
};

TableHeader make_header(const OpeTable& t, const hom::PublicKey& pk, integ::Scheme integrity,
                        const integ::MacParams* params);

class ByteSink {
 public:
  virtual ~ByteSink() = default;
  virtual void write(std::span<const uint8_t> data) = 0;
};

class OstreamSink : public ByteSink {
 public:
  explicit OstreamSink(std::ostream& os) : os_(os) {}
  void write(std::span<const uint8_t> data) override;

 private:
  std::ostream& os_;
};

// Discards bytes, only counts them.
class CountingSink : public ByteSink {
 public:
  void write(std::span<const uint8_t> data) override { bytes_ += data.size(); }
  uint64_t bytes() const { return bytes_; }

 private:
  uint64_t bytes_ = 0;
};

// Streams a table without holding it in memory. Exactly header.count entries must be
// added before finish().
class TableWriter {
 public:
  TableWriter(ByteSink& sink, const TableHeader& header);
  ~TableWriter();

  void add(const OpeEntry& e);
  void finish(const std::vector<std::pair<Order, SessionId>>& da_tags = {});

  uint64_t bytes_written() const { return written_; }

 private:
  void emit(std::span<const uint8_t> data);

  struct Hasher;
  ByteSink& sink_;
  TableHeader header_;
  std::unique_ptr<Hasher> hasher_;
  uint64_t added_ = 0;
  uint64_t written_ = 0;
  size_t cipher_width_;
  Bytes scratch_;
};

void save_table(std::ostream& os, const OpeTable& t, const hom::PublicKey& pk, integ::Scheme integrity,
                const integ::MacParams* params);
// Reuses the key and integrity fields of an earlier header; the count is refreshed.
void save_table(std::ostream& os, const OpeTable& t, TableHeader header);

struct LoadedTable {
  TableHeader header;
  OpeTable table;
};

// Verifies the trailer checksum (io error on mismatch) and the record widths.
LoadedTable load_table(std::istream& is);
// Table plus a balanced tree.
ServerState load_server_state(std::istream& is, TableHeader* header = nullptr);

// Byte accounting. Payload is the information content 2 * key_bits + log2(M) bits per
// entry; framing is the remaining bytes of each deterministic entry record (order
// padding and ciphertext length prefix).
struct StorageReport {
  uint64_t entries = 0;
  uint64_t payload_bits = 0;
  uint64_t framing_bits = 0;
  uint64_t extra_bytes = 0;  // FH ciphertexts and integrity tags
  uint64_t fixed_bytes = 0;  // header, DA tag section, trailer
  uint64_t total_bytes = 0;

  uint64_t payload_bytes() const { return payload_bits / 8; }
  uint64_t framing_bytes() const { return framing_bits / 8; }
};

size_t entry_record_bytes(const TableHeader& h);
StorageReport storage_report(const TableHeader& h, uint64_t da_tags = 0);

}  // namespace oope::ope
