#include "ope/persist.hpp"

#include <istream>
#include <iterator>
#include <ostream>
#include <string>

#include <openssl/evp.h>

namespace oope::ope {

namespace {

constexpr char kMagic[8] = {'O', 'O', 'P', 'E', 'T', 'B', 'L', '1'};

size_t cipher_width(uint32_t key_bits) { return (2 * static_cast<size_t>(key_bits) + 7) / 8; }

void write_cipher(ByteWriter& w, const hom::Ciphertext& c, const TableHeader& h) {
  if (c.key_id != h.key_id) fail(Errc::usage, "table entry encrypted under a different key");
  w.blob(mpz_to_fixed(c.value, cipher_width(h.key_bits)));
}

hom::Ciphertext read_cipher(ByteReader& r, const TableHeader& h) {
  Bytes b = r.blob();
  if (b.size() != cipher_width(h.key_bits)) fail(Errc::io, "ciphertext record has the wrong width");
  return {mpz_from_bytes(b), h.key_id};
}

void write_header(ByteWriter& w, const TableHeader& h) {
  w.raw(std::span(reinterpret_cast<const uint8_t*>(kMagic), sizeof(kMagic)));
  w.u16(h.version);
  w.u16(static_cast<uint16_t>(h.l));
  w.u16(static_cast<uint16_t>(h.log2m));
  w.u8(static_cast<uint8_t>(h.mode));
  w.u8(static_cast<uint8_t>(h.integrity));
  w.u32(h.key_bits);
  w.u32(h.group_bytes);
  w.order(h.M);
  w.raw(h.key_id);
  w.u64(h.count);
}

TableHeader read_header(ByteReader& r) {
  auto magic = r.raw(sizeof(kMagic));
  if (!std::equal(magic.begin(), magic.end(), kMagic)) fail(Errc::io, "not an OPE table file");
  TableHeader h;
  h.version = r.u16();
  if (h.version != kTableVersion) fail(Errc::io, "unsupported table version " + std::to_string(h.version));
  h.l = r.u16();
  h.log2m = r.u16();
  uint8_t mode = r.u8();
  uint8_t integrity = r.u8();
  if (mode > 1 || integrity > 2) fail(Errc::io, "corrupt table header flags");
  h.mode = static_cast<Mode>(mode);
  h.integrity = static_cast<integ::Scheme>(integrity);
  h.key_bits = r.u32();
  h.group_bytes = r.u32();
  h.M = r.order();
  h.key_id = r.array<32>();
  h.count = r.u64();
  if (h.M.bit_length() != static_cast<int>(h.log2m)) fail(Errc::io, "table header M and log2(M) disagree");
  return h;
}

}  // namespace

TableHeader make_header(const OpeTable& t, const hom::PublicKey& pk, integ::Scheme integrity,
                        const integ::MacParams* params) {
  TableHeader h;
  h.l = t.l();
  h.log2m = static_cast<uint32_t>(t.M().bit_length());
  h.mode = t.mode();
  h.integrity = integrity;
  h.key_bits = static_cast<uint32_t>(pk.key_bits());
  if (integrity != integ::Scheme::off) {
    if (!params || !params->present()) fail(Errc::usage, "integrity tags need the group parameters to size records");
    h.group_bytes = static_cast<uint32_t>((mpz_sizeinbase(params->p.get_mpz_t(), 2) + 7) / 8);
  }
  h.M = t.M();
  h.key_id = pk.id();
  h.count = t.size();
  return h;
}

void OstreamSink::write(std::span<const uint8_t> data) {
  os_.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!os_) fail(Errc::io, "table write failed");
}

struct TableWriter::Hasher {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  Hasher() {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) fail(Errc::internal, "sha256 init failed");
  }
  ~Hasher() { EVP_MD_CTX_free(ctx); }
};

TableWriter::TableWriter(ByteSink& sink, const TableHeader& header)
    : sink_(sink), header_(header), hasher_(std::make_unique<Hasher>()), cipher_width_(cipher_width(header.key_bits)) {
  ByteWriter w(scratch_);
  write_header(w, header_);
  emit(scratch_);
}

TableWriter::~TableWriter() = default;

void TableWriter::emit(std::span<const uint8_t> data) {
  EVP_DigestUpdate(hasher_->ctx, data.data(), data.size());
  sink_.write(data);
  written_ += data.size();
}

void TableWriter::add(const OpeEntry& e) {
  if (added_ == header_.count) fail(Errc::usage, "more entries than announced in the table header");
  scratch_.clear();
  ByteWriter w(scratch_);
  w.order(e.order);
  write_cipher(w, e.cipher, header_);
  if (header_.mode == Mode::fh) {
    if (!e.fh_min || !e.fh_max) fail(Errc::usage, "frequency-hiding entry lacks c_min/c_max");
    write_cipher(w, *e.fh_min, header_);
    write_cipher(w, *e.fh_max, header_);
  }
  switch (header_.integrity) {
    case integ::Scheme::off:
      break;
    case integ::Scheme::dlmac:
      if (!e.tag.dl_mac) fail(Errc::usage, "entry lacks its MAC");
      w.raw(mpz_to_fixed(*e.tag.dl_mac, header_.group_bytes));
      break;
    case integ::Scheme::pedersen:
      if (!e.tag.ped_commit || !e.tag.ped_a) fail(Errc::usage, "entry lacks its commitment");
      w.raw(mpz_to_fixed(*e.tag.ped_commit, header_.group_bytes));
      write_cipher(w, *e.tag.ped_a, header_);
      break;
  }
  emit(scratch_);
  ++added_;
}

void TableWriter::finish(const std::vector<std::pair<Order, SessionId>>& da_tags) {
  if (added_ != header_.count) fail(Errc::usage, "fewer entries than announced in the table header");
  scratch_.clear();
  ByteWriter w(scratch_);
  w.u64(da_tags.size());
  for (const auto& [y, sid] : da_tags) {
    w.order(y);
    w.raw(sid);
  }
  emit(scratch_);
  Digest d{};
  unsigned len = 0;
  EVP_DigestFinal_ex(hasher_->ctx, d.data(), &len);
  sink_.write(d);
  written_ += d.size();
}

void save_table(std::ostream& os, const OpeTable& t, const hom::PublicKey& pk, integ::Scheme integrity,
                const integ::MacParams* params) {
  save_table(os, t, make_header(t, pk, integrity, params));
}

void save_table(std::ostream& os, const OpeTable& t, TableHeader header) {
  if (header.l != t.l() || header.M != t.M() || header.mode != t.mode()) {
    fail(Errc::usage, "table header describes a different table");
  }
  header.count = t.size();
  OstreamSink sink(os);
  TableWriter w(sink, header);
  std::vector<std::pair<Order, SessionId>> da;
  for (const auto& [y, e] : t.entries()) {
    w.add(e);
    if (e.da_session) da.emplace_back(y, *e.da_session);
  }
  w.finish(da);
}

LoadedTable load_table(std::istream& is) {
  Bytes data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (data.size() < kTableHeaderBytes + kTableTrailerBytes) fail(Errc::io, "table file is truncated");
  std::span<const uint8_t> body(data.data(), data.size() - kTableTrailerBytes);
  Digest expect = sha256(body);
  if (!std::equal(expect.begin(), expect.end(), data.end() - kTableTrailerBytes)) {
    fail(Errc::io, "table file checksum mismatch");
  }
  try {
    ByteReader r(body);
    LoadedTable out;
    out.header = read_header(r);
    const auto& h = out.header;
    out.table = OpeTable(h.M, h.l, h.mode);
    for (uint64_t i = 0; i < h.count; ++i) {
      OpeEntry e;
      e.order = r.order();
      e.cipher = read_cipher(r, h);
      if (h.mode == Mode::fh) {
        e.fh_min = read_cipher(r, h);
        e.fh_max = read_cipher(r, h);
      }
      if (h.integrity == integ::Scheme::dlmac) {
        e.tag.dl_mac = mpz_from_bytes(r.raw(h.group_bytes));
      } else if (h.integrity == integ::Scheme::pedersen) {
        e.tag.ped_commit = mpz_from_bytes(r.raw(h.group_bytes));
        e.tag.ped_a = read_cipher(r, h);
      }
      out.table.insert(std::move(e));
    }
    uint64_t tags = r.u64();
    auto& entries = out.table.mutable_entries();
    for (uint64_t i = 0; i < tags; ++i) {
      Order y = r.order();
      SessionId sid = r.array<16>();
      auto it = entries.find(y);
      if (it == entries.end()) fail(Errc::io, "DA tag refers to a missing entry");
      it->second.da_session = sid;
    }
    r.expect_done("table file");
    return out;
  } catch (const Error& e) {
    if (e.code() == Errc::io) throw;
    fail(Errc::io, std::string("corrupt table file: ") + e.what());
  }
}

ServerState load_server_state(std::istream& is, TableHeader* header) {
  LoadedTable lt = load_table(is);
  if (header) *header = lt.header;
  ServerState s;
  s.table = std::move(lt.table);
  std::vector<Order> orders;
  orders.reserve(s.table.size());
  for (const auto& [y, e] : s.table.entries()) orders.push_back(y);
  s.tree.build_balanced(orders);
  return s;
}

size_t entry_record_bytes(const TableHeader& h) {
  const size_t rec = 4 + cipher_width(h.key_bits);
  size_t n = 16 + rec;
  if (h.mode == Mode::fh) n += 2 * rec;
  if (h.integrity == integ::Scheme::dlmac) n += h.group_bytes;
  if (h.integrity == integ::Scheme::pedersen) n += h.group_bytes + rec;
  return n;
}

StorageReport storage_report(const TableHeader& h, uint64_t da_tags) {
  StorageReport s;
  s.entries = h.count;
  const uint64_t base_bits = 8 * (16 + 4 + cipher_width(h.key_bits));
  const uint64_t payload_per = 2 * uint64_t{h.key_bits} + h.log2m;
  s.payload_bits = h.count * payload_per;
  s.framing_bits = h.count * (base_bits - payload_per);
  s.extra_bytes = h.count * (entry_record_bytes(h) - base_bits / 8);
  s.fixed_bytes = kTableHeaderBytes + 8 + 32 * da_tags + kTableTrailerBytes;
  s.total_bytes = (s.payload_bits + s.framing_bits) / 8 + s.extra_bytes + s.fixed_bytes;
  return s;
}

}  // namespace oope::ope
