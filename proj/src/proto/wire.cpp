#include "proto/wire.hpp"

namespace oope::proto {

namespace {

void write_opt_mpz(ByteWriter& w, const std::optional<mpz_class>& v) {
  w.u8(v ? 1 : 0);
  if (v) w.mpz(*v);
}

std::optional<mpz_class> read_opt_mpz(ByteReader& r) {
  uint8_t flag = r.u8();
  if (flag > 1) fail(Errc::protocol, "malformed optional field");
  if (!flag) return std::nullopt;
  return r.mpz();
}

void write_ct(ByteWriter& w, const hom::Ciphertext& c, const hom::PublicKey& pk) {
  hom::write_ciphertext_fixed(w, c, pk.ciphertext_width());
}

}  // namespace

Bytes encode(const SessionRequest& m) {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(m.op));
  w.str(m.column);
  write_opt_mpz(w, m.da_n);
  w.blob(m.body);
  return w.take();
}

SessionRequest decode_request(std::span<const uint8_t> data) {
  ByteReader r(data);
  SessionRequest m;
  uint8_t op = r.u8();
  if (op < 1 || op > 3) fail(Errc::protocol, "unknown session operation " + std::to_string(op));
  m.op = static_cast<Op>(op);
  m.column = r.str();
  m.da_n = read_opt_mpz(r);
  m.body = r.blob();
  r.expect_done("SESSION_REQUEST");
  return m;
}

Bytes encode(const SessionJoin& m) {
  ByteWriter w;
  w.str(m.column);
  write_opt_mpz(w, m.da_n);
  return w.take();
}

SessionJoin decode_join(std::span<const uint8_t> data) {
  ByteReader r(data);
  SessionJoin m;
  m.column = r.str();
  m.da_n = read_opt_mpz(r);
  r.expect_done("SESSION_JOIN");
  return m;
}

Bytes encode(const SessionStart& m) {
  ByteWriter w;
  w.str(m.column);
  w.u32(m.h);
  return w.take();
}

SessionStart decode_start(std::span<const uint8_t> data) {
  ByteReader r(data);
  SessionStart m;
  m.column = r.str();
  m.h = r.u32();
  r.expect_done("SESSION_START");
  return m;
}

uint8_t encode(const Shares& s) {
  return static_cast<uint8_t>(s.mask_e | s.mask_g << 1 | s.share_e << 2 | s.share_g << 3);
}

Shares decode_shares(std::span<const uint8_t> data) {
  if (data.size() != 1 || (data[0] & 0xf0)) fail(Errc::protocol, "malformed SHARES payload");
  const uint8_t b = data[0];
  return {(b & 1) != 0, (b & 2) != 0, (b & 4) != 0, (b & 8) != 0};
}

Bytes encode(const RandomizedNode& m, const hom::PublicKey& pk) {
  ByteWriter w;
  write_ct(w, m.node, pk);
  if (m.ped) write_ct(w, *m.ped, pk);
  return w.take();
}

RandomizedNode decode_node(std::span<const uint8_t> data, bool pedersen) {
  ByteReader r(data);
  RandomizedNode m;
  m.node = hom::read_ciphertext(r);
  if (pedersen) m.ped = hom::read_ciphertext(r);
  r.expect_done("RANDOMIZED_NODE");
  return m;
}

Bytes encode(const IntegrityTag& m) {
  ByteWriter w;
  if (m.tag.dl_mac) {
    w.u8(1);
    w.mpz(*m.tag.dl_mac);
  } else if (m.tag.ped_commit) {
    w.u8(2);
    w.mpz(*m.tag.ped_commit);
    w.mpz(m.r2);
  } else {
    fail(Errc::integrity, "node carries no integrity tag");
  }
  return w.take();
}

IntegrityTag decode_tag(std::span<const uint8_t> data, integ::Scheme scheme) {
  ByteReader r(data);
  IntegrityTag m;
  uint8_t kind = r.u8();
  if (kind != static_cast<uint8_t>(scheme)) fail(Errc::protocol, "integrity tag of the wrong scheme");
  if (scheme == integ::Scheme::dlmac) {
    m.tag.dl_mac = r.mpz();
  } else {
    m.tag.ped_commit = r.mpz();
    m.r2 = r.mpz();
  }
  r.expect_done("INTEGRITY_TAG");
  return m;
}

Bytes encode(const CipherUpload& m, const hom::PublicKey& pk, integ::Scheme scheme) {
  ByteWriter w;
  write_ct(w, m.cipher, pk);
  if (scheme == integ::Scheme::dlmac) {
    if (!m.tag.dl_mac) fail(Errc::usage, "upload lacks its MAC");
    w.mpz(*m.tag.dl_mac);
  } else if (scheme == integ::Scheme::pedersen) {
    if (!m.tag.ped_commit || !m.tag.ped_a) fail(Errc::usage, "upload lacks its commitment");
    w.mpz(*m.tag.ped_commit);
    write_ct(w, *m.tag.ped_a, pk);
  }
  return w.take();
}

CipherUpload decode_upload(std::span<const uint8_t> data, integ::Scheme scheme) {
  ByteReader r(data);
  CipherUpload m;
  m.cipher = hom::read_ciphertext(r);
  if (scheme == integ::Scheme::dlmac) {
    m.tag.dl_mac = r.mpz();
  } else if (scheme == integ::Scheme::pedersen) {
    m.tag.ped_commit = r.mpz();
    m.tag.ped_a = hom::read_ciphertext(r);
  }
  r.expect_done("CIPHER_UPLOAD");
  return m;
}

Bytes encode(const BoundsUpload& m, const hom::PublicKey& pk) {
  ByteWriter w;
  write_ct(w, m.fh_min, pk);
  write_ct(w, m.fh_max, pk);
  return w.take();
}

BoundsUpload decode_bounds(std::span<const uint8_t> data) {
  ByteReader r(data);
  BoundsUpload m;
  m.fh_min = hom::read_ciphertext(r);
  m.fh_max = hom::read_ciphertext(r);
  r.expect_done("CIPHER_UPLOAD bounds");
  return m;
}

Bytes encode(const MinMaxTriple& m, const hom::PublicKey& do_pk, const hom::PublicKey& da_pk) {
  ByteWriter w;
  write_ct(w, m.d, do_pk);
  write_ct(w, m.y_da, da_pk);
  write_ct(w, m.bound_do, do_pk);
  return w.take();
}

MinMaxTriple decode_triple(std::span<const uint8_t> data) {
  ByteReader r(data);
  MinMaxTriple m;
  m.d = hom::read_ciphertext(r);
  m.y_da = hom::read_ciphertext(r);
  m.bound_do = hom::read_ciphertext(r);
  r.expect_done("MINMAX_TRIPLE");
  return m;
}

Bytes encode(const SessionEnd& m) {
  ByteWriter w;
  w.order(m.y);
  w.u8(static_cast<uint8_t>(m.existing | m.rebalanced << 1));
  w.u32(m.rounds);
  return w.take();
}

SessionEnd decode_end(std::span<const uint8_t> data) {
  ByteReader r(data);
  SessionEnd m;
  m.y = r.order();
  uint8_t flags = r.u8();
  m.existing = flags & 1;
  m.rebalanced = flags & 2;
  m.rounds = r.u32();
  r.expect_done("SESSION_END");
  return m;
}

Bytes encode_remap(const std::string& column, const ope::Remap& remap) {
  ByteWriter w;
  w.str(column);
  w.u64(remap.size());
  for (const auto& [a, b] : remap) {
    w.order(a);
    w.order(b);
  }
  return w.take();
}

std::pair<std::string, ope::Remap> decode_remap(std::span<const uint8_t> data) {
  ByteReader r(data);
  std::string column = r.str();
  uint64_t n = r.u64();
  if (n > r.remaining() / 32) fail(Errc::protocol, "TABLE_REMAP count exceeds payload");
  ope::Remap remap;
  remap.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    Order a = r.order();
    Order b = r.order();
    if (!remap.empty() && !(remap.back().first < a)) fail(Errc::protocol, "TABLE_REMAP not sorted");
    remap.emplace_back(a, b);
  }
  r.expect_done("TABLE_REMAP");
  return {column, std::move(remap)};
}

Bytes encode(const LinkInfo& m) {
  ByteWriter w;
  w.mpz(m.do_n);
  w.u8(static_cast<uint8_t>(m.scheme));
  if (m.scheme != integ::Scheme::off) w.blob(m.params.serialize());
  return w.take();
}

LinkInfo decode_link_info(std::span<const uint8_t> data) {
  ByteReader r(data);
  LinkInfo m;
  m.do_n = r.mpz();
  uint8_t s = r.u8();
  if (s > 2) fail(Errc::protocol, "unknown integrity scheme in LINK_INFO");
  m.scheme = static_cast<integ::Scheme>(s);
  if (m.scheme != integ::Scheme::off) m.params = integ::MacParams::parse(r.blob());
  r.expect_done("LINK_INFO");
  return m;
}

Bytes encode_order(Order y) {
  ByteWriter w;
  w.order(y);
  return w.take();
}

Order decode_order(std::span<const uint8_t> data) {
  ByteReader r(data);
  Order y = r.order();
  r.expect_done("order");
  return y;
}

}  // namespace oope::proto
