#include "circuits/ot.hpp"

#include <string>

#include <openssl/bn.h>
#include <openssl/ec.h>
#include <openssl/obj_mac.h>

#include "common/error.hpp"

namespace oope::gc {

namespace {

constexpr size_t kPointBytes = 65;  // uncompressed P-256 point
constexpr uint64_t kOtTweak = uint64_t{1} << 62;

struct BnDeleter {
  void operator()(BIGNUM* p) const { BN_clear_free(p); }
};
struct PointDeleter {
  void operator()(EC_POINT* p) const { EC_POINT_free(p); }
};
struct GroupDeleter {
  void operator()(EC_GROUP* p) const { EC_GROUP_free(p); }
};
struct CtxDeleter {
  void operator()(BN_CTX* p) const { BN_CTX_free(p); }
};
using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using PointPtr = std::unique_ptr<EC_POINT, PointDeleter>;
using GroupPtr = std::unique_ptr<EC_GROUP, GroupDeleter>;
using CtxPtr = std::unique_ptr<BN_CTX, CtxDeleter>;

void check(int ok, const char* what) {
  if (ok != 1) fail(Errc::internal, std::string("elliptic-curve operation failed: ") + what);
}

struct Curve {
  GroupPtr group{EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1)};
  CtxPtr ctx{BN_CTX_new()};

  Curve() {
    if (!group || !ctx) fail(Errc::internal, "cannot initialise P-256");
  }

  PointPtr point() const { return PointPtr(EC_POINT_new(group.get())); }

  BnPtr random_scalar(Rng& rng) const {
    const BIGNUM* order = EC_GROUP_get0_order(group.get());
    BnPtr k(BN_new());
    std::array<uint8_t, 48> buf{};
    do {
      rng.fill(buf);
      BN_bin2bn(buf.data(), static_cast<int>(buf.size()), k.get());
      check(BN_nnmod(k.get(), k.get(), order, ctx.get()), "reduce scalar");
    } while (BN_is_zero(k.get()));
    return k;
  }

  // out = k*G + m*P (either term may be absent).
  PointPtr mul(const BIGNUM* k, const EC_POINT* p, const BIGNUM* m) const {
    PointPtr out = point();
    check(EC_POINT_mul(group.get(), out.get(), k, p, m, ctx.get()), "multiply");
    return out;
  }

  Bytes encode(const EC_POINT* p) const {
    Bytes out(kPointBytes);
    size_t n = EC_POINT_point2oct(group.get(), p, POINT_CONVERSION_UNCOMPRESSED, out.data(), out.size(), ctx.get());
    if (n != kPointBytes) fail(Errc::internal, "point encoding failed");
    return out;
  }

  PointPtr decode(std::span<const uint8_t> data) const {
    PointPtr p = point();
    if (data.size() != kPointBytes ||
        EC_POINT_oct2point(group.get(), p.get(), data.data(), data.size(), ctx.get()) != 1 ||
        EC_POINT_is_at_infinity(group.get(), p.get()) ||
        EC_POINT_is_on_curve(group.get(), p.get(), ctx.get()) != 1) {
      fail(Errc::protocol, "malformed group element in oblivious transfer");
    }
    return p;
  }
};

OtKey derive_key(size_t index, const Bytes& a, const Bytes& b, const Bytes& shared) {
  ByteWriter w;
  w.str("co-ot");
  w.u64(index);
  w.raw(a);
  w.raw(b);
  w.raw(shared);
  return sha256(w.buf());
}

size_t row_bytes(size_t m) { return (m + 7) / 8; }

bool get_bit(const uint8_t* row, size_t j) { return (row[j / 8] >> (j % 8)) & 1; }

void set_block_bit(Block& b, size_t i, bool v) {
  if (!v) return;
  if (i < 64) {
    b.lo |= uint64_t{1} << i;
  } else {
    b.hi |= uint64_t{1} << (i - 64);
  }
}

// Column matrix (128 rows of m bits) to m 128-bit row blocks.
std::vector<Block> transpose(const std::vector<Bytes>& cols, size_t m) {
  std::vector<Block> rows(m);
  for (size_t i = 0; i < cols.size(); ++i) {
    const uint8_t* col = cols[i].data();
    for (size_t j = 0; j < m; ++j) set_block_bit(rows[j], i, get_bit(col, j));
  }
  return rows;
}

Bytes pack_bits(const std::vector<uint8_t>& bits) {
  Bytes out(row_bytes(bits.size()), 0);
  for (size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] & 1) out[j / 8] |= static_cast<uint8_t>(1u << (j % 8));
  }
  return out;
}

}  // namespace

struct BaseOtSender::Impl {
  Curve curve;
  BnPtr a;
  PointPtr big_a;
  Bytes a_bytes;
};

BaseOtSender::BaseOtSender() : impl_(std::make_unique<Impl>()) {}
BaseOtSender::~BaseOtSender() = default;
BaseOtSender::BaseOtSender(BaseOtSender&&) noexcept = default;
BaseOtSender& BaseOtSender::operator=(BaseOtSender&&) noexcept = default;

Bytes BaseOtSender::first_message(Rng& rng) {
  auto& s = *impl_;
  s.a = s.curve.random_scalar(rng);
  s.big_a = s.curve.mul(s.a.get(), nullptr, nullptr);
  s.a_bytes = s.curve.encode(s.big_a.get());
  return s.a_bytes;
}

std::vector<std::array<OtKey, 2>> BaseOtSender::finish(std::span<const uint8_t> reply, size_t count) {
  auto& s = *impl_;
  if (!s.a) fail(Errc::usage, "base OT sender has not sent its first message");
  ByteReader r(reply);
  uint32_t n = r.u32();
  if (n != count) fail(Errc::protocol, "base OT reply carries " + std::to_string(n) + " points, expected " +
                                           std::to_string(count));
  if (r.remaining() != count * kPointBytes) fail(Errc::protocol, "base OT reply has the wrong length");

  PointPtr neg_a = s.curve.point();
  check(EC_POINT_copy(neg_a.get(), s.big_a.get()), "copy");
  check(EC_POINT_invert(s.curve.group.get(), neg_a.get(), s.curve.ctx.get()), "invert");

  std::vector<std::array<OtKey, 2>> keys(count);
  for (size_t i = 0; i < count; ++i) {
    auto raw = r.raw(kPointBytes);
    Bytes b_bytes(raw.begin(), raw.end());
    PointPtr b = s.curve.decode(raw);
    PointPtr k0 = s.curve.mul(nullptr, b.get(), s.a.get());
    PointPtr diff = s.curve.point();
    check(EC_POINT_add(s.curve.group.get(), diff.get(), b.get(), neg_a.get(), s.curve.ctx.get()), "add");
    PointPtr k1 = s.curve.mul(nullptr, diff.get(), s.a.get());
    keys[i][0] = derive_key(i, s.a_bytes, b_bytes, s.curve.encode(k0.get()));
    keys[i][1] = derive_key(i, s.a_bytes, b_bytes, s.curve.encode(k1.get()));
  }
  return keys;
}

struct BaseOtReceiver::Impl {
  Curve curve;
};

BaseOtReceiver::BaseOtReceiver() : impl_(std::make_unique<Impl>()) {}
BaseOtReceiver::~BaseOtReceiver() = default;
BaseOtReceiver::BaseOtReceiver(BaseOtReceiver&&) noexcept = default;
BaseOtReceiver& BaseOtReceiver::operator=(BaseOtReceiver&&) noexcept = default;

Bytes BaseOtReceiver::respond(std::span<const uint8_t> first, const std::vector<uint8_t>& choices, Rng& rng) {
  auto& c = impl_->curve;
  PointPtr a = c.decode(first);
  Bytes a_bytes(first.begin(), first.end());
  ByteWriter w;
  w.u32(static_cast<uint32_t>(choices.size()));
  keys_.clear();
  keys_.reserve(choices.size());
  for (size_t i = 0; i < choices.size(); ++i) {
    BnPtr b = c.random_scalar(rng);
    PointPtr big_b = c.mul(b.get(), nullptr, nullptr);
    if (choices[i] & 1) {
      check(EC_POINT_add(c.group.get(), big_b.get(), big_b.get(), a.get(), c.ctx.get()), "add");
    }
    Bytes b_bytes = c.encode(big_b.get());
    PointPtr shared = c.mul(nullptr, a.get(), b.get());
    keys_.push_back(derive_key(i, a_bytes, b_bytes, c.encode(shared.get())));
    w.raw(b_bytes);
  }
  return w.take();
}

OtExtSender::OtExtSender(const std::vector<uint8_t>& s, const std::vector<OtKey>& keys) : s_(s) {
  if (s.size() != kBaseOts || keys.size() != kBaseOts) fail(Errc::usage, "OT extension needs 128 base OTs");
  for (size_t i = 0; i < kBaseOts; ++i) set_block_bit(s_block_, i, s[i] & 1);
  prg_.reserve(kBaseOts);
  for (const auto& k : keys) prg_.emplace_back(k);
}

OtExtSender::~OtExtSender() = default;
OtExtSender::OtExtSender(OtExtSender&&) noexcept = default;
OtExtSender& OtExtSender::operator=(OtExtSender&&) noexcept = default;

Bytes OtExtSender::respond(std::span<const uint8_t> request, const std::vector<LabelPair>& pairs) {
  ByteReader r(request);
  const size_t m = r.u32();
  if (m != pairs.size()) {
    fail(Errc::protocol, "OT request covers " + std::to_string(m) + " transfers, sender has " +
                             std::to_string(pairs.size()) + " label pairs");
  }
  const size_t rb = row_bytes(m);
  if (r.remaining() != kBaseOts * rb) fail(Errc::protocol, "OT request has the wrong length");

  std::vector<Bytes> q(kBaseOts, Bytes(rb));
  for (size_t i = 0; i < kBaseOts; ++i) {
    prg_[i].fill(q[i]);
    auto u = r.raw(rb);
    if (s_[i] & 1) {
      for (size_t b = 0; b < rb; ++b) q[i][b] ^= u[b];
    }
  }
  std::vector<Block> rows = transpose(q, m);
  ByteWriter w;
  w.u32(static_cast<uint32_t>(m));
  for (size_t j = 0; j < m; ++j) {
    const uint64_t tweak = kOtTweak | (counter_ + j);
    write_block(w, pairs[j][0] ^ hash_block(rows[j], tweak));
    write_block(w, pairs[j][1] ^ hash_block(rows[j] ^ s_block_, tweak));
  }
  counter_ += m;
  return w.take();
}

OtExtReceiver::OtExtReceiver(const std::vector<std::array<OtKey, 2>>& keys) {
  if (keys.size() != kBaseOts) fail(Errc::usage, "OT extension needs 128 base OTs");
  prg0_.reserve(kBaseOts);
  prg1_.reserve(kBaseOts);
  for (const auto& k : keys) {
    prg0_.emplace_back(k[0]);
    prg1_.emplace_back(k[1]);
  }
}

OtExtReceiver::~OtExtReceiver() = default;
OtExtReceiver::OtExtReceiver(OtExtReceiver&&) noexcept = default;
OtExtReceiver& OtExtReceiver::operator=(OtExtReceiver&&) noexcept = default;

Bytes OtExtReceiver::request(const std::vector<uint8_t>& choices) {
  const size_t m = choices.size();
  const size_t rb = row_bytes(m);
  Bytes r = pack_bits(choices);
  std::vector<Bytes> t(kBaseOts, Bytes(rb));
  Bytes g1(rb);
  ByteWriter w;
  w.u32(static_cast<uint32_t>(m));
  for (size_t i = 0; i < kBaseOts; ++i) {
    prg0_[i].fill(t[i]);
    prg1_[i].fill(g1);
    for (size_t b = 0; b < rb; ++b) g1[b] ^= t[i][b] ^ r[b];
    w.raw(g1);
  }
  pending_choices_ = choices;
  pending_t_ = transpose(t, m);
  return w.take();
}

std::vector<Block> OtExtReceiver::finish(std::span<const uint8_t> response) {
  ByteReader r(response);
  const size_t m = r.u32();
  if (m != pending_choices_.size()) fail(Errc::protocol, "OT response does not match the pending request");
  if (r.remaining() != 32 * m) fail(Errc::protocol, "OT response has the wrong length");
  std::vector<Block> out;
  out.reserve(m);
  for (size_t j = 0; j < m; ++j) {
    Block y0 = read_block(r);
    Block y1 = read_block(r);
    Block y = (pending_choices_[j] & 1) ? y1 : y0;
    out.push_back(y ^ hash_block(pending_t_[j], kOtTweak | (counter_ + j)));
  }
  counter_ += m;
  pending_choices_.clear();
  pending_t_.clear();
  return out;
}

std::vector<Block> ot_exchange(const std::vector<LabelPair>& pairs, const std::vector<uint8_t>& choices, Rng& rng) {
  if (pairs.size() != choices.size()) {
    fail(Errc::protocol, "OT length mismatch: " + std::to_string(pairs.size()) + " label pairs, " +
                             std::to_string(choices.size()) + " choice bits");
  }
  // The label receiver acts as base-OT sender.
  BaseOtSender base_sender;
  BaseOtReceiver base_receiver;
  std::vector<uint8_t> s(kBaseOts);
  for (auto& b : s) b = rng.bit();
  Bytes first = base_sender.first_message(rng);
  Bytes reply = base_receiver.respond(first, s, rng);
  auto key_pairs = base_sender.finish(reply, kBaseOts);

  OtExtSender sender(s, base_receiver.keys());
  OtExtReceiver receiver(key_pairs);
  Bytes req = receiver.request(choices);
  Bytes resp = sender.respond(req, pairs);
  return receiver.finish(resp);
}

}  // namespace oope::gc
