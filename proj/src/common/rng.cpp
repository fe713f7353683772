#include "common/rng.hpp"

#include <cstring>
#include <string>

#include <openssl/evp.h>
#include <openssl/rand.h>

#include "common/bytes.hpp"
#include "common/error.hpp"

namespace oope {

namespace {
constexpr size_t kBlock = 4096;
}

struct Rng::Impl {
  EVP_CIPHER_CTX* ctx = nullptr;
  std::array<uint8_t, kBlock> buf{};
  size_t pos = kBlock;

  ~Impl() { EVP_CIPHER_CTX_free(ctx); }
};

Rng::Rng(const std::array<uint8_t, 32>& key) : impl_(std::make_unique<Impl>()) {
  impl_->ctx = EVP_CIPHER_CTX_new();
  std::array<uint8_t, 16> iv{};
  if (!impl_->ctx ||
      EVP_EncryptInit_ex(impl_->ctx, EVP_aes_256_ctr(), nullptr, key.data(), iv.data()) != 1) {
    fail(Errc::internal, "cannot initialise AES-CTR generator");
  }
}

Rng::~Rng() = default;
Rng::Rng(Rng&&) noexcept = default;
Rng& Rng::operator=(Rng&&) noexcept = default;

Rng Rng::from_seed(uint64_t seed, std::string_view label) {
  ByteWriter w;
  w.str("oope-rng");
  w.str(label);
  w.u64(seed);
  return Rng(sha256(w.buf()));
}

Rng Rng::system() {
  std::array<uint8_t, 32> key{};
  if (RAND_bytes(key.data(), static_cast<int>(key.size())) != 1) {
    fail(Errc::internal, "OS entropy source unavailable");
  }
  return Rng(key);
}

Rng Rng::fork(std::string_view label) {
  std::array<uint8_t, 32> material{};
  fill(material);
  ByteWriter w;
  w.raw(material);
  w.str(label);
  return Rng(sha256(w.buf()));
}

void Rng::refill() {
  std::array<uint8_t, kBlock> zeros{};
  int len = 0;
  if (EVP_EncryptUpdate(impl_->ctx, impl_->buf.data(), &len, zeros.data(), kBlock) != 1 ||
      len != static_cast<int>(kBlock)) {
    fail(Errc::internal, "AES-CTR keystream failure");
  }
  impl_->pos = 0;
}

void Rng::fill(std::span<uint8_t> out) {
  size_t done = 0;
  while (done < out.size()) {
    if (impl_->pos == kBlock) refill();
    size_t n = std::min(out.size() - done, kBlock - impl_->pos);
    std::memcpy(out.data() + done, impl_->buf.data() + impl_->pos, n);
    impl_->pos += n;
    done += n;
  }
}

uint64_t Rng::next_u64() {
  std::array<uint8_t, 8> b{};
  fill(b);
  uint64_t v = 0;
  for (uint8_t x : b) v = v << 8 | x;
  return v;
}

uint64_t Rng::below(uint64_t bound) {
  if (bound == 0) fail(Errc::usage, "Rng::below with zero bound");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

mpz_class Rng::bits(unsigned nbits) {
  if (nbits == 0) return 0;
  Bytes b((nbits + 7) / 8);
  fill(b);
  unsigned excess = static_cast<unsigned>(b.size() * 8 - nbits);
  b[0] &= static_cast<uint8_t>(0xff >> excess);
  return mpz_from_bytes(b);
}

mpz_class Rng::below(const mpz_class& bound) {
  if (bound <= 0) fail(Errc::usage, "Rng::below with non-positive bound");
  unsigned nbits = static_cast<unsigned>(mpz_sizeinbase(bound.get_mpz_t(), 2));
  for (;;) {
    mpz_class v = bits(nbits);
    if (v < bound) return v;
  }
}

}  // namespace oope
