#include "integrity/integrity.hpp"

#include <string>

namespace oope::integ {

namespace {

constexpr int kReps = 40;

void need(const MacParams& params) {
  if (!params.present()) fail(Errc::usage, "integrity parameters are not available to this role");
}

mpz_class powm(const mpz_class& b, const mpz_class& e, const mpz_class& m) {
  if (e < 0) fail(Errc::domain, "negative exponent");
  mpz_class out;
  mpz_powm(out.get_mpz_t(), b.get_mpz_t(), e.get_mpz_t(), m.get_mpz_t());
  return out;
}

bool is_prime(const mpz_class& v) { return mpz_probab_prime_p(v.get_mpz_t(), kReps) > 0; }

// Element of order q obtained by hashing (seed, label, counter) into Z*_p and
// raising to (p-1)/q. Nobody knows its discrete log to any other base.
mpz_class hash_to_group(const mpz_class& p, const mpz_class& q, std::string_view label, const Bytes& seed) {
  const mpz_class cofactor = (p - 1) / q;
  const size_t bytes = (mpz_sizeinbase(p.get_mpz_t(), 2) + 7) / 8 + 16;
  for (uint32_t ctr = 0;; ++ctr) {
    Bytes stream;
    for (uint32_t blk = 0; stream.size() < bytes; ++blk) {
      ByteWriter w;
      w.str(label);
      w.blob(seed);
      w.u32(ctr);
      w.u32(blk);
      Digest d = sha256(w.buf());
      stream.insert(stream.end(), d.begin(), d.end());
    }
    stream.resize(bytes);
    mpz_class u = mpz_from_bytes(stream) % p;
    if (u < 2) continue;
    mpz_class e = powm(u, cofactor, p);
    if (e != 1) return e;
  }
}

}  // namespace

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::off: return "off";
    case Scheme::dlmac: return "dlmac";
    case Scheme::pedersen: return "pedersen";
  }
  return "?";
}

Scheme parse_scheme(std::string_view text) {
  if (text == "off") return Scheme::off;
  if (text == "dlmac") return Scheme::dlmac;
  if (text == "pedersen") return Scheme::pedersen;
  fail(Errc::usage, "unknown integrity scheme '" + std::string(text) + "' (off|dlmac|pedersen)");
}

Bytes MacParams::serialize() const {
  ByteWriter w;
  w.mpz(p);
  w.mpz(q);
  w.mpz(g);
  w.mpz(h);
  return w.take();
}

MacParams MacParams::parse(std::span<const uint8_t> data) {
  ByteReader r(data);
  MacParams out;
  out.p = r.mpz();
  out.q = r.mpz();
  out.g = r.mpz();
  out.h = r.mpz();
  r.expect_done("integrity parameters");
  return out;
}

MacParams generate_params(unsigned p_bits, unsigned q_bits, Rng& rng) {
  if (q_bits < 16 || p_bits < q_bits + 16) fail(Errc::config, "integrity group sizes are too small");
  MacParams out;
  do {
    out.q = rng.bits(q_bits);
    mpz_setbit(out.q.get_mpz_t(), q_bits - 1);
  } while (!is_prime(out.q));

  // p = q * m + 1 with m even and p of exactly p_bits bits.
  for (;;) {
    mpz_class m = rng.bits(p_bits - q_bits);
    mpz_setbit(m.get_mpz_t(), p_bits - q_bits - 1);
    mpz_clrbit(m.get_mpz_t(), 0);
    out.p = out.q * m + 1;
    if (mpz_sizeinbase(out.p.get_mpz_t(), 2) != p_bits) continue;
    if (is_prime(out.p)) break;
  }
  Bytes seed(32);
  rng.fill(seed);
  out.g = hash_to_group(out.p, out.q, "oope-integrity-g", seed);
  out.h = hash_to_group(out.p, out.q, "oope-integrity-h", seed);
  return out;
}

bool validate_params(const MacParams& params) {
  if (!params.present() || !is_prime(params.p) || !is_prime(params.q)) return false;
  if ((params.p - 1) % params.q != 0) return false;
  for (const mpz_class* e : {&params.g, &params.h}) {
    if (*e < 2 || *e >= params.p) return false;
    if (powm(*e, params.q, params.p) != 1) return false;
  }
  return params.g != params.h;
}

mpz_class dl_mac_make(const mpz_class& x, const MacParams& params) {
  need(params);
  return powm(params.g, x, params.p);
}

bool dl_mac_verify(const mpz_class& mac, const mpz_class& r, const mpz_class& m, const MacParams& params) {
  need(params);
  return mac * powm(params.g, r, params.p) % params.p == m % params.p;
}

mpz_class ped_commit_make(const mpz_class& x, const mpz_class& a, const MacParams& params) {
  need(params);
  return powm(params.g, x, params.p) * powm(params.h, a, params.p) % params.p;
}

bool ped_verify(const mpz_class& commit, const mpz_class& r, const mpz_class& r2, const mpz_class& m,
                const MacParams& params) {
  need(params);
  mpz_class expect = commit * powm(params.g, r, params.p) % params.p * powm(params.h, r2, params.p) % params.p;
  return expect == m % params.p;
}

mpz_class dl_response(const mpz_class& v, const MacParams& params) { return dl_mac_make(v, params); }

mpz_class ped_response(const mpz_class& v, const mpz_class& va, const MacParams& params) {
  return ped_commit_make(v, va, params);
}

NodeTag make_tag(Scheme scheme, const mpz_class& x, const MacParams& params, const hom::PublicKey& pk, Rng& rng,
                 hom::RandomnessPool* pool) {
  NodeTag tag;
  switch (scheme) {
    case Scheme::off:
      break;
    case Scheme::dlmac:
      tag.dl_mac = dl_mac_make(x, params);
      break;
    case Scheme::pedersen: {
      need(params);
      mpz_class a = rng.below(params.q);
      tag.ped_commit = ped_commit_make(x, a, params);
      tag.ped_a = hom::encrypt(pk, a, rng, pool);
      break;
    }
  }
  return tag;
}

}  // namespace oope::integ
