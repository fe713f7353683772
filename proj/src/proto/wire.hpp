#pragma once

#include <optional>
#include <string>
#include <vector>

#include "common/bytes.hpp"
#include "homcrypto/paillier.hpp"
#include "integrity/integrity.hpp"
#include "ope/state.hpp"

// Payload codecs for the session messages. Ciphertexts are written at the fixed
// width of their key so frame sizes never depend on the plaintext.
namespace oope::proto {

enum class Op : uint8_t { encrypt = 1, query = 2, cleanup = 3 };

struct SessionRequest {
  Op op = Op::encrypt;
  std::string column;
  std::optional<mpz_class> da_n;  // DA modulus, FH encryption only
  Bytes body;                     // query / cleanup arguments
};
Bytes encode(const SessionRequest& m);
SessionRequest decode_request(std::span<const uint8_t> data);

struct SessionJoin {
  std::string column;
  std::optional<mpz_class> da_n;
};
Bytes encode(const SessionJoin& m);
SessionJoin decode_join(std::span<const uint8_t> data);

struct SessionStart {
  std::string column;
  uint32_t h = 0;
};
Bytes encode(const SessionStart& m);
SessionStart decode_start(std::span<const uint8_t> data);

// One party's comparison shares. Deterministic mode: own masks (b, b') and the
// unmasked-by-self outputs. FH mode uses only mask_e/share_e for the traversal bit.
struct Shares {
  bool mask_e = false;
  bool mask_g = false;
  bool share_e = false;
  bool share_g = false;
};
uint8_t encode(const Shares& s);
Shares decode_shares(std::span<const uint8_t> data);

struct RandomizedNode {
  hom::Ciphertext node;                 // [[x + r]]
  std::optional<hom::Ciphertext> ped;   // [[a + r']], Pedersen only
};
Bytes encode(const RandomizedNode& m, const hom::PublicKey& pk);
RandomizedNode decode_node(std::span<const uint8_t> data, bool pedersen);

struct IntegrityTag {
  integ::NodeTag tag;  // dl_mac or ped_commit; [[a]] is not forwarded
  mpz_class r2;        // Pedersen offset r'
};
Bytes encode(const IntegrityTag& m);
IntegrityTag decode_tag(std::span<const uint8_t> data, integ::Scheme scheme);

// DA -> CSP uploads.
struct CipherUpload {
  hom::Ciphertext cipher;
  integ::NodeTag tag;
};
Bytes encode(const CipherUpload& m, const hom::PublicKey& pk, integ::Scheme scheme);
CipherUpload decode_upload(std::span<const uint8_t> data, integ::Scheme scheme);

struct BoundsUpload {
  hom::Ciphertext fh_min;
  hom::Ciphertext fh_max;
};
Bytes encode(const BoundsUpload& m, const hom::PublicKey& pk);
BoundsUpload decode_bounds(std::span<const uint8_t> data);

// CSP -> DO, one per side of the min-max protocol.
struct MinMaxTriple {
  hom::Ciphertext d;         // [[d * s]] under the DO key
  hom::Ciphertext y_da;      // [[y * r mod N_DO]] under the DA key
  hom::Ciphertext bound_do;  // [[c * r]] under the DO key
};
Bytes encode(const MinMaxTriple& m, const hom::PublicKey& do_pk, const hom::PublicKey& da_pk);
MinMaxTriple decode_triple(std::span<const uint8_t> data);

struct SessionEnd {
  Order y;
  bool existing = false;
  bool rebalanced = false;
  uint32_t rounds = 0;
};
Bytes encode(const SessionEnd& m);
SessionEnd decode_end(std::span<const uint8_t> data);

Bytes encode_remap(const std::string& column, const ope::Remap& remap);
std::pair<std::string, ope::Remap> decode_remap(std::span<const uint8_t> data);

struct LinkInfo {
  mpz_class do_n;
  integ::Scheme scheme = integ::Scheme::off;
  integ::MacParams params;
};
Bytes encode(const LinkInfo& m);
LinkInfo decode_link_info(std::span<const uint8_t> data);

Bytes encode_order(Order y);
Order decode_order(std::span<const uint8_t> data);

}  // namespace oope::proto
