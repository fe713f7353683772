#pragma once

#include <filesystem>
#include <optional>

#include "homcrypto/paillier.hpp"
#include "integrity/integrity.hpp"

// JSON key and parameter files. Every file carries a SHA-256 over its content fields;
// a mismatch is an io error.
namespace oope::app {

void save_private_key(const std::filesystem::path& file, const hom::PrivateKey& sk);
hom::PrivateKey load_private_key(const std::filesystem::path& file);
void save_public_key(const std::filesystem::path& file, const hom::PublicKey& pk);
// Accepts a private key file as well.
hom::PublicKey load_public_key(const std::filesystem::path& file);

void save_mac_params(const std::filesystem::path& file, const integ::MacParams& params);
integ::MacParams load_mac_params(const std::filesystem::path& file);

// Rng seeded from `seed` and `label`, or from the OS when seed is 0.
Rng make_rng(uint64_t seed, std::string_view label);

}  // namespace oope::app
