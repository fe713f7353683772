#include "app/files.hpp"

#include <sys/stat.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace oope::app {

namespace {

using nlohmann::json;

std::string digest_of(const json& fields) { return to_hex(sha256(fields.dump())); }

void write_json(const std::filesystem::path& file, const std::string& kind, const json& fields, bool secret) {
  json j;
  j["kind"] = kind;
  j["fields"] = fields;
  j["sha256"] = digest_of(fields);
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) fail(Errc::io, "cannot write " + tmp.string());
    os << j.dump(2) << "\n";
    if (!os) fail(Errc::io, "write failed: " + tmp.string());
  }
  if (secret) ::chmod(tmp.c_str(), 0600);
  std::filesystem::rename(tmp, file);
}

json read_json(const std::filesystem::path& file, std::initializer_list<const char*> kinds, std::string* kind_out) {
  std::ifstream is(file);
  if (!is) fail(Errc::io, "cannot open " + file.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    fail(Errc::io, file.string() + ": not valid JSON: " + e.what());
  }
  try {
    const std::string kind = j.at("kind").get<std::string>();
    bool ok = false;
    for (const char* k : kinds) ok |= kind == k;
    if (!ok) fail(Errc::usage, file.string() + ": unexpected file kind " + kind);
    const json& fields = j.at("fields");
    if (j.at("sha256").get<std::string>() != digest_of(fields)) fail(Errc::io, file.string() + ": checksum mismatch");
    if (kind_out) *kind_out = kind;
    return fields;
  } catch (const json::exception& e) {
    fail(Errc::io, file.string() + ": malformed: " + e.what());
  }
}

mpz_class hex_mpz(const json& f, const char* key) { return mpz_from_bytes(from_hex(f.at(key).get<std::string>())); }

}  // namespace

void save_private_key(const std::filesystem::path& file, const hom::PrivateKey& sk) {
  json f;
  f["key_bits"] = sk.public_key().key_bits();
  f["p"] = to_hex(mpz_to_bytes(sk.p()));
  f["q"] = to_hex(mpz_to_bytes(sk.q()));
  write_json(file, "paillier-private", f, true);
}

hom::PrivateKey load_private_key(const std::filesystem::path& file) {
  const json f = read_json(file, {"paillier-private"}, nullptr);
  try {
    return hom::PrivateKey(hex_mpz(f, "p"), hex_mpz(f, "q"));
  } catch (const json::exception& e) {
    fail(Errc::io, file.string() + ": malformed: " + e.what());
  }
}

void save_public_key(const std::filesystem::path& file, const hom::PublicKey& pk) {
  json f;
  f["key_bits"] = pk.key_bits();
  f["n"] = to_hex(mpz_to_bytes(pk.n()));
  write_json(file, "paillier-public", f, false);
}

hom::PublicKey load_public_key(const std::filesystem::path& file) {
  std::string kind;
  const json f = read_json(file, {"paillier-public", "paillier-private"}, &kind);
  try {
    if (kind == "paillier-private") return hom::PrivateKey(hex_mpz(f, "p"), hex_mpz(f, "q")).public_key();
    return hom::PublicKey(hex_mpz(f, "n"));
  } catch (const json::exception& e) {
    fail(Errc::io, file.string() + ": malformed: " + e.what());
  }
}

void save_mac_params(const std::filesystem::path& file, const integ::MacParams& params) {
  json f;
  f["params"] = to_hex(params.serialize());
  write_json(file, "integrity-group", f, false);
}

integ::MacParams load_mac_params(const std::filesystem::path& file) {
  const json f = read_json(file, {"integrity-group"}, nullptr);
  integ::MacParams p;
  try {
    p = integ::MacParams::parse(from_hex(f.at("params").get<std::string>()));
  } catch (const json::exception& e) {
    fail(Errc::io, file.string() + ": malformed: " + e.what());
  }
  if (!integ::validate_params(p)) fail(Errc::integrity, file.string() + ": invalid group parameters");
  return p;
}

Rng make_rng(uint64_t seed, std::string_view label) { return seed ? Rng::from_seed(seed, label) : Rng::system(); }

}  // namespace oope::app
