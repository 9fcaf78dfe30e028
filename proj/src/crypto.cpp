#include "flash/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <stdexcept>

namespace flash {

namespace {

void ensureSodium() {
  static const bool ready = [] { return sodium_init() >= 0; }();
  if (!ready) throw std::runtime_error("libsodium initialisation failed");
}

void putU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

Hash SimCrypto::hash(std::span<const std::uint8_t> data) const {
  ensureSodium();
  Hash h;
  crypto_generichash(h.bytes.data(), h.bytes.size(), data.data(), data.size(), nullptr, 0);
  return h;
}

std::vector<std::uint8_t> SimCrypto::sign(AgentId signer, const Hash& digest) const {
  std::vector<std::uint8_t> sig;
  sig.reserve(8);
  putU32(sig, signer.value);
  sig.insert(sig.end(), digest.bytes.begin(), digest.bytes.begin() + 4);
  return sig;
}

bool SimCrypto::verify(AgentId signer, const Hash& digest, std::span<const std::uint8_t> signature) const {
  const auto expected = sign(signer, digest);
  return signature.size() == expected.size() && std::equal(expected.begin(), expected.end(), signature.begin());
}

Ed25519Crypto::Ed25519Crypto(std::size_t agents, std::uint64_t seed) {
  ensureSodium();
  keys_.reserve(agents);
  for (std::size_t i = 0; i < agents; ++i) {
    std::vector<std::uint8_t> material;
    for (int b = 0; b < 8; ++b) material.push_back(static_cast<std::uint8_t>(seed >> (8 * b)));
    putU32(material, static_cast<std::uint32_t>(i));
    std::uint8_t keySeed[crypto_sign_SEEDBYTES];
    crypto_generichash(keySeed, sizeof(keySeed), material.data(), material.size(), nullptr, 0);
    KeyPair kp;
    kp.publicKey.resize(crypto_sign_PUBLICKEYBYTES);
    kp.secretKey.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(kp.publicKey.data(), kp.secretKey.data(), keySeed);
    keys_.push_back(std::move(kp));
  }
}

Hash Ed25519Crypto::hash(std::span<const std::uint8_t> data) const {
  Hash h;
  crypto_hash_sha256(h.bytes.data(), data.data(), data.size());
  return h;
}

std::vector<std::uint8_t> Ed25519Crypto::sign(AgentId signer, const Hash& digest) const {
  if (signer.value >= keys_.size()) throw std::out_of_range("no key for agent " + std::to_string(signer.value));
  std::vector<std::uint8_t> sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr, digest.bytes.data(), digest.bytes.size(),
                       keys_[signer.value].secretKey.data());
  return sig;
}

bool Ed25519Crypto::verify(AgentId signer, const Hash& digest, std::span<const std::uint8_t> signature) const {
  if (signer.value >= keys_.size() || signature.size() != crypto_sign_BYTES) return false;
  return crypto_sign_verify_detached(signature.data(), digest.bytes.data(), digest.bytes.size(),
                                     keys_[signer.value].publicKey.data()) == 0;
}

std::size_t Ed25519Crypto::signatureSize() const { return crypto_sign_BYTES; }

std::shared_ptr<const CryptoSuite> makeCrypto(const std::string& name, std::size_t agents, std::uint64_t seed) {
  if (name == "sim") return std::make_shared<SimCrypto>();
  if (name == "ed25519") return std::make_shared<Ed25519Crypto>(agents, seed);
  throw ConfigError("unknown crypto suite '" + name + "'");
}

}  // namespace flash
