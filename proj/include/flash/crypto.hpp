#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "flash/types.hpp"

namespace flash {

/// Hashing and signing primitives used to seal blocks. A suite holds the
/// signing keys of every simulated agent; key distribution is out of scope.
class CryptoSuite {
 public:
  virtual ~CryptoSuite() = default;

  virtual Hash hash(std::span<const std::uint8_t> data) const = 0;
  virtual std::vector<std::uint8_t> sign(AgentId signer, const Hash& digest) const = 0;
  virtual bool verify(AgentId signer, const Hash& digest, std::span<const std::uint8_t> signature) const = 0;
  virtual std::size_t signatureSize() const = 0;
  virtual const char* name() const = 0;
};

/// Cheap deterministic suite for simulation and property tests: BLAKE2b-256
/// content hash; the "signature" is the creator id followed by a digest tag.
class SimCrypto final : public CryptoSuite {
 public:
  Hash hash(std::span<const std::uint8_t> data) const override;
  std::vector<std::uint8_t> sign(AgentId signer, const Hash& digest) const override;
  bool verify(AgentId signer, const Hash& digest, std::span<const std::uint8_t> signature) const override;
  std::size_t signatureSize() const override { return 8; }
  const char* name() const override { return "sim"; }
};

/// SHA-256 hashes and Ed25519 signatures. Keypairs for agents 0..n-1 are
/// derived deterministically from `seed`.
class Ed25519Crypto final : public CryptoSuite {
 public:
  Ed25519Crypto(std::size_t agents, std::uint64_t seed);

  Hash hash(std::span<const std::uint8_t> data) const override;
  std::vector<std::uint8_t> sign(AgentId signer, const Hash& digest) const override;
  bool verify(AgentId signer, const Hash& digest, std::span<const std::uint8_t> signature) const override;
  std::size_t signatureSize() const override;
  const char* name() const override { return "ed25519"; }

 private:
  struct KeyPair {
    std::vector<std::uint8_t> publicKey;
    std::vector<std::uint8_t> secretKey;
  };
  std::vector<KeyPair> keys_;
};

std::shared_ptr<const CryptoSuite> makeCrypto(const std::string& name, std::size_t agents, std::uint64_t seed);

}  // namespace flash
