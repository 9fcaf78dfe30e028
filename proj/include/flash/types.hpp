#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace flash {

/// Identity of an agent. Stands in for the agent's public key; the total
/// order is used for deterministic iteration and tie-breaking.
struct AgentId {
  std::uint32_t value{0};

  constexpr AgentId() = default;
  constexpr explicit AgentId(std::uint32_t v) : value(v) {}

  constexpr auto operator<=>(const AgentId&) const = default;
};

using Amount = std::uint64_t;
using Tick = std::uint64_t;

struct Hash {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const Hash&) const = default;

  std::string hex() const;
  /// First 8 bytes as hex; used in traces and diagnostics.
  std::string shortHex() const;
};

struct HashHasher {
  std::size_t operator()(const Hash& h) const noexcept {
    std::size_t out;
    std::memcpy(&out, h.bytes.data(), sizeof(out));
    return out;
  }
};

struct Payment {
  AgentId recipient;
  Amount amount{0};
  bool urgent{false};

  bool operator==(const Payment&) const = default;
};

struct Pointer {
  Hash target;
  AgentId targetCreator;
  bool isInput{false};

  bool operator==(const Pointer&) const = default;
};

/// A signed blocklace vertex. `pointers` is kept sorted by target hash with
/// unique targets; `hash` covers creator, pointers and payments.
struct Block {
  AgentId creator;
  std::vector<Payment> payments;
  std::vector<Pointer> pointers;
  std::vector<std::uint8_t> signature;
  Hash hash;

  bool isInitial() const { return pointers.empty(); }
  bool isAck() const { return payments.empty(); }
  bool hasUrgentPayment() const;
  /// Sum of payments addressed to `who` in this block.
  Amount paidTo(AgentId who) const;
  /// Non-self output payments (the unit "per payment" metrics count).
  std::size_t outgoingPaymentCount() const;
};

using BlockPtr = std::shared_ptr<const Block>;

/// Output of a final block addressed to `recipient` and not yet used as input.
struct Utxo {
  Hash sourceBlock;
  std::size_t paymentIndex{0};
  AgentId recipient;
  Amount amount{0};

  auto operator<=>(const Utxo&) const = default;
};

/// Thrown for invalid scenario or protocol configuration (e.g. f >= n/3).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a block hash is not present in a blocklace.
class UnknownBlock : public std::out_of_range {
 public:
  explicit UnknownBlock(const Hash& h) : std::out_of_range("unknown block " + h.shortHex()) {}
};

/// Smallest integer strictly greater than (n + f) / 2, without checking the
/// f < n/3 resilience bound. Used to replay model-violation scenarios.
constexpr std::size_t supermajorityThreshold(std::size_t n, std::size_t f) { return (n + f) / 2 + 1; }

/// Supermajority size for a validly configured system; throws ConfigError
/// unless 3f < n.
std::size_t supermajoritySize(std::size_t n, std::size_t f);

/// Resilience parameters of a run.
struct Quorum {
  std::size_t n{0};
  std::size_t f{0};

  std::size_t threshold() const { return supermajorityThreshold(n, f); }
  bool valid() const { return n > 0 && 3 * f < n; }
};

}  // namespace flash
