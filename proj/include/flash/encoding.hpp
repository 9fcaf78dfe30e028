#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "flash/crypto.hpp"
#include "flash/types.hpp"

namespace flash {

// Canonical block encoding (all integers little-endian):
//
//   body    := creator:u32
//              pointer_count:u32  { target:32B  target_creator:u32  is_input:u8 }*
//              payment_count:u32  { recipient:u32  amount:u64  urgent:u8 }*
//   block   := body  signature_len:u16  signature
//
// Pointers appear sorted by target hash; payments in list order. The block
// hash is the suite hash of `body`, and the signature is over that hash.

std::vector<std::uint8_t> encodeBody(const Block& b);
std::vector<std::uint8_t> encodeBlock(const Block& b);
std::size_t encodedSize(const Block& b);

/// Parses a wire-encoded block and recomputes its hash with `suite`.
/// Throws std::invalid_argument on malformed input.
Block decodeBlock(std::span<const std::uint8_t> bytes, const CryptoSuite& suite);

/// Normalises pointers (sorted, one per target; a target named as input and
/// non-input becomes a single input pointer), then hashes and signs.
Block sealBlock(AgentId creator, std::vector<Payment> payments, std::vector<Pointer> pointers,
                const CryptoSuite& suite);

/// Recomputes hash and checks the signature.
bool verifySeal(const Block& b, const CryptoSuite& suite);

/// Upper bound of the encoding of a small (low-congestion) block: at most four
/// pointers and two payments.
std::size_t smallBlockByteBound(const CryptoSuite& suite);

// Snapshot format: JSON lines, one block per line, in receipt order.
nlohmann::json blockToJson(const Block& b);
Block blockFromJson(const nlohmann::json& j, const CryptoSuite& suite);

}  // namespace flash
