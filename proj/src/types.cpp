#include "flash/types.hpp"

namespace flash {

namespace {

std::string toHex(const std::uint8_t* data, std::size_t len) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 0xF]);
  }
  return out;
}

}  // namespace

std::string Hash::hex() const { return toHex(bytes.data(), bytes.size()); }

std::string Hash::shortHex() const { return toHex(bytes.data(), 8); }

bool Block::hasUrgentPayment() const {
  for (const auto& p : payments) {
    if (p.urgent) return true;
  }
  return false;
}

Amount Block::paidTo(AgentId who) const {
  Amount sum = 0;
  for (const auto& p : payments) {
    if (p.recipient == who) sum += p.amount;
  }
  return sum;
}

std::size_t Block::outgoingPaymentCount() const {
  std::size_t c = 0;
  for (const auto& p : payments) {
    if (p.recipient != creator) ++c;
  }
  return c;
}

std::size_t supermajoritySize(std::size_t n, std::size_t f) {
  if (n == 0 || 3 * f >= n) {
    throw ConfigError("resilience bound violated: need f < n/3 (n=" + std::to_string(n) +
                      ", f=" + std::to_string(f) + ")");
  }
  return supermajorityThreshold(n, f);
}

}  // namespace flash
