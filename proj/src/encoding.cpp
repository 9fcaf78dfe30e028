#include "flash/encoding.hpp"

#include <algorithm>
#include <stdexcept>

namespace flash {

namespace {

constexpr std::size_t kPointerBytes = 32 + 4 + 1;
constexpr std::size_t kPaymentBytes = 4 + 8 + 1;

void putU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void putU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void putU64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  void take(std::uint8_t* dst, std::size_t len) {
    need(len);
    std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), len, dst);
    pos_ += len;
  }

  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t len) const {
    if (pos_ + len > bytes_.size()) throw std::invalid_argument("truncated block encoding");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_{0};
};

std::string hexOf(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xF]);
  }
  return s;
}

std::vector<std::uint8_t> unhex(const std::string& s) {
  if (s.size() % 2 != 0) throw std::invalid_argument("odd-length hex string");
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw std::invalid_argument("bad hex digit");
  };
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < s.size(); i += 2) out.push_back(static_cast<std::uint8_t>(nibble(s[i]) << 4 | nibble(s[i + 1])));
  return out;
}

}  // namespace

std::vector<std::uint8_t> encodeBody(const Block& b) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + b.pointers.size() * kPointerBytes + b.payments.size() * kPaymentBytes);
  putU32(out, b.creator.value);
  putU32(out, static_cast<std::uint32_t>(b.pointers.size()));
  for (const auto& p : b.pointers) {
    out.insert(out.end(), p.target.bytes.begin(), p.target.bytes.end());
    putU32(out, p.targetCreator.value);
    out.push_back(p.isInput ? 1 : 0);
  }
  putU32(out, static_cast<std::uint32_t>(b.payments.size()));
  for (const auto& p : b.payments) {
    putU32(out, p.recipient.value);
    putU64(out, p.amount);
    out.push_back(p.urgent ? 1 : 0);
  }
  return out;
}

std::vector<std::uint8_t> encodeBlock(const Block& b) {
  auto out = encodeBody(b);
  putU16(out, static_cast<std::uint16_t>(b.signature.size()));
  out.insert(out.end(), b.signature.begin(), b.signature.end());
  return out;
}

std::size_t encodedSize(const Block& b) {
  return 12 + b.pointers.size() * kPointerBytes + b.payments.size() * kPaymentBytes + 2 + b.signature.size();
}

Block decodeBlock(std::span<const std::uint8_t> bytes, const CryptoSuite& suite) {
  Reader r(bytes);
  Block b;
  b.creator = AgentId(static_cast<std::uint32_t>(r.uint(4)));
  const auto pointerCount = r.uint(4);
  if (pointerCount > bytes.size() / kPointerBytes) throw std::invalid_argument("pointer count exceeds input");
  for (std::uint64_t i = 0; i < pointerCount; ++i) {
    Pointer p;
    r.take(p.target.bytes.data(), p.target.bytes.size());
    p.targetCreator = AgentId(static_cast<std::uint32_t>(r.uint(4)));
    const auto flag = r.uint(1);
    if (flag > 1) throw std::invalid_argument("bad input flag");
    p.isInput = flag == 1;
    b.pointers.push_back(p);
  }
  const auto paymentCount = r.uint(4);
  if (paymentCount > bytes.size() / kPaymentBytes) throw std::invalid_argument("payment count exceeds input");
  for (std::uint64_t i = 0; i < paymentCount; ++i) {
    Payment p;
    p.recipient = AgentId(static_cast<std::uint32_t>(r.uint(4)));
    p.amount = r.uint(8);
    const auto flag = r.uint(1);
    if (flag > 1) throw std::invalid_argument("bad urgent flag");
    p.urgent = flag == 1;
    b.payments.push_back(p);
  }
  const std::size_t bodyLen = r.position();
  const auto sigLen = r.uint(2);
  b.signature.resize(sigLen);
  r.take(b.signature.data(), sigLen);
  if (!r.done()) throw std::invalid_argument("trailing bytes after block");
  b.hash = suite.hash(bytes.first(bodyLen));
  return b;
}

Block sealBlock(AgentId creator, std::vector<Payment> payments, std::vector<Pointer> pointers,
                const CryptoSuite& suite) {
  std::sort(pointers.begin(), pointers.end(), [](const Pointer& a, const Pointer& b) {
    if (a.target != b.target) return a.target < b.target;
    return a.isInput > b.isInput;
  });
  std::vector<Pointer> unique;
  for (const auto& p : pointers) {
    if (!unique.empty() && unique.back().target == p.target) continue;
    unique.push_back(p);
  }
  Block b;
  b.creator = creator;
  b.payments = std::move(payments);
  b.pointers = std::move(unique);
  b.hash = suite.hash(encodeBody(b));
  b.signature = suite.sign(creator, b.hash);
  return b;
}

bool verifySeal(const Block& b, const CryptoSuite& suite) {
  if (suite.hash(encodeBody(b)) != b.hash) return false;
  return suite.verify(b.creator, b.hash, b.signature);
}

std::size_t smallBlockByteBound(const CryptoSuite& suite) {
  return 12 + 4 * kPointerBytes + 2 * kPaymentBytes + 2 + suite.signatureSize();
}

nlohmann::json blockToJson(const Block& b) {
  nlohmann::json j;
  j["hash"] = b.hash.hex();
  j["creator"] = b.creator.value;
  auto& ptrs = j["pointers"] = nlohmann::json::array();
  for (const auto& p : b.pointers) {
    ptrs.push_back({{"target", p.target.hex()}, {"creator", p.targetCreator.value}, {"input", p.isInput}});
  }
  auto& pays = j["payments"] = nlohmann::json::array();
  for (const auto& p : b.payments) {
    nlohmann::json pj = {{"to", p.recipient.value}, {"amount", p.amount}};
    if (p.urgent) pj["urgent"] = true;
    pays.push_back(std::move(pj));
  }
  j["signature"] = hexOf(b.signature);
  return j;
}

Block blockFromJson(const nlohmann::json& j, const CryptoSuite& suite) {
  Block b;
  b.creator = AgentId(j.at("creator").get<std::uint32_t>());
  for (const auto& pj : j.at("pointers")) {
    Pointer p;
    const auto raw = unhex(pj.at("target").get<std::string>());
    if (raw.size() != p.target.bytes.size()) throw std::invalid_argument("bad pointer hash length");
    std::copy(raw.begin(), raw.end(), p.target.bytes.begin());
    p.targetCreator = AgentId(pj.at("creator").get<std::uint32_t>());
    p.isInput = pj.value("input", false);
    b.pointers.push_back(p);
  }
  for (const auto& pj : j.at("payments")) {
    b.payments.push_back(Payment{AgentId(pj.at("to").get<std::uint32_t>()), pj.at("amount").get<Amount>(),
                                 pj.value("urgent", false)});
  }
  b.signature = unhex(j.at("signature").get<std::string>());
  b.hash = suite.hash(encodeBody(b));
  if (j.contains("hash") && j.at("hash").get<std::string>() != b.hash.hex()) {
    throw std::invalid_argument("snapshot hash mismatch for block " + b.hash.shortHex());
  }
  return b;
}

}  // namespace flash
