#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace flash {

/// Growable bitset over dense indices. Binary operations tolerate operands of
/// different lengths: missing words read as zero.
class IndexSet {
 public:
  IndexSet() = default;

  bool test(std::size_t i) const {
    const std::size_t w = i / 64;
    return w < words_.size() && ((words_[w] >> (i % 64)) & 1u) != 0;
  }

  void set(std::size_t i) {
    const std::size_t w = i / 64;
    if (w >= words_.size()) words_.resize(w + 1, 0);
    words_[w] |= std::uint64_t{1} << (i % 64);
  }

  void reset(std::size_t i) {
    const std::size_t w = i / 64;
    if (w < words_.size()) words_[w] &= ~(std::uint64_t{1} << (i % 64));
  }

  IndexSet& operator|=(const IndexSet& other) {
    if (other.words_.size() > words_.size()) words_.resize(other.words_.size(), 0);
    for (std::size_t w = 0; w < other.words_.size(); ++w) words_[w] |= other.words_[w];
    return *this;
  }

  IndexSet& operator&=(const IndexSet& other) {
    if (words_.size() > other.words_.size()) words_.resize(other.words_.size());
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= other.words_[w];
    return *this;
  }

  /// this \ other
  IndexSet& subtract(const IndexSet& other) {
    const std::size_t common = std::min(words_.size(), other.words_.size());
    for (std::size_t w = 0; w < common; ++w) words_[w] &= ~other.words_[w];
    return *this;
  }

  bool intersects(const IndexSet& other) const {
    const std::size_t common = std::min(words_.size(), other.words_.size());
    for (std::size_t w = 0; w < common; ++w) {
      if ((words_[w] & other.words_[w]) != 0) return true;
    }
    return false;
  }

  /// True iff every member of this set is in `other`.
  bool subsetOf(const IndexSet& other) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      const std::uint64_t theirs = w < other.words_.size() ? other.words_[w] : 0;
      if ((words_[w] & ~theirs) != 0) return false;
    }
    return true;
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  bool empty() const {
    for (auto w : words_) {
      if (w != 0) return false;
    }
    return true;
  }

  /// Smallest member, or npos.
  std::size_t first() const { return nextFrom(0); }

  /// Smallest member >= i, or npos.
  std::size_t nextFrom(std::size_t i) const {
    std::size_t w = i / 64;
    if (w >= words_.size()) return npos;
    std::uint64_t cur = words_[w] & (~std::uint64_t{0} << (i % 64));
    while (true) {
      if (cur != 0) return w * 64 + static_cast<std::size_t>(std::countr_zero(cur));
      if (++w >= words_.size()) return npos;
      cur = words_[w];
    }
  }

  template <typename Fn>
  void forEach(Fn&& fn) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t cur = words_[w];
      while (cur != 0) {
        const auto bit = static_cast<std::size_t>(std::countr_zero(cur));
        fn(w * 64 + bit);
        cur &= cur - 1;
      }
    }
  }

  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    forEach([&](std::size_t i) { out.push_back(i); });
    return out;
  }

  friend bool operator==(const IndexSet& a, const IndexSet& b) {
    const auto& longer = a.words_.size() >= b.words_.size() ? a.words_ : b.words_;
    const auto& shorter = a.words_.size() >= b.words_.size() ? b.words_ : a.words_;
    for (std::size_t w = 0; w < longer.size(); ++w) {
      const std::uint64_t s = w < shorter.size() ? shorter[w] : 0;
      if (longer[w] != s) return false;
    }
    return true;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<std::uint64_t> words_;
};

}  // namespace flash
