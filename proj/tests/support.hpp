#pragma once

// Test fixtures: a label-addressed block builder and the blocklaces drawn in
// the Flash figures.

#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flash/blocklace.hpp"
#include "flash/crypto.hpp"
#include "flash/encoding.hpp"

namespace flash::testing {

inline std::shared_ptr<const CryptoSuite> simSuite() {
  static auto suite = std::make_shared<SimCrypto>();
  return suite;
}

/// Builds signed blocks referenced by label and inserts them into a blocklace.
class Builder {
 public:
  explicit Builder(std::size_t n, std::size_t f = 0, std::vector<Amount> genesis = {})
      : lace(BlocklaceConfig{Quorum{n, f}, std::move(genesis)}, simSuite()) {}

  struct Ref {
    std::string label;
    bool input{false};
  };

  BlockPtr make(AgentId creator, std::vector<Payment> payments, const std::vector<Ref>& refs) const {
    std::vector<Pointer> ptrs;
    for (const auto& r : refs) {
      const auto& target = at(r.label);
      ptrs.push_back(Pointer{target->hash, target->creator, r.input});
    }
    return std::make_shared<const Block>(sealBlock(creator, std::move(payments), std::move(ptrs), *simSuite()));
  }

  /// Creates the block and inserts it without judging correctness.
  BlockPtr add(const std::string& label, std::uint32_t creator, std::vector<Payment> payments,
               const std::vector<Ref>& refs = {}) {
    auto b = make(AgentId(creator), std::move(payments), refs);
    lace.insertUnchecked(b);
    labels_[label] = b;
    return b;
  }

  /// Same, with explicit pointers (already resolved to hashes).
  BlockPtr addWith(const std::string& label, std::uint32_t creator, std::vector<Payment> payments,
                   std::vector<Pointer> ptrs) {
    auto b = std::make_shared<const Block>(sealBlock(AgentId(creator), std::move(payments), std::move(ptrs), *simSuite()));
    lace.insertUnchecked(b);
    labels_[label] = b;
    return b;
  }

  /// Pointers to every current root.
  std::vector<Pointer> rootPointers() const {
    std::vector<Pointer> out;
    for (BlockIndex r : lace.roots()) out.push_back(Pointer{lace.block(r).hash, lace.block(r).creator, false});
    return out;
  }

  BlockPtr genesis(const std::string& label, std::uint32_t creator, Amount amount) {
    return add(label, creator, {pay(creator, amount)});
  }

  /// Registers a block under a label without inserting it.
  BlockPtr stage(const std::string& label, std::uint32_t creator, std::vector<Payment> payments,
                 const std::vector<Ref>& refs = {}) {
    auto b = make(AgentId(creator), std::move(payments), refs);
    labels_[label] = b;
    return b;
  }

  const BlockPtr& at(const std::string& label) const {
    auto it = labels_.find(label);
    if (it == labels_.end()) throw std::out_of_range("no block labelled " + label);
    return it->second;
  }
  const Hash& h(const std::string& label) const { return at(label)->hash; }
  BlockIndex idx(const std::string& label) const { return lace.indexOf(h(label)); }

  static Payment pay(std::uint32_t to, Amount amount, bool urgent = false) {
    return Payment{AgentId(to), amount, urgent};
  }

  Blocklace lace;

 private:
  std::map<std::string, BlockPtr> labels_;
};

inline Builder::Ref in(const std::string& label) { return {label, true}; }
inline Builder::Ref ref(const std::string& label) { return {label, false}; }

// Agents in the figures.
inline constexpr std::uint32_t kRed = 0, kGreen = 1, kBlue = 2, kYellow = 3;

/// Payments and pointers of the transactions figure, panel A. Every block
/// has one input and one output payment of amount 1.
///   b3 -> b1 (input), b2      b4 -> b2, b0 (input; b0 precedes b2)
///   b5 -> b3, b4, b2 (input)
inline void buildPaymentsFigureA(Builder& g, bool withB5 = true) {
  g.genesis("g0", 0, 1);
  g.genesis("g2", 2, 1);
  g.genesis("g4", 4, 1);
  g.add("b0", 4, {Builder::pay(3, 1)}, {in("g4")});
  g.add("b1", 0, {Builder::pay(1, 1)}, {in("g0")});
  g.add("b2", 2, {Builder::pay(4, 1)}, {in("g2"), ref("b0")});
  g.add("b3", 1, {Builder::pay(2, 1)}, {in("b1"), ref("b2")});
  g.add("b4", 3, {Builder::pay(0, 1)}, {ref("b2"), in("b0")});
  if (withB5) g.add("b5", 4, {Builder::pay(1, 1)}, {ref("b3"), ref("b4"), in("b2")});
}

/// Figure 3 blocklaces: four agents, red equivocates with b1/b2 spending its
/// genesis. Returns a builder holding genesis blocks for all agents.
inline Builder figure3Base(std::size_t f = 1) {
  Builder g(4, f);
  g.genesis("g0", kRed, 1);
  g.genesis("g1", kGreen, 0);
  g.genesis("g2", kBlue, 0);
  g.genesis("g3", kYellow, 0);
  g.add("b1", kRed, {Builder::pay(kGreen, 1)}, {in("g0")});
  g.add("b2", kRed, {Builder::pay(kYellow, 1)}, {in("g0")});
  return g;
}

inline Builder figure3A() {
  auto g = figure3Base();
  g.add("b3", kGreen, {}, {ref("g1"), ref("b1")});
  g.add("b4", kBlue, {}, {ref("g2"), ref("b1"), ref("b2")});
  return g;
}

inline Builder figure3B() {
  auto g = figure3Base();
  g.add("b3", kGreen, {}, {ref("g1"), ref("b1")});
  g.add("b4", kBlue, {}, {ref("g2"), ref("b1")});
  g.add("b5", kYellow, {}, {ref("g3"), ref("b2")});
  g.add("b6", kGreen, {}, {ref("b3"), ref("b2")});
  return g;
}

/// Green equivocates (b3/b4) to approve both sides; blue approves b1 with b5,
/// yellow approves b2 with b6, blue's b7 then sees everything.
inline Builder figure3C(std::size_t f = 1) {
  auto g = figure3Base(f);
  g.add("b3", kGreen, {}, {ref("g1"), ref("b1")});
  g.add("b4", kGreen, {}, {ref("g1"), ref("b2")});
  g.add("b5", kBlue, {}, {ref("g2"), ref("b3")});
  g.add("b6", kYellow, {}, {ref("g3"), ref("b4")});
  g.add("b7", kBlue, {}, {ref("b5"), ref("b6")});
  return g;
}

/// Random blocklace with at most `size` blocks over n agents. Blocks point to
/// random earlier blocks; inputs are pointers whose target pays the creator.
/// With `balanced`, outputs split the input total exactly.
inline Builder randomLace(std::mt19937_64& rng, std::size_t n, std::size_t f, std::size_t size, bool balanced) {
  Builder g(n, f);
  std::vector<std::string> labels;
  std::vector<bool> hasGenesis(n, false);
  auto coin = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };
  for (std::size_t k = 0; k < size; ++k) {
    const auto c = static_cast<std::uint32_t>(rng() % n);
    const std::string label = "x" + std::to_string(k);
    if (!hasGenesis[c] || labels.empty() || coin(0.1)) {
      auto b = g.make(AgentId(c), {Builder::pay(c, rng() % 6)}, {});
      if (g.lace.contains(b->hash)) continue;
      hasGenesis[c] = true;
      g.add(label, c, b->payments);
      labels.push_back(label);
      continue;
    }
    std::vector<Builder::Ref> refs;
    Amount inputTotal = 0;
    for (const auto& l : labels) {
      if (!coin(0.35)) continue;
      const auto& target = g.at(l);
      bool paysMe = false;
      for (const auto& p : target->payments) paysMe = paysMe || p.recipient.value == c;
      const bool asInput = paysMe && coin(0.6);
      if (asInput) inputTotal += target->paidTo(AgentId(c));
      refs.push_back({l, asInput});
    }
    if (refs.empty()) refs.push_back({labels[rng() % labels.size()], false});
    std::vector<Payment> pays;
    const std::size_t outputs = rng() % 3;
    if (balanced) {
      Amount left = inputTotal;
      for (std::size_t i = 0; i < outputs; ++i) {
        const Amount a = (i + 1 == outputs) ? left : (left == 0 ? 0 : rng() % (left + 1));
        pays.push_back(Builder::pay(static_cast<std::uint32_t>(rng() % n), a));
        left -= a;
      }
      if (outputs == 0 && inputTotal > 0) pays.push_back(Builder::pay(c, inputTotal));
    } else {
      for (std::size_t i = 0; i < outputs; ++i) pays.push_back(Builder::pay(static_cast<std::uint32_t>(rng() % n), rng() % 4));
    }
    if (g.lace.contains(g.make(AgentId(c), pays, refs)->hash)) continue;
    g.add(label, c, std::move(pays), refs);
    labels.push_back(label);
  }
  return g;
}

/// Honest history: genesis for everyone, `payments` random transfers (each
/// spending all of the payer's unspent incoming blocks and pointing to every
/// root), then one ack block per agent so that every block is final.
inline Builder honestLace(std::mt19937_64& rng, std::size_t n, std::size_t f, std::size_t payments,
                          std::vector<Amount>* genesisOut = nullptr) {
  Builder g(n, f);
  std::vector<std::vector<Pointer>> unspent(n);
  std::vector<Amount> balance(n);
  for (std::uint32_t p = 0; p < n; ++p) {
    balance[p] = 1 + rng() % 9;
    auto b = g.genesis("g" + std::to_string(p), p, balance[p]);
    unspent[p].push_back(Pointer{b->hash, b->creator, true});
  }
  if (genesisOut) *genesisOut = balance;
  for (std::size_t k = 0; k < payments; ++k) {
    const auto payer = static_cast<std::uint32_t>(rng() % n);
    if (balance[payer] == 0) continue;
    auto to = static_cast<std::uint32_t>(rng() % (n - 1));
    if (to >= payer) ++to;
    const Amount amount = 1 + rng() % balance[payer];
    std::vector<Payment> pays{Builder::pay(to, amount)};
    if (amount < balance[payer]) pays.push_back(Builder::pay(payer, balance[payer] - amount));
    auto ptrs = g.rootPointers();
    ptrs.insert(ptrs.end(), unspent[payer].begin(), unspent[payer].end());
    auto b = g.addWith("p" + std::to_string(k), payer, std::move(pays), std::move(ptrs));
    unspent[payer].clear();
    balance[payer] -= amount;
    balance[to] += amount;
    unspent[to].push_back(Pointer{b->hash, b->creator, true});
    if (balance[payer] > 0) unspent[payer].push_back(Pointer{b->hash, b->creator, true});
  }
  for (std::uint32_t p = 0; p < n; ++p) g.addWith("ack" + std::to_string(p), p, {}, g.rootPointers());
  return g;
}

}  // namespace flash::testing
