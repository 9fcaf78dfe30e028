#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "flash/blocklace.hpp"
#include "flash/encoding.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace flash;
using namespace flash::testing;

TEST_CASE("supermajority sizes") {
  CHECK(supermajoritySize(4, 1) == 3);
  CHECK(supermajoritySize(10, 3) == 7);
  CHECK(supermajoritySize(5, 0) == 3);
  CHECK_THROWS_AS(supermajoritySize(3, 1), ConfigError);
  CHECK_THROWS_AS(supermajoritySize(6, 2), ConfigError);
}

TEST_CASE("two supermajorities share a correct agent") {
  for (std::size_t n = 4; n <= 50; ++n) {
    for (std::size_t f = 0; 3 * f < n; ++f) {
      const std::size_t s = supermajoritySize(n, f);
      CHECK(2 * static_cast<double>(s) > static_cast<double>(n + f));
      // smallest possible overlap of two s-subsets exceeds the faulty count
      CHECK(2 * s - n >= f + 1);
    }
  }
  // literal subset check where it is cheap
  for (std::size_t n = 4; n <= 10; ++n) {
    for (std::size_t f = 0; 3 * f < n; ++f) {
      const std::size_t s = supermajoritySize(n, f);
      const std::uint32_t full = (1u << n) - 1;
      std::vector<std::uint32_t> supers;
      for (std::uint32_t m = 0; m <= full; ++m)
        if (static_cast<std::size_t>(std::popcount(m)) >= s) supers.push_back(m);
      std::size_t worst = n;
      for (auto a : supers)
        for (auto b : supers) worst = std::min<std::size_t>(worst, std::popcount(a & b));
      CHECK(worst >= f + 1);
    }
  }
}

TEST_CASE("encoding round-trips and rejects garbage") {
  Builder g(5);
  buildPaymentsFigureA(g);
  auto suite = simSuite();
  for (BlockIndex i = 0; i < g.lace.size(); ++i) {
    const Block& b = g.lace.block(i);
    const auto bytes = encodeBlock(b);
    CHECK(bytes.size() == encodedSize(b));
    Block back = decodeBlock(bytes, *suite);
    CHECK(back.hash == b.hash);
    CHECK(back.signature == b.signature);
    CHECK(back.pointers.size() == b.pointers.size());
    CHECK(verifySeal(back, *suite));
    Block viaJson = blockFromJson(blockToJson(b), *suite);
    CHECK(viaJson.hash == b.hash);
    CHECK(viaJson.payments == b.payments);
  }
  auto bytes = encodeBlock(g.lace.block(5));
  CHECK_THROWS_AS(decodeBlock(std::span(bytes).first(bytes.size() - 1), *suite), std::invalid_argument);
  bytes.push_back(0);
  CHECK_THROWS_AS(decodeBlock(bytes, *suite), std::invalid_argument);
}

TEST_CASE("ed25519 suite signs and verifies") {
  Ed25519Crypto suite(4, 7);
  const Block b = sealBlock(AgentId(2), {Payment{AgentId(2), 5, false}}, {}, suite);
  CHECK(b.signature.size() == 64);
  CHECK(verifySeal(b, suite));
  Block forged = b;
  forged.creator = AgentId(1);
  CHECK_FALSE(verifySeal(forged, suite));
  Block tampered = b;
  tampered.payments[0].amount = 6;
  CHECK_FALSE(verifySeal(tampered, suite));
  // deterministic keys per seed
  Ed25519Crypto again(4, 7);
  CHECK(again.verify(AgentId(2), b.hash, b.signature));
  CHECK_THROWS_AS(makeCrypto("rot13", 4, 0), ConfigError);
}

TEST_CASE("payments figure A: observation, dependency, roots") {
  Builder g(5);
  buildPaymentsFigureA(g, false);
  auto roots = g.lace.roots();
  std::set<BlockIndex> rs(roots.begin(), roots.end());
  CHECK(rs == std::set<BlockIndex>{g.idx("b3"), g.idx("b4")});

  g.add("b5", 4, {Builder::pay(1, 1)}, {ref("b3"), ref("b4"), in("b2")});
  CHECK(g.lace.observes(g.h("b5"), g.h("b2")));
  CHECK(g.lace.observes(g.h("b5"), g.h("b5")));
  CHECK(g.lace.dependsOn(g.h("b3"), g.h("b1")));
  CHECK_FALSE(g.lace.dependsOn(g.h("b3"), g.h("b2")));
  CHECK(g.lace.dependsOn(g.h("b3"), g.h("b3")));
  for (auto l : {"b1", "b2", "b3", "b4", "b5"}) CHECK(g.lace.closure(g.h("b5")).test(g.idx(l)));
  CHECK(g.lace.closure(g.h("g0")).count() == 1);

  const auto ic = g.lace.inputClosure(g.h("b3"));
  CHECK(ic.test(g.idx("b1")));
  CHECK(ic.test(g.idx("g0")));
  CHECK_FALSE(ic.test(g.idx("b2")));
  for (BlockIndex i = 0; i < g.lace.size(); ++i) CHECK(g.lace.balanced(g.lace.block(i)));
}

TEST_CASE("input closure follows the creator's own chain") {
  Builder g(2);
  g.genesis("p1", 0, 4);
  g.add("p2", 0, {}, {ref("p1")});
  g.add("p3", 0, {Builder::pay(0, 4)}, {ref("p2"), in("p1")});
  const auto ic = g.lace.inputClosure(g.h("p3"));
  CHECK(ic.count() == 3);
  CHECK(g.lace.inputClosure(g.h("p1")).count() == 1);
}

TEST_CASE("balance arithmetic") {
  Builder g(2);
  g.genesis("a", 0, 3);
  g.add("b", 1, {Builder::pay(0, 4)}, {});  // non-initial shape not needed; treat as source
  auto seven = g.make(AgentId(0), {Builder::pay(1, 7)}, {in("a"), in("b")});
  auto six = g.make(AgentId(0), {Builder::pay(1, 6)}, {in("a"), in("b")});
  CHECK(g.lace.balanced(*seven));
  CHECK_FALSE(g.lace.balanced(*six));
}

TEST_CASE("naive doublespend is rejected at acceptance") {
  Builder g(4, 1, {1, 0, 0, 0});
  auto g0 = g.stage("g0", 0, {Builder::pay(0, 1)});
  auto g1 = g.stage("g1", 1, {Builder::pay(1, 0)});
  Blocklace lace(BlocklaceConfig{Quorum{4, 1}, {1, 0, 0, 0}}, simSuite());
  CHECK(lace.accept(g0).status == AcceptStatus::Accepted);
  CHECK(lace.accept(g1).status == AcceptStatus::Accepted);
  auto b1 = g.stage("b1", 0, {Builder::pay(1, 1)}, {in("g0")});
  auto b2 = g.stage("b2", 1, {Builder::pay(2, 1)}, {in("b1"), in("g1")});
  auto b3 = g.stage("b3", 1, {Builder::pay(3, 1)}, {ref("b2"), in("b1")});
  CHECK(lace.accept(b1).status == AcceptStatus::Accepted);
  CHECK(lace.accept(b2).status == AcceptStatus::Accepted);
  CHECK(Blocklace::doublespend(*b2, *b3));
  CHECK(lace.evaluate(*b3).verdict == Verdict::Incorrect);
  auto out = lace.accept(b3);
  CHECK(out.status == AcceptStatus::Rejected);
  CHECK(out.reason == RejectReason::OwnDoublespend);
  CHECK(lace.accept(b3).status == AcceptStatus::Rejected);
  CHECK_FALSE(lace.contains(b3->hash));
}

TEST_CASE("equivocating doublespend: each side individually correct") {
  Builder g(4, 1);
  g.genesis("g0", 0, 1);
  g.genesis("g1", 1, 0);
  g.add("b1", 0, {Builder::pay(1, 1)}, {in("g0")});
  g.add("b2", 1, {Builder::pay(2, 1)}, {in("b1"), in("g1")});
  g.add("b3", 1, {Builder::pay(3, 1)}, {in("b1"), in("g1")});
  CHECK(Blocklace::doublespend(*g.at("b2"), *g.at("b3")));
  CHECK(g.lace.equivocation(g.h("b2"), g.h("b3")));
  CHECK(g.lace.isCorrect(g.idx("b2")));
  CHECK(g.lace.isCorrect(g.idx("b3")));
  CHECK(g.lace.isEquivocator(AgentId(1)));
  CHECK_FALSE(Blocklace::doublespend(*g.at("b1"), *g.at("b2")));
}

TEST_CASE("correctness predicate") {
  Builder g(3);
  auto init = g.genesis("g0", 0, 2);
  CHECK(g.lace.isCorrect(g.idx("g0")));
  // unbalanced predecessor poisons its dependents
  g.genesis("g1", 1, 0);
  g.add("u", 0, {Builder::pay(1, 5)}, {in("g0")});
  CHECK_FALSE(g.lace.isCorrect(g.idx("u")));
  auto c = g.make(AgentId(1), {Builder::pay(2, 5)}, {in("u"), ref("g1")});
  const auto e = g.lace.evaluate(*c);
  CHECK(e.verdict == Verdict::Incorrect);
  CHECK(e.reason == RejectReason::IncorrectDependency);
  // oracle check: the dependency set is exactly {u, g0, g1}'s input-closure
  // members other than c, and u is the only unbalanced one
  g.lace.insertUnchecked(c);
  auto o = oracle::of(g.lace);
  const auto ic = o.inputClosure(o.find(c->hash));
  std::size_t unbalanced = 0;
  for (auto x : ic)
    if (x != o.find(c->hash) && !g.lace.balanced(o.blocks[x])) ++unbalanced;
  CHECK(unbalanced == 1);

  // no initial block of the creator in the closure
  Builder h(3);
  h.genesis("g0", 0, 2);
  auto orphan = h.make(AgentId(1), {}, {ref("g0")});
  CHECK(h.lace.evaluate(*orphan).reason == RejectReason::NoInitialBlock);
  // input that pays somebody else
  auto wrong = h.make(AgentId(2), {}, {in("g0")});
  CHECK(h.lace.evaluate(*wrong).verdict == Verdict::Incorrect);
  (void)init;
}

TEST_CASE("acceptance buffers out-of-order blocks and is idempotent") {
  Builder g(4, 1);
  auto g0 = g.stage("g0", 0, {Builder::pay(0, 3)});
  auto g1 = g.stage("g1", 1, {Builder::pay(1, 0)});
  auto b1 = g.stage("b1", 0, {Builder::pay(1, 3)}, {in("g0")});
  auto b2 = g.stage("b2", 1, {Builder::pay(1, 3)}, {in("b1"), ref("g1")});
  Blocklace lace(BlocklaceConfig{Quorum{4, 1}, {}}, simSuite());
  CHECK(lace.accept(b2).status == AcceptStatus::Pending);
  CHECK(lace.accept(b1).status == AcceptStatus::Pending);
  CHECK(lace.accept(g1).status == AcceptStatus::Accepted);
  CHECK(lace.pendingCount() == 2);
  auto out = lace.accept(g0);
  CHECK(out.status == AcceptStatus::Accepted);
  CHECK(out.accepted.size() == 3);  // g0 releases b1, which releases b2
  CHECK(lace.contains(b2->hash));
  CHECK(lace.pendingCount() == 0);
  CHECK(lace.accept(b1).status == AcceptStatus::Duplicate);
  CHECK(lace.size() == 4);
}

TEST_CASE("acceptance rejects bad seals and genesis mismatches") {
  Blocklace lace(BlocklaceConfig{Quorum{4, 1}, {5, 5, 5, 5}}, simSuite());
  Builder g(4, 1);
  auto wrongGenesis = g.stage("x", 0, {Builder::pay(0, 4)});
  CHECK(lace.accept(wrongGenesis).reason == RejectReason::GenesisMismatch);
  auto good = g.stage("y", 0, {Builder::pay(0, 5)});
  Block forged = *good;
  forged.signature[0] ^= 1;
  CHECK(lace.accept(std::make_shared<const Block>(forged)).reason == RejectReason::BadSeal);
  CHECK(lace.accept(good).status == AcceptStatus::Accepted);
  auto stranger = g.stage("z", 1, {Builder::pay(9, 0)}, {ref("y")});
  CHECK(lace.accept(stranger).reason == RejectReason::UnknownAgent);
}

TEST_CASE("pending descendants of a rejected block are dropped") {
  Builder g(4, 1);
  auto g0 = g.stage("g0", 0, {Builder::pay(0, 1)});
  auto bad = g.stage("bad", 0, {Builder::pay(1, 2)}, {in("g0")});
  auto child = g.stage("child", 1, {}, {ref("bad")});
  Blocklace lace(BlocklaceConfig{Quorum{4, 1}, {}}, simSuite());
  CHECK(lace.accept(child).status == AcceptStatus::Pending);
  CHECK(lace.accept(bad).status == AcceptStatus::Pending);
  auto out = lace.accept(g0);
  CHECK(out.accepted.size() == 1);
  CHECK(out.cascadeRejected.size() == 2);
  CHECK(lace.wasRejected(child->hash));
  CHECK(lace.pendingCount() == 0);
}

TEST_CASE("pending buffer is bounded") {
  Builder g(2);
  g.stage("g0", 0, {Builder::pay(0, 1)});
  Blocklace lace(BlocklaceConfig{Quorum{2, 0}, {}, 2}, simSuite());
  for (int k = 0; k < 4; ++k) {
    auto b = g.stage("c" + std::to_string(k), 1, {Builder::pay(1, static_cast<Amount>(k))}, {ref("g0")});
    CHECK(lace.accept(b).status == AcceptStatus::Pending);
  }
  CHECK(lace.pendingCount() == 2);
  CHECK(lace.pendingOverflow() == 2);
}

TEST_CASE("last block") {
  Builder g(2);
  g.genesis("a", 0, 1);
  CHECK(g.lace.lastBlock(AgentId(0))->index == g.idx("a"));
  CHECK_FALSE(g.lace.lastBlock(AgentId(1)).has_value());
  g.add("b", 0, {}, {ref("a")});
  g.add("c", 0, {}, {ref("b")});
  auto lb = g.lace.lastBlock(AgentId(0));
  CHECK(lb->index == g.idx("c"));
  CHECK_FALSE(lb->ambiguous);
  g.add("fork", 0, {Builder::pay(1, 0)}, {ref("b")});
  lb = g.lace.lastBlock(AgentId(0));
  CHECK(lb->index == g.idx("fork"));
  CHECK(lb->ambiguous);
}

TEST_CASE("approval and finality: equivocation seen immediately") {
  auto g = figure3A();
  CHECK(g.lace.equivocation(g.h("b1"), g.h("b2")));
  CHECK(g.lace.isEquivocator(AgentId(kRed)));
  CHECK_FALSE(g.lace.isEquivocator(AgentId(kGreen)));
  CHECK(g.lace.approves(g.h("b3"), g.h("b1")));
  CHECK_FALSE(g.lace.approves(g.h("b4"), g.h("b1")));
  CHECK_FALSE(g.lace.approves(g.h("b4"), g.h("b2")));
  CHECK(g.lace.approvers(g.idx("b1")).count() == 2);
  CHECK_FALSE(g.lace.isFinal(g.h("b1")));
  CHECK_FALSE(g.lace.isFinal(g.h("b2")));
  CHECK(g.lace.approves(g.h("g2"), g.h("g2")));
}

TEST_CASE("approval and finality: an early approval stands") {
  auto g = figure3B();
  CHECK_FALSE(g.lace.approves(g.h("b6"), g.h("b1")));
  CHECK(g.lace.agentApproves(AgentId(kGreen), g.h("b1")));
  CHECK(g.lace.isFinal(g.h("b1")));
  CHECK_FALSE(g.lace.isFinal(g.h("b2")));
  CHECK(g.lace.approvers(g.idx("b2")).count() == 2);
}

TEST_CASE("approval and finality: too many equivocators") {
  auto g = figure3C(1);
  CHECK(g.lace.isEquivocator(AgentId(kGreen)));
  CHECK(g.lace.isFinal(g.h("b1")));
  CHECK(g.lace.isFinal(g.h("b2")));
  CHECK_FALSE(g.lace.isFinal(g.idx("b1"), supermajorityThreshold(4, 2)));
  CHECK_FALSE(g.lace.isFinal(g.idx("b2"), supermajorityThreshold(4, 2)));
}

TEST_CASE("sole initial block is not final; agent without blocks approves nothing") {
  Builder g(4, 1);
  g.genesis("a", 0, 1);
  CHECK_FALSE(g.lace.isFinal(g.h("a")));
  CHECK_FALSE(g.lace.agentApproves(AgentId(3), g.h("a")));
}

TEST_CASE("utxos: genesis, spend, consolidation") {
  Builder g(3, 0);
  g.genesis("g0", 0, 5);
  g.genesis("g1", 1, 2);
  g.genesis("g2", 2, 0);
  g.add("ack1", 1, {}, {ref("g0"), ref("g1"), ref("g2")});
  g.add("ack2", 2, {}, {ref("ack1")});
  CHECK(g.lace.isFinal(g.h("g0")));
  CHECK(g.lace.utxos(AgentId(0)).size() == 1);
  CHECK(g.lace.balance(AgentId(0)) == 5);
  // agent 0 pays 1 to agent 1
  g.add("pay", 0, {Builder::pay(1, 1), Builder::pay(0, 4)}, {ref("ack2"), in("g0")});
  CHECK(g.lace.balance(AgentId(0)) == 0);  // genesis spent, payment not final yet
  g.add("s1", 1, {}, {ref("pay")});
  g.add("s2", 2, {}, {ref("s1")});
  CHECK(g.lace.isFinal(g.h("pay")));
  CHECK(g.lace.balance(AgentId(0)) == 4);
  CHECK(g.lace.balance(AgentId(1)) == 3);
  // agent 1 consolidates both incoming blocks into one self-payment
  g.add("cons", 1, {Builder::pay(1, 3)}, {ref("s2"), in("pay"), in("g1")});
  g.add("c0", 0, {}, {ref("cons")});
  g.add("c2", 2, {}, {ref("c0")});
  CHECK(g.lace.isCorrect(g.idx("cons")));
  CHECK(g.lace.utxos(AgentId(1)).size() == 1);
  CHECK(g.lace.balance(AgentId(1)) == 3);
  CHECK(g.lace.balance(AgentId(0)) == 4);
  auto o = oracle::of(g.lace);
  for (std::uint32_t p = 0; p < 3; ++p) CHECK(o.balance(AgentId(p)) == g.lace.balance(AgentId(p)));
}

TEST_CASE("oracle equivalence on random blocklaces") {
  std::mt19937_64 rng(11);
  for (int run = 0; run < 200; ++run) {
    const std::size_t n = 3 + rng() % 4;
    const std::size_t f = (n - 1) / 3;
    auto g = randomLace(rng, n, f, 2 + rng() % 11, run % 2 == 0);
    auto o = oracle::of(g.lace);
    const std::size_t m = g.lace.size();
    for (BlockIndex a = 0; a < m; ++a) {
      for (BlockIndex b = 0; b < m; ++b) {
        REQUIRE(g.lace.observes(a, b) == o.reach[a][b]);
        REQUIRE(g.lace.dependsOn(a, b) == o.dep[a][b]);
        REQUIRE(g.lace.equivocation(a, b) == o.equivocation(a, b));
        REQUIRE(g.lace.approves(a, b) == o.approves(a, b));
      }
      const auto ic = g.lace.inputClosure(a).members();
      REQUIRE(std::set<std::size_t>(ic.begin(), ic.end()) == o.inputClosure(a));
      REQUIRE(g.lace.isFinal(a) == o.isFinal(a));
      for (std::uint32_t q = 0; q < n; ++q) REQUIRE(g.lace.agentApproves(AgentId(q), a) == o.agentApproves(AgentId(q), a));
    }
    auto roots = g.lace.roots();
    REQUIRE(std::set<std::size_t>(roots.begin(), roots.end()) == o.roots());
    for (std::uint32_t p = 0; p < n; ++p) {
      std::set<std::pair<std::size_t, std::size_t>> got;
      for (const auto& u : g.lace.utxos(AgentId(p))) got.insert({g.lace.indexOf(u.sourceBlock), u.paymentIndex});
      REQUIRE(got == o.utxos(AgentId(p)));
      REQUIRE(g.lace.balance(AgentId(p)) == o.balance(AgentId(p)));
    }
  }
}

TEST_CASE("finality and approval are monotone over prefixes") {
  std::mt19937_64 rng(5);
  for (int run = 0; run < 100; ++run) {
    const std::size_t n = 4 + rng() % 3;
    auto g = randomLace(rng, n, (n - 1) / 3, 12, false);
    // replay prefixes into fresh blocklaces and compare with the full one
    Blocklace grow(BlocklaceConfig{Quorum{n, (n - 1) / 3}, {}}, simSuite());
    for (BlockIndex i = 0; i < g.lace.size(); ++i) {
      grow.insertUnchecked(g.lace.blockPtr(i));
      for (BlockIndex x = 0; x <= i; ++x) {
        if (grow.isFinal(x)) REQUIRE(g.lace.isFinal(x));
        for (std::uint32_t q = 0; q < n; ++q)
          if (grow.agentApproves(AgentId(q), x)) REQUIRE(g.lace.agentApproves(AgentId(q), x));
      }
    }
  }
}

TEST_CASE("approving both sides of an equivocation makes an equivocator") {
  std::mt19937_64 rng(99);
  std::size_t witnessed = 0;
  for (int run = 0; run < 400; ++run) {
    const std::size_t n = 3 + rng() % 3;
    auto g = randomLace(rng, n, 0, 12, false);
    const auto& lace = g.lace;
    for (BlockIndex a = 0; a < lace.size(); ++a)
      for (BlockIndex b : lace.equivocatingWith(a))
        for (std::uint32_t q = 0; q < n; ++q)
          if (lace.agentApproves(AgentId(q), a) && lace.agentApproves(AgentId(q), b)) {
            ++witnessed;
            REQUIRE(lace.isEquivocator(AgentId(q)));
          }
  }
  CHECK(witnessed > 0);
}

TEST_CASE("conservation on honest histories") {
  std::mt19937_64 rng(3);
  for (int run = 0; run < 50; ++run) {
    const std::size_t n = 3 + rng() % 5;
    std::vector<Amount> genesis;
    auto g = honestLace(rng, n, (n - 1) / 3, 20, &genesis);
    // everything but the closing acks (seen by too few) is final
    for (BlockIndex i = 0; i < g.lace.size(); ++i)
      if (!g.lace.block(i).isAck()) CHECK(g.lace.isFinal(i));
    Amount total = 0;
    for (std::uint32_t p = 0; p < n; ++p) total += g.lace.balance(AgentId(p));
    CHECK(total == std::accumulate(genesis.begin(), genesis.end(), Amount{0}));
    for (BlockIndex i = 0; i < g.lace.size(); ++i) CHECK(g.lace.isCorrect(i));
  }
}

TEST_CASE("acceptance is insensitive to delivery order") {
  std::mt19937_64 rng(21);
  auto check = [&](const Blocklace& ref, std::size_t n, std::size_t f) {
    std::vector<BlockPtr> blocks;
    for (BlockIndex i = 0; i < ref.size(); ++i) blocks.push_back(ref.blockPtr(i));
    std::set<Hash> finals;
    ref.finalSet().forEach([&](std::size_t i) { finals.insert(ref.block(i).hash); });
    for (int perm = 0; perm < 10; ++perm) {
      std::shuffle(blocks.begin(), blocks.end(), rng);
      Blocklace lace(BlocklaceConfig{Quorum{n, f}, {}}, simSuite());
      for (const auto& b : blocks) lace.accept(b);
      REQUIRE(lace.size() == ref.size());
      std::set<Hash> got;
      lace.finalSet().forEach([&](std::size_t i) { got.insert(lace.block(i).hash); });
      REQUIRE(got == finals);
    }
  };
  for (int run = 0; run < 20; ++run) {
    const std::size_t n = 4 + rng() % 3;
    auto g = honestLace(rng, n, 1, 10);
    check(g.lace, n, 1);
  }
  check(figure3C().lace, 4, 1);
  check(figure3B().lace, 4, 1);
}
