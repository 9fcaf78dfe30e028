#include "flash/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <random>
#include <set>
#include <tuple>
#include <unordered_map>

#include "flash/encoding.hpp"
#include "flash/high_agent.hpp"
#include "flash/low_agent.hpp"

namespace flash {

using nlohmann::json;

bool Verdicts::ok() const {
  return (safety == "pass" || safety == "assumption-violated") && (liveness == "pass" || liveness == "skipped") &&
         (conservation == "pass" || conservation == "assumption-violated") && (expect == "pass" || expect == "skipped");
}

json Verdicts::toJson() const {
  return {{"safety", safety}, {"liveness", liveness}, {"conservation", conservation}, {"expect", expect}, {"ok", ok()}};
}

json RunResult::toJson() const {
  json v = json::array();
  for (const auto& s : violations)
    v.push_back({{"t", s.time},
                 {"agent", s.agent == SafetyViolation::kGlobal ? json("global") : json(s.agent)},
                 {"first", s.first.shortHex()},
                 {"second", s.second.shortHex()}});
  json labelsJ = json::object();
  for (const auto& [k, h] : labels) labelsJ[k] = h.shortHex();
  return {{"scenario", scenario.name},
          {"n", scenario.n},
          {"f", scenario.faultBound()},
          {"seed", scenario.seed},
          {"verdicts", verdicts.toJson()},
          {"metrics", metrics.toJson()},
          {"conservation",
           {{"genesis", conservation.genesis},
            {"final_unspent", conservation.finalUnspent},
            {"outstanding", conservation.outstanding}}},
          {"violations", v},
          {"expect_failures", expectFailures},
          {"labels", labelsJ},
          {"steps", steps},
          {"end_time", endTime},
          {"quiescent", quiescent}};
}

namespace {

struct Event {
  enum class Kind : std::uint8_t { Deliver, Timer, Intent, Turn, Drain };
  Tick time{0};
  std::uint64_t seq{0};
  Kind kind{Kind::Deliver};
  std::uint32_t agent{0};
  std::uint32_t from{0};
  BlockPtr block;
  SendKind sendKind{SendKind::Issue};
};

struct Later {
  bool operator()(const Event& a, const Event& b) const { return std::tie(a.time, a.seq) > std::tie(b.time, b.seq); }
};

std::string q(std::string_view s) { return "\"" + std::string(s) + "\""; }

class Simulation {
 public:
  Simulation(const Scenario& s, const RunOptions& o) : sc_(s), opt_(o) {
    if (opt_.seed) sc_.seed = *opt_.seed;
    if (opt_.maxSteps) sc_.maxSteps = *opt_.maxSteps;
    sc_.validate();
    n_ = sc_.n;
    rng_.seed(sc_.seed);
    suite_ = makeCrypto(sc_.crypto, n_, sc_.seed);
    behavior_.assign(n_, std::nullopt);
    for (auto [a, b] : sc_.byzantineAgents()) behavior_[a.value] = b;
    log_.n = n_;
    log_.correct.assign(n_, true);
    for (std::size_t a = 0; a < n_; ++a) log_.correct[a] = !behavior_[a].has_value();
    correctCount_ = log_.correctCount();
    dead_.assign(n_, false);
    attacked_.assign(n_, false);
    emitted_.assign(n_, 0);
    batches_.assign(n_, 0);
    perAgentSpends_.resize(n_);
    allowed_.assign(n_, std::vector<bool>(n_, true));
    for (std::size_t a = 0; a < n_; ++a) {
      if (behavior_[a] != Behavior::Withholding) continue;
      std::fill(allowed_[a].begin(), allowed_[a].end(), false);
      const std::size_t k = std::max<std::size_t>(1, (n_ - 1) * sc_.withholdPercent / 100);
      for (std::size_t i = 1; i <= k; ++i) allowed_[a][(a + i) % n_] = true;
    }
    const bool scripted = sc_.script.has_value();
    for (std::uint32_t a = 0; a < n_; ++a) {
      AgentParams p{AgentId(a), sc_.quorum(), sc_.genesisAmounts(), suite_, sc_.pendingCap};
      if (sc_.variant == Variant::High && !scripted) {
        DeltaPolicy d = sc_.delta;
        if (d.stall < 0) d.stall = static_cast<std::int64_t>(sc_.effectiveDrainInterval());
        agents_.push_back(std::make_unique<HighAgent>(p, d));
      } else {
        agents_.push_back(std::make_unique<LowAgent>(
            p, LowConfig{scripted ? Schedule::Turns : sc_.schedule, sc_.urgent}));
      }
    }
    livenessTop_ = sc_.workload.rounds + 3;
    lastTurn_ = static_cast<std::uint32_t>(n_ - 1);
  }

  RunResult run() {
    if (sc_.script) runScript();
    else runWorkload();
    return finish();
  }

 private:
  bool silent(std::size_t a) const { return behavior_[a] == Behavior::Silent; }
  bool colluder(std::size_t a) const { return behavior_[a] == Behavior::Colluding; }
  // Agents that take turns, pay and heartbeat.
  bool active(std::size_t a) const { return !silent(a) && !dead_[a] && !colluder(a); }
  bool low() const { return sc_.variant == Variant::Low; }

  void push(Event e) {
    e.seq = seq_++;
    queue_.push(std::move(e));
  }

  Tick delay() {
    switch (sc_.delay.kind) {
      case DelayModel::Kind::Synchronous: return sc_.delay.ticks;
      case DelayModel::Kind::Normal: {
        // Box-Muller on the raw engine output, so the stream is portable.
        auto unit = [&] { return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53; };
        const double z = std::sqrt(-2.0 * std::log(unit())) * std::cos(2.0 * std::numbers::pi * unit());
        const double d = std::round(sc_.delay.mean + sc_.delay.sigma * z);
        return d < 1.0 ? 1 : static_cast<Tick>(d);
      }
      case DelayModel::Kind::Adversarial: return 1 + rng_() % sc_.delay.bound;
    }
    return 1;
  }

  std::size_t pick(std::size_t bound) { return static_cast<std::size_t>(rng_() % bound); }

  // -- trace ----------------------------------------------------------------

  void line(std::string s) {
    if (!opt_.trace) return;
    trace_ += "{\"t\":" + std::to_string(now_) + "," + s + "}\n";
  }

  // -- registry -------------------------------------------------------------

  std::uint32_t idOf(const Hash& h) const { return ids_.at(h); }

  std::uint32_t registerBlock(const BlockPtr& b, Purpose purpose, std::uint32_t issuer) {
    auto [it, fresh] = ids_.emplace(b->hash, static_cast<std::uint32_t>(log_.blocks.size()));
    if (!fresh) return it->second;
    BlockRecord r;
    r.block = b;
    r.purpose = purpose;
    for (const auto& p : b->pointers) {
      auto t = ids_.find(p.target);
      if (t != ids_.end()) r.height = std::max(r.height, log_.blocks[t->second].height + 1);
    }
    r.outgoing = b->outgoingPaymentCount();
    r.bytes = encodedSize(*b);
    r.byCorrect = log_.correct[issuer];
    r.urgent = b->hasUrgentPayment();
    r.issued = now_;
    if (r.byCorrect && !sc_.script) {
      r.liveness = low() ? !(drainPhase_ && purpose == Purpose::Heartbeat) : r.height <= livenessTop_;
    }
    if (r.liveness) ++livenessPending_;
    log_.blocks.push_back(r);
    finalCount_.push_back(0);
    acceptedByCorrect_.push_back(0);
    const std::uint32_t id = it->second;
    log_.entries.push_back(LogEntry{now_, LogKind::Issue, issuer, id});
    line("\"ev\":\"issue\",\"agent\":" + std::to_string(issuer) + ",\"block\":" + q(b->hash.shortHex()) +
         ",\"purpose\":" + q(purposeName(purpose)) + ",\"height\":" + std::to_string(r.height) +
         ",\"payments\":" + std::to_string(b->payments.size()) + ",\"bytes\":" + std::to_string(r.bytes));
    return id;
  }

  // -- effects --------------------------------------------------------------

  void absorb(std::uint32_t a, Effects fx) {
    std::vector<BlockPtr> naive;
    for (const auto& is : fx.issued) {
      registerBlock(is.block, is.purpose, a);
      if (is.purpose == Purpose::Batch) ++batches_[a];
      if (behavior_[a] == Behavior::NaiveDoublespend && !attacked_[a] &&
          std::any_of(is.block->pointers.begin(), is.block->pointers.end(), [](const Pointer& p) { return p.isInput; }))
        naive.push_back(is.block);
    }
    for (const auto& b : fx.accepted) {
      const std::uint32_t id = idOf(b->hash);
      log_.entries.push_back(LogEntry{now_, LogKind::Accept, a, id});
      if (log_.correct[a]) ++acceptedByCorrect_[id];
      line("\"ev\":\"accept\",\"agent\":" + std::to_string(a) + ",\"block\":" + q(b->hash.shortHex()));
      if (colluder(a) && b->creator.value != a && behavior_[b->creator.value] &&
          log_.blocks[id].purpose == Purpose::Forged)
        collude(a, b);
    }
    for (const auto& b : fx.finalized) {
      const std::uint32_t id = idOf(b->hash);
      log_.entries.push_back(LogEntry{now_, LogKind::Final, a, id});
      line("\"ev\":\"final\",\"agent\":" + std::to_string(a) + ",\"block\":" + q(b->hash.shortHex()));
      if (log_.correct[a]) onFinal(a, id);
    }
    for (const auto& r : fx.rejected)
      line("\"ev\":\"reject\",\"agent\":" + std::to_string(a) + ",\"block\":" + q(r.hash.shortHex()) +
           ",\"reason\":" + q(reasonName(r.reason)));
    for (const auto& r : fx.rounds)
      line("\"ev\":\"round\",\"agent\":" + std::to_string(a) + ",\"height\":" + std::to_string(r.height) +
           ",\"seen\":" + std::to_string(r.seen) + ",\"waited\":" + std::to_string(r.waited) +
           ",\"batch\":" + std::to_string(r.batch));
    for (const auto& s : fx.sends) route(a, s);
    if (!dead_[a] && !sc_.script) {
      for (Tick after : fx.timers) {
        Event e;
        e.time = now_ + after;
        e.kind = Event::Kind::Timer;
        e.agent = a;
        push(e);
      }
    }
    for (const auto& b : naive) naiveDoublespend(a, b);
    if (!low())
      for (const auto& is : fx.issued)
        if (is.purpose == Purpose::Batch && batches_[a] < sc_.workload.rounds) topUp(a);
  }

  void route(std::uint32_t from, const Send& s) {
    if (sc_.script || dead_[from] || silent(from)) return;
    const std::uint32_t to = s.to.value;
    if (!allowed_[from][to]) return;
    const std::uint32_t id = idOf(s.block->hash);
    const BlockRecord& r = log_.blocks[id];
    if (colluder(from) && r.purpose != Purpose::Forged && r.purpose != Purpose::Genesis) return;
    ++counters_.messages;
    counters_.bytes += r.bytes + kEnvelopeBytes;
    if (s.kind == SendKind::Cordial) ++counters_.retransmissions;
    if (r.purpose == Purpose::Ack) ++counters_.ackMessages;
    Event e;
    e.time = now_ + delay();
    e.kind = Event::Kind::Deliver;
    e.agent = to;
    e.from = from;
    e.block = s.block;
    e.sendKind = s.kind;
    line("\"ev\":\"send\",\"from\":" + std::to_string(from) + ",\"to\":" + std::to_string(to) +
         ",\"block\":" + q(s.block->hash.shortHex()) + ",\"kind\":" +
         q(s.kind == SendKind::Issue ? "issue" : "cordial") + ",\"at\":" + std::to_string(e.time));
    push(std::move(e));
  }

  void onFinal(std::uint32_t a, std::uint32_t id) {
    const BlockRecord& r = log_.blocks[id];
    if (++finalCount_[id] == correctCount_ && r.liveness) --livenessPending_;
    for (const auto& p : r.block->pointers) {
      if (!p.isInput) continue;
      const auto key = std::make_pair(r.block->creator.value, p.target);
      auto [it, fresh] = perAgentSpends_[a].emplace(key, id);
      auto [g, gfresh] = globalSpends_.emplace(key, id);
      if (!fresh && it->second != id)
        violations_.push_back({now_, a, log_.blocks[it->second].block->hash, r.block->hash});
      else if (!gfresh && g->second != id)
        violations_.push_back({now_, SafetyViolation::kGlobal, log_.blocks[g->second].block->hash, r.block->hash});
    }
  }

  // -- adversaries ----------------------------------------------------------

  std::vector<std::uint32_t> othersCorrect(std::uint32_t a) const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t p = 0; p < n_; ++p)
      if (p != a && log_.correct[p]) out.push_back(p);
    return out;
  }

  void shuffle(std::vector<std::uint32_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[pick(i)]);
  }

  // Two blocks from the same state, each paying the whole balance to a
  // different victim, each sent to a disjoint half; then the agent goes quiet.
  void equivocate(std::uint32_t a) {
    attacked_[a] = true;
    Agent& ag = *agents_[a];
    const auto bal = ag.balanceBlock();
    auto victims = othersCorrect(a);
    if (!bal || victims.size() < 2) {
      dead_[a] = true;
      return;
    }
    shuffle(victims);
    const Blocklace& lace = ag.lace();
    std::vector<Pointer> ptrs;
    for (BlockIndex r : lace.roots()) ptrs.push_back(Pointer{lace.block(r).hash, lace.block(r).creator, false});
    ptrs.push_back(Pointer{lace.block(*bal).hash, AgentId(a), true});
    const Amount x = ag.balance();
    BlockPtr sideA = ag.forge({Payment{AgentId(victims[0]), x, false}}, ptrs);
    BlockPtr sideB = ag.forge({Payment{AgentId(victims[1]), x, false}}, ptrs);
    registerBlock(sideA, Purpose::Forged, a);
    registerBlock(sideB, Purpose::Forged, a);
    std::vector<std::uint32_t> others;
    for (std::uint32_t p = 0; p < n_; ++p)
      if (p != a) others.push_back(p);
    shuffle(others);
    for (std::size_t i = 0; i < others.size(); ++i)
      route(a, Send{AgentId(others[i]), i < others.size() / 2 ? sideA : sideB, SendKind::Issue});
    dead_[a] = true;
  }

  // Reuses the input of a block it just issued, pointing at that block.
  void naiveDoublespend(std::uint32_t a, const BlockPtr& spent) {
    attacked_[a] = true;
    const Blocklace& lace = agents_[a]->lace();
    const auto in = std::find_if(spent->pointers.begin(), spent->pointers.end(), [](const Pointer& p) { return p.isInput; });
    const Amount x = lace.block(in->target).paidTo(AgentId(a));
    auto victims = othersCorrect(a);
    if (victims.empty()) return;
    BlockPtr b = agents_[a]->forge({Payment{AgentId(victims[pick(victims.size())]), x, false}},
                                   {Pointer{spent->hash, AgentId(a), false}, *in});
    registerBlock(b, Purpose::Forged, a);
    for (std::uint32_t p = 0; p < n_; ++p)
      if (p != a) route(a, Send{AgentId(p), b, SendKind::Issue});
  }

  // Approves a partner's forged block with a fresh fork off its own initial block.
  void collude(std::uint32_t a, const BlockPtr& target) {
    const Blocklace& lace = agents_[a]->lace();
    const auto g = lace.initialBlock(AgentId(a));
    if (!g) return;
    BlockPtr y = agents_[a]->forge({}, {Pointer{target->hash, target->creator, false},
                                        Pointer{lace.block(*g).hash, AgentId(a), false}});
    registerBlock(y, Purpose::Forged, a);
    for (std::uint32_t p = 0; p < n_; ++p)
      if (p != a) route(a, Send{AgentId(p), y, SendKind::Issue});
  }

  // -- workload -------------------------------------------------------------

  Intent nextIntent(std::uint32_t a) {
    const std::size_t k = emitted_[a]++;
    std::size_t r = a;  // a lone agent can only pay itself, which is refused
    if (n_ > 1) r = (a + 1 + (sc_.workload.roundRobin ? k % (n_ - 1) : pick(n_ - 1))) % n_;
    const bool urgent = sc_.workload.urgentEvery > 0 && (k + 1) % sc_.workload.urgentEvery == 0;
    return Intent{AgentId(static_cast<std::uint32_t>(r)), sc_.workload.amount, urgent};
  }

  void topUp(std::uint32_t a) {
    if (!active(a)) return;
    const std::size_t k = sc_.workload.paymentsPerRoundIsN ? n_ : sc_.workload.paymentsPerRound;
    for (std::size_t i = 0; i < k; ++i) absorb(a, agents_[a]->pay(nextIntent(a), now_));
  }

  bool correctHasWork() const {
    for (std::size_t a = 0; a < n_; ++a)
      if (log_.correct[a] && agents_[a]->hasWork()) return true;
    return false;
  }

  std::optional<std::uint32_t> nextTurnTaker(std::uint32_t after) const {
    for (std::size_t i = 1; i <= n_; ++i) {
      const auto a = static_cast<std::uint32_t>((after + i) % n_);
      if (active(a)) return a;
    }
    return std::nullopt;
  }

  void ensureTicking() {
    if (stopped_ || !low()) return;
    if (sc_.schedule == Schedule::Turns && !turnPending_) {
      if (auto a = nextTurnTaker(lastTurn_)) {
        Event e;
        e.time = now_ + sc_.turnInterval;
        e.kind = Event::Kind::Turn;
        e.agent = *a;
        push(e);
        turnPending_ = true;
      }
    }
    if (sc_.schedule == Schedule::Eager && drainPhase_ && !drainPending_) {
      Event e;
      e.time = now_ + sc_.effectiveDrainInterval();
      e.kind = Event::Kind::Drain;
      push(e);
      drainPending_ = true;
    }
  }

  void progress() {
    if (low()) {
      if (!drainPhase_ && intentsLeft_ == 0 && !correctHasWork()) drainPhase_ = true;
      const bool satisfied = drainPhase_ && livenessPending_ == 0 && !correctHasWork();
      stopped_ = satisfied;
      ensureTicking();
    } else if (!stopped_ && livenessPending_ == 0) {
      bool past = true;
      for (std::size_t a = 0; a < n_; ++a)
        if (log_.correct[a] && dynamic_cast<const HighAgent&>(*agents_[a]).round() <= livenessTop_) past = false;
      stopped_ = past;
    }
  }

  void runWorkload() {
    for (std::uint32_t a = 0; a < n_; ++a)
      if (!silent(a)) absorb(a, agents_[a]->start(now_));
    if (low()) {
      for (std::uint32_t a = 0; a < n_; ++a)
        if (active(a)) intentsLeft_ += sc_.workload.paymentsPerAgent;
      if (sc_.schedule == Schedule::Eager) {
        for (std::size_t k = 0; k < sc_.workload.paymentsPerAgent; ++k)
          for (std::uint32_t a = 0; a < n_; ++a) {
            if (!active(a)) continue;
            Event e;
            e.time = 1 + k * sc_.workload.interval + a * sc_.workload.interval / n_;
            e.kind = Event::Kind::Intent;
            e.agent = a;
            push(e);
          }
      }
    } else {
      for (std::uint32_t a = 0; a < n_; ++a)
        if (sc_.workload.rounds > 0) topUp(a);
    }
    progress();
    while (!queue_.empty()) {
      if (steps_ >= sc_.maxSteps) {
        quiescent_ = false;
        break;
      }
      Event e = queue_.top();
      queue_.pop();
      now_ = e.time;
      ++steps_;
      dispatch(e);
      progress();
    }
  }

  void dispatch(const Event& e) {
    const std::uint32_t a = e.agent;
    switch (e.kind) {
      case Event::Kind::Deliver:
        if (silent(a) || dead_[a]) return;
        absorb(a, agents_[a]->receive(e.block, AgentId(e.from), now_));
        return;
      case Event::Kind::Timer:
        if (stopped_ || dead_[a]) return;
        if (behavior_[a] == Behavior::EquivocatingDoublespend && !attacked_[a]) return equivocate(a);
        absorb(a, agents_[a]->timer(now_));
        return;
      case Event::Kind::Intent:
        --intentsLeft_;
        if (!active(a)) return;
        if (behavior_[a] == Behavior::EquivocatingDoublespend && !attacked_[a]) return equivocate(a);
        absorb(a, agents_[a]->pay(nextIntent(a), now_));
        return;
      case Event::Kind::Turn: {
        turnPending_ = false;
        lastTurn_ = a;
        if (stopped_ || !active(a)) return;
        if (behavior_[a] == Behavior::EquivocatingDoublespend && !attacked_[a]) {
          intentsLeft_ -= sc_.workload.paymentsPerAgent - emitted_[a];
          return equivocate(a);
        }
        auto& ag = dynamic_cast<LowAgent&>(*agents_[a]);
        if (emitted_[a] < sc_.workload.paymentsPerAgent) {
          --intentsLeft_;
          absorb(a, ag.pay(nextIntent(a), now_));
        }
        absorb(a, ag.turn(now_));
        return;
      }
      case Event::Kind::Drain:
        drainPending_ = false;
        if (stopped_) return;
        for (std::uint32_t p = 0; p < n_; ++p)
          if (active(p)) absorb(p, dynamic_cast<LowAgent&>(*agents_[p]).heartbeat(now_));
        return;
    }
  }

  // -- scripted replays -----------------------------------------------------

  [[noreturn]] static void scriptError(const std::string& what) { throw ConfigError("script: " + what); }

  const Hash& label(const std::string& l) const {
    auto it = labels_.find(l);
    if (it == labels_.end()) scriptError("unknown label '" + l + "'");
    return it->second;
  }

  // Delivers `b` and everything it observes that `a` lacks, oldest first.
  void deliverWithPast(std::uint32_t a, const BlockPtr& b) {
    std::set<std::uint32_t> need;
    std::vector<const Block*> stack{b.get()};
    while (!stack.empty()) {
      const Block* x = stack.back();
      stack.pop_back();
      if (!need.insert(idOf(x->hash)).second) continue;
      for (const auto& p : x->pointers) stack.push_back(log_.blocks[idOf(p.target)].block.get());
    }
    for (std::uint32_t id : need) {
      const BlockPtr& x = log_.blocks[id].block;
      if (!agents_[a]->lace().contains(x->hash)) absorb(a, agents_[a]->receive(x, x->creator, now_));
    }
  }

  void runScript() {
    for (std::uint32_t a = 0; a < n_; ++a) {
      absorb(a, agents_[a]->start(now_));
      const auto g = agents_[a]->lace().initialBlock(AgentId(a));
      labels_["g" + std::to_string(a)] = agents_[a]->lace().block(*g).hash;
      latest_[a] = labels_["g" + std::to_string(a)];
    }
    for (std::uint32_t id = 0; id < log_.blocks.size(); ++id)
      for (std::uint32_t a = 0; a < n_; ++a)
        if (log_.correct[a]) deliverWithPast(a, log_.blocks[id].block);

    for (const json& op : *sc_.script) {
      ++now_;
      const auto l = op.value("label", std::string());
      if (l.empty() || labels_.count(l)) scriptError("each step needs a fresh label");
      const auto a = op.value("agent", n_);
      if (a >= n_) scriptError("bad agent in step " + l);
      std::vector<Pointer> ptrs;
      auto add = [&](const std::string& name, bool input) {
        const Hash& h = label(name);
        ptrs.push_back(Pointer{h, log_.blocks[idOf(h)].block->creator, input});
      };
      for (const auto& o : op.value("observe", std::vector<std::string>{})) add(o, false);
      for (const auto& i : op.value("inputs", std::vector<std::string>{})) add(i, true);
      if (!op.contains("chain")) {
        const Hash h = latest_[a];
        ptrs.push_back(Pointer{h, AgentId(static_cast<std::uint32_t>(a)), false});
      } else if (!op["chain"].is_null()) {
        add(op["chain"].get<std::string>(), false);
      }
      std::vector<Payment> pays;
      for (const auto& p : op.value("pay", json::array()))
        pays.push_back(Payment{AgentId(p.at("to").get<std::uint32_t>()), p.at("amount").get<Amount>(), false});
      const auto ua = static_cast<std::uint32_t>(a);
      BlockPtr b = agents_[ua]->forge(pays, ptrs);
      const bool correct = log_.correct[ua];
      registerBlock(b, correct ? (pays.empty() ? Purpose::Ack : Purpose::Payment) : Purpose::Forged, ua);
      labels_[l] = b->hash;
      latest_[ua] = b->hash;
      if (correct) {
        for (const auto& p : b->pointers) deliverWithPast(ua, log_.blocks[idOf(p.target)].block);
        Effects fx;
        const auto out = agents_[ua]->adopt(b, fx);
        if (out.status != AcceptStatus::Accepted) scriptError("correct agent cannot issue " + l);
        absorb(ua, std::move(fx));
      }
    }
    ++now_;
    for (std::uint32_t id = 0; id < log_.blocks.size(); ++id)
      for (std::uint32_t a = 0; a < n_; ++a)
        if (log_.correct[a]) deliverWithPast(a, log_.blocks[id].block);
  }

  void checkExpectations(RunResult& out) {
    if (!sc_.expect) return;
    json list = sc_.expect->is_array() ? *sc_.expect : json::array({*sc_.expect});
    for (const json& e : list) {
      const std::size_t f = e.value("f", sc_.faultBound());
      const std::size_t thr = supermajorityThreshold(n_, f);
      for (std::uint32_t a = 0; a < n_; ++a) {
        if (!log_.correct[a]) continue;
        const Blocklace& lace = agents_[a]->lace();
        auto check = [&](const std::string& l, bool want) {
          const auto idx = lace.find(label(l));
          const bool fin = idx && lace.isFinal(*idx, thr);
          if (fin != want)
            out.expectFailures.push_back(l + (want ? " not final" : " final") + " at agent " + std::to_string(a) +
                                         " (threshold " + std::to_string(thr) + ")");
        };
        for (const auto& l : e.value("final", std::vector<std::string>{})) check(l, true);
        for (const auto& l : e.value("not_final", std::vector<std::string>{})) check(l, false);
      }
    }
    out.verdicts.expect = out.expectFailures.empty() ? "pass" : "fail";
  }

  // -- end of run -----------------------------------------------------------

  Conservation conservation() const {
    const std::size_t m = log_.blocks.size();
    std::vector<bool> in(m), removed(m);
    for (std::size_t i = 0; i < m; ++i) in[i] = acceptedByCorrect_[i] > 0;
    std::map<std::pair<std::uint32_t, Hash>, std::vector<std::size_t>> users;
    for (std::size_t i = 0; i < m; ++i) {
      if (!in[i]) continue;
      const Block& b = *log_.blocks[i].block;
      for (const auto& p : b.pointers)
        if (p.isInput) users[{b.creator.value, p.target}].push_back(i);
    }
    for (const auto& [key, v] : users)
      if (v.size() > 1)
        for (std::size_t i : v)
          if (finalCount_[i] == 0) removed[i] = true;
    // registration order is topological: drop whatever spends a dropped block
    for (std::size_t i = 0; i < m; ++i) {
      if (!in[i] || removed[i]) continue;
      for (const auto& p : log_.blocks[i].block->pointers)
        if (p.isInput && (removed[idOf(p.target)] || !in[idOf(p.target)])) removed[i] = true;
    }
    std::set<std::pair<std::size_t, std::uint32_t>> spent;
    for (std::size_t i = 0; i < m; ++i) {
      if (!in[i] || removed[i]) continue;
      const Block& b = *log_.blocks[i].block;
      for (const auto& p : b.pointers)
        if (p.isInput) spent.insert({idOf(p.target), b.creator.value});
    }
    Conservation c;
    for (std::size_t i = 0; i < m; ++i) {
      if (!in[i] || removed[i]) continue;
      const Block& b = *log_.blocks[i].block;
      if (b.isInitial())
        for (const auto& p : b.payments) c.genesis += p.amount;
      for (const auto& p : b.payments) {
        if (spent.count({i, p.recipient.value})) continue;
        (finalCount_[i] > 0 ? c.finalUnspent : c.outstanding) += p.amount;
      }
    }
    return c;
  }

  RunResult finish() {
    RunResult out;
    out.scenario = sc_;
    out.steps = steps_;
    out.endTime = now_;
    out.quiescent = quiescent_ && queue_.empty();
    const bool violated = sc_.assumptionViolation && sc_.byzantineAgents().size() > sc_.faultBound();
    out.violations = violations_;
    if (!violations_.empty()) out.verdicts.safety = violated ? "assumption-violated" : "fail";
    out.conservation = conservation();
    if (!out.conservation.holds()) out.verdicts.conservation = violated ? "assumption-violated" : "fail";
    if (sc_.script) {
      out.verdicts.liveness = "skipped";
      checkExpectations(out);
      out.labels.insert(labels_.begin(), labels_.end());
    } else if (!out.quiescent) {
      out.verdicts.liveness = "nonquiescent";
    } else if (livenessPending_ > 0) {
      out.verdicts.liveness = "fail";
    }
    for (std::size_t a = 0; a < n_; ++a) {
      counters_.refusedIntents += agents_[a]->refusedIntents();
      if (log_.correct[a]) counters_.pendingOverflow += agents_[a]->lace().pendingOverflow();
      if (auto* la = dynamic_cast<const LowAgent*>(agents_[a].get())) counters_.urgentDowngraded += la->urgentDowngraded();
    }
    out.counters = counters_;
    if (opt_.metrics) out.metrics = summarize(log_, counters_, sc_.variant == Variant::High && !sc_.script);
    if (opt_.trace) {
      trace_ += "{\"t\":" + std::to_string(now_) + ",\"ev\":\"end\",\"verdicts\":" + out.verdicts.toJson().dump() + "}\n";
    }
    out.trace = std::move(trace_);
    out.log = std::move(log_);
    return out;
  }

  Scenario sc_;
  RunOptions opt_;
  std::size_t n_{0};
  std::mt19937_64 rng_;
  std::shared_ptr<const CryptoSuite> suite_;
  std::vector<std::unique_ptr<Agent>> agents_;
  std::vector<std::optional<Behavior>> behavior_;
  std::vector<bool> dead_, attacked_;
  std::vector<std::vector<bool>> allowed_;
  std::size_t correctCount_{0};

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_{0};
  Tick now_{0};
  std::uint64_t steps_{0};
  bool quiescent_{true};

  RunLog log_;
  Counters counters_;
  std::unordered_map<Hash, std::uint32_t, HashHasher> ids_;
  std::vector<std::size_t> finalCount_, acceptedByCorrect_;
  std::size_t livenessPending_{0};
  std::size_t livenessTop_{0};
  std::vector<std::map<std::pair<std::uint32_t, Hash>, std::uint32_t>> perAgentSpends_;
  std::map<std::pair<std::uint32_t, Hash>, std::uint32_t> globalSpends_;
  std::vector<SafetyViolation> violations_;

  std::vector<std::size_t> emitted_, batches_;
  std::size_t intentsLeft_{0};
  bool drainPhase_{false}, drainPending_{false}, turnPending_{false}, stopped_{false};
  std::uint32_t lastTurn_{0};

  std::map<std::string, Hash> labels_;
  std::map<std::uint32_t, Hash> latest_;
  std::string trace_;
};

}  // namespace

RunResult run(const Scenario& scenario, const RunOptions& options) { return Simulation(scenario, options).run(); }

}  // namespace flash
