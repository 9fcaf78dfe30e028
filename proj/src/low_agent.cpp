#include "flash/low_agent.hpp"

#include <algorithm>

namespace flash {

bool urgentHonoured(const Blocklace& lace, BlockIndex b, const UrgentPolicy& policy) {
  const Block& blk = lace.block(b);
  if (!blk.hasUrgentPayment()) return false;
  const IndexSet& cl = lace.closure(b);
  std::vector<BlockIndex> chain;
  for (BlockIndex y : lace.blocksBy(blk.creator)) {
    if (cl.test(y)) chain.push_back(y);
  }
  const std::size_t from = chain.size() > policy.window ? chain.size() - policy.window : 0;
  std::size_t urgent = 0;
  for (std::size_t i = from; i < chain.size(); ++i) urgent += lace.block(chain[i]).hasUrgentPayment();
  return urgent <= policy.cap;
}

LowAgent::LowAgent(AgentParams params, LowConfig config) : Agent(std::move(params)), config_(config) {
  if (config_.urgent.window == 0) throw ConfigError("urgent window must be positive");
}

Effects LowAgent::start(Tick now) { return Agent::start(now); }

Effects LowAgent::receive(const BlockPtr& b, AgentId from, Tick now) {
  Effects fx = Agent::receive(b, from, now);
  issueAcks(fx);
  if (config_.schedule == Schedule::Eager) pump(fx);
  return fx;
}

Effects LowAgent::pay(const Intent& intent, Tick) {
  Effects fx;
  queue_.push_back(intent);
  if (config_.schedule == Schedule::Eager) pump(fx);
  return fx;
}

bool LowAgent::hasWork() const { return !incoming_.empty() || !queue_.empty() || !toAck_.empty(); }

Effects LowAgent::turn(Tick now) {
  Effects fx;
  if (auto tx = nextTransaction()) {
    issueTransaction(*tx, tx->purpose, fx);
  } else {
    fx.append(heartbeat(now));
  }
  return fx;
}

Effects LowAgent::heartbeat(Tick) {
  Effects fx;
  if (balanceBlock_) issueTransaction(Transaction{{}, {}, Purpose::Heartbeat}, Purpose::Heartbeat, fx);
  return fx;
}

void LowAgent::pump(Effects& fx) {
  while (auto tx = nextTransaction()) issueTransaction(*tx, tx->purpose, fx);
}

std::optional<Transaction> LowAgent::nextTransaction() {
  pruneIncoming();
  if (!balanceBlock_) return std::nullopt;
  if (!incoming_.empty()) {
    const BlockIndex b = incoming_.front();
    const Amount sum = balance_ + lace_.block(b).paidTo(self_);
    return Transaction{{b, *balanceBlock_}, {Payment{self_, sum, false}}, Purpose::Consolidation};
  }
  while (!queue_.empty()) {
    const Intent& in = queue_.front();
    if (in.amount > balance_ || in.to == self_ || in.to.value >= agentCount()) {
      queue_.pop_front();
      ++refused_;
      continue;
    }
    bool urgent = in.urgent;
    if (urgent && !ownBudgetAllows()) {
      urgent = false;
      ++downgraded_;
    }
    return Transaction{{*balanceBlock_},
                       {Payment{in.to, in.amount, urgent}, Payment{self_, balance_ - in.amount, false}},
                       Purpose::Payment};
  }
  return std::nullopt;
}

bool LowAgent::ownBudgetAllows() const {
  const auto& mine = lace_.blocksBy(self_);
  const std::size_t keep = config_.urgent.window - 1;
  const std::size_t from = mine.size() > keep ? mine.size() - keep : 0;
  std::size_t urgent = 0;
  for (std::size_t i = from; i < mine.size(); ++i) urgent += lace_.block(mine[i]).hasUrgentPayment();
  return urgent + 1 <= config_.urgent.cap;
}

std::vector<Pointer> LowAgent::smallBlockPointers(const Transaction& tx) const {
  std::vector<Pointer> ptrs;
  std::vector<BlockIndex> targets;
  for (BlockIndex i : tx.inputs) {
    ptrs.push_back(pointerTo(i, true));
    targets.push_back(i);
  }
  const auto last = lace_.lastBlock(self_);
  auto covers = [&](BlockIndex x) {
    return std::any_of(targets.begin(), targets.end(), [&](BlockIndex t) { return lace_.observes(t, x); });
  };
  auto take = [&](BlockIndex r) {
    ptrs.push_back(pointerTo(r, false));
    targets.push_back(r);
  };

  const auto roots = lace_.roots();
  if (roots.size() == 1) {
    take(roots.front());
  } else if (!roots.empty()) {
    IndexSet unobserved = lace_.all();
    unobserved.subtract(lace_.observedBy(self_));
    auto rootCovering = [&](BlockIndex x, std::optional<BlockIndex> skip) -> std::optional<BlockIndex> {
      for (BlockIndex r : roots) {
        if (r != skip && lace_.observes(r, x)) return r;
      }
      return std::nullopt;
    };
    std::optional<BlockIndex> r1;
    if (const auto oldest = unobserved.first(); oldest != IndexSet::npos) r1 = rootCovering(oldest, std::nullopt);
    if (!r1) r1 = roots.front();
    take(*r1);

    std::optional<BlockIndex> r2;
    if (last && !covers(last->index)) r2 = rootCovering(last->index, r1);
    for (std::size_t x = unobserved.first(); !r2 && x != IndexSet::npos; x = unobserved.nextFrom(x + 1)) {
      if (!covers(x)) r2 = rootCovering(x, r1);
    }
    if (!r2) {
      for (BlockIndex r : roots) {
        if (r != *r1) {
          r2 = r;
          break;
        }
      }
    }
    if (r2) take(*r2);
  }
  // Never leave the previous self-block unobserved: that would equivocate.
  if (last && !covers(last->index)) take(last->index);
  return ptrs;
}

void LowAgent::issueTransaction(const Transaction& tx, Purpose purpose, Effects& fx) {
  std::optional<BlockIndex> previous;
  if (auto last = lace_.lastBlock(self_)) previous = last->index;
  if (purpose == Purpose::Payment) queue_.pop_front();
  issue(tx.outputs, smallBlockPointers(tx), purpose, fx);
  disseminate(previous, fx);
}

void LowAgent::onAccepted(BlockIndex i, Effects&) {
  if (lace_.block(i).creator != self_ && urgentHonoured(lace_, i, config_.urgent)) toAck_.push_back(i);
}

void LowAgent::issueAcks(Effects& fx) {
  while (!toAck_.empty()) {
    const BlockIndex target = toAck_.front();
    toAck_.pop_front();
    const auto last = lace_.lastBlock(self_);
    if (!last) continue;
    issue({}, {pointerTo(target, false), pointerTo(last->index, false)}, Purpose::Ack, fx);
    ++acks_;
  }
}

}  // namespace flash
