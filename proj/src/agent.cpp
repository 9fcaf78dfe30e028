#include "flash/agent.hpp"

#include <stdexcept>
#include <string>

#include "flash/encoding.hpp"

namespace flash {

std::string_view purposeName(Purpose p) {
  switch (p) {
    case Purpose::Genesis: return "genesis";
    case Purpose::Payment: return "payment";
    case Purpose::Consolidation: return "consolidation";
    case Purpose::Ack: return "ack";
    case Purpose::Heartbeat: return "heartbeat";
    case Purpose::Batch: return "batch";
    case Purpose::Forged: return "forged";
  }
  return "?";
}

void Effects::append(Effects&& o) {
  auto move = [](auto& dst, auto& src) {
    dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
  };
  move(issued, o.issued);
  move(sends, o.sends);
  move(accepted, o.accepted);
  move(finalized, o.finalized);
  move(rejected, o.rejected);
  move(rounds, o.rounds);
  timers.insert(timers.end(), o.timers.begin(), o.timers.end());
}

Agent::Agent(AgentParams params)
    : self_(params.self),
      lace_(BlocklaceConfig{params.quorum, params.genesis, params.pendingCap}, std::move(params.suite)),
      sent_(params.quorum.n) {
  if (self_.value >= params.quorum.n) throw ConfigError("agent id outside the agent set");
}

Effects Agent::start(Tick) {
  Effects fx;
  const Amount x = lace_.config().genesis.empty() ? 0 : lace_.config().genesis[self_.value];
  issue({Payment{self_, x, false}}, {}, Purpose::Genesis, fx);
  return fx;
}

Effects Agent::receive(const BlockPtr& b, AgentId from, Tick) {
  Effects fx;
  const AcceptOutcome out = lace_.accept(b);
  if (out.status == AcceptStatus::Rejected) fx.rejected.push_back(Rejection{b->hash, out.reason});
  for (const Hash& h : out.cascadeRejected) fx.rejected.push_back(Rejection{h, RejectReason::DependsOnRejected});
  // The sender has it: never send it back.
  if (from != self_ && from.value < sent_.size()) {
    if (auto idx = lace_.find(b->hash)) sent_[from.value].set(*idx);
  }
  absorb(out, fx);
  return fx;
}

BlockPtr Agent::forge(std::vector<Payment> payments, std::vector<Pointer> pointers) const {
  return std::make_shared<const Block>(sealBlock(self_, std::move(payments), std::move(pointers), lace_.suite()));
}

AcceptOutcome Agent::adopt(const BlockPtr& b, Effects& fx) {
  AcceptOutcome out = lace_.accept(b);
  absorb(out, fx);
  return out;
}

BlockPtr Agent::issue(std::vector<Payment> payments, std::vector<Pointer> pointers, Purpose purpose, Effects& fx) {
  BlockPtr b = forge(std::move(payments), std::move(pointers));
  const AcceptOutcome out = lace_.accept(b);
  if (out.status != AcceptStatus::Accepted) {
    throw std::logic_error("agent " + std::to_string(self_.value) + " issued an unacceptable block (" +
                           std::string(reasonName(out.reason)) + ")");
  }
  const BlockIndex idx = out.accepted.front();
  fx.issued.push_back(Issued{b, purpose});
  for (const auto& p : b->pointers) {
    if (p.isInput) consumed_.set(lace_.indexOf(p.target));
  }
  if (std::any_of(b->payments.begin(), b->payments.end(), [&](const Payment& p) { return p.recipient == self_; })) {
    balanceBlock_ = idx;
    balance_ = b->paidTo(self_);
  }
  for (std::uint32_t q = 0; q < sent_.size(); ++q) sendTo(AgentId(q), idx, SendKind::Issue, fx);
  absorb(out, fx);
  pruneIncoming();
  return b;
}

void Agent::sendTo(AgentId q, BlockIndex b, SendKind kind, Effects& fx) {
  if (q == self_ || sent_[q.value].test(b)) return;
  sent_[q.value].set(b);
  fx.sends.push_back(Send{q, lace_.blockPtr(b), kind});
}

void Agent::disseminate(std::optional<BlockIndex> previous, Effects& fx) {
  if (!previous) return;
  for (std::uint32_t qi = 0; qi < agentCount(); ++qi) {
    const AgentId q(qi);
    if (q == self_ || knownFaulty(q)) continue;
    IndexSet missing = lace_.closure(*previous);
    missing.subtract(lace_.observedBy(q));
    missing.subtract(sent_[qi]);
    missing.forEach([&](std::size_t i) { sendTo(q, i, SendKind::Cordial, fx); });
  }
}

Pointer Agent::pointerTo(BlockIndex i, bool input) const {
  const Block& b = lace_.block(i);
  return Pointer{b.hash, b.creator, input};
}

void Agent::absorb(const AcceptOutcome& out, Effects& fx) {
  for (BlockIndex i : out.accepted) {
    fx.accepted.push_back(lace_.blockPtr(i));
    onAccepted(i, fx);
  }
  for (BlockIndex i : out.newlyFinal) {
    fx.finalized.push_back(lace_.blockPtr(i));
    const Block& b = lace_.block(i);
    if (b.creator != self_ && b.paidTo(self_) > 0 && !consumed_.test(i)) incoming_.push_back(i);
  }
}

void Agent::pruneIncoming() {
  std::erase_if(incoming_, [this](BlockIndex i) { return consumed_.test(i); });
}

}  // namespace flash
