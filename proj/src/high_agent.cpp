#include "flash/high_agent.hpp"

#include <algorithm>
#include <cmath>

namespace flash {

HighAgent::HighAgent(AgentParams params, DeltaPolicy delta) : Agent(std::move(params)), delta_(delta) {
  if (delta_.ticks < 0) throw ConfigError("delta must be non-negative");
  if (delta_.stall < 0) delta_.stall = 0;
  if (!(delta_.quantile >= 0.0 && delta_.quantile <= 1.0)) throw ConfigError("delta quantile must lie in [0, 1]");
}

Effects HighAgent::start(Tick now) {
  Effects fx = Agent::start(now);
  armStall(now, fx);
  maybeArm(now, fx);
  return fx;
}

Effects HighAgent::receive(const BlockPtr& b, AgentId from, Tick now) {
  Effects fx = Agent::receive(b, from, now);
  if (lace_.isPending(b->hash) && b->creator != self_ && !knownFaulty(b->creator)) {
    // The creator issued a block on top of something we lack, so it may lack
    // what our own latest block stands on: send what it cannot be shown to
    // have. Without this two agents holding different sides of an
    // equivocation each wait for the other forever.
    if (const auto last = lace_.lastBlock(self_)) {
      IndexSet known = lace_.observedBy(b->creator);
      for (const Pointer& p : b->pointers)
        if (const auto t = lace_.find(p.target)) known |= lace_.closure(*t);
      IndexSet missing = lace_.closure(last->index);
      missing.subtract(known);
      missing.subtract(sent_[b->creator.value]);
      missing.forEach([&](std::size_t x) { sendTo(b->creator, x, SendKind::Cordial, fx); });
    }
  }
  const std::size_t acceptedNow = fx.accepted.size();
  if (stalled_ && acceptedNow > 0) catchUp(fx);
  for (std::size_t k = 0; k < acceptedNow; ++k) {
    const BlockIndex i = lace_.indexOf(fx.accepted[k]->hash);
    const Block& blk = lace_.block(i);
    if (blk.creator == self_) continue;
    recordArrival(i, now);
    const std::size_t h = lace_.height(i);
    if (!knownFaulty(blk.creator)) {
      // Receive & disseminate: the creator gets every lower block it has not observed.
      IndexSet missing = lace_.all();
      missing.subtract(lace_.observedBy(blk.creator));
      missing.subtract(sent_[blk.creator.value]);
      missing.forEach([&](std::size_t x) {
        if (lace_.height(x) < h) sendTo(blk.creator, x, SendKind::Cordial, fx);
      });
    }
  }
  maybeArm(now, fx);
  return fx;
}

Effects HighAgent::timer(Tick now) {
  Effects fx;
  if (armed_ && now >= armDeadline_) {
    armed_ = false;
    issueLarge(now, fx);
    maybeArm(now, fx);
  }
  if (stallDeadline_ && now >= *stallDeadline_) {
    stallDeadline_.reset();
    if (!armed_) {
      stalled_ = true;
      catchUp(fx);
    }
  }
  return fx;
}

Effects HighAgent::pay(const Intent& intent, Tick) {
  queue_.push_back(intent);
  return {};
}

std::size_t HighAgent::freshCreators() const {
  const auto last = lace_.lastBlock(self_);
  IndexSet fresh = lace_.all();
  if (last) fresh.subtract(lace_.closure(last->index));
  IndexSet creators;
  creators.set(self_.value);
  fresh.forEach([&](std::size_t i) { creators.set(lace_.block(i).creator.value); });
  return creators.count();
}

bool HighAgent::cordial() const {
  if (!lace_.lastBlock(self_)) return false;
  return freshCreators() >= lace_.config().quorum.threshold();
}

std::size_t HighAgent::round() const {
  const auto last = lace_.lastBlock(self_);
  return last ? lace_.height(last->index) : 0;
}

Tick HighAgent::currentDelta() const {
  if (delta_.kind == DeltaPolicy::Kind::Fixed) return static_cast<Tick>(delta_.ticks);
  if (spreads_.empty()) return 0;
  std::vector<Tick> sorted = spreads_;
  std::sort(sorted.begin(), sorted.end());
  // nearest rank
  const auto rank = static_cast<std::size_t>(std::ceil(delta_.quantile * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

void HighAgent::recordArrival(BlockIndex i, Tick now) {
  const std::size_t h = lace_.height(i);
  auto [it, fresh] = firstArrival_.emplace(h, now);
  if (!fresh) spreads_.push_back(now - it->second);
}

void HighAgent::maybeArm(Tick now, Effects& fx) {
  if (armed_ || !cordial()) return;
  armed_ = true;
  armedAt_ = now;
  // Always go through a timer, even for a zero wait, so that deliveries
  // landing on the same tick are absorbed first.
  const Tick wait = currentDelta();
  armDeadline_ = now + wait;
  fx.timers.push_back(wait);
}

void HighAgent::catchUp(Effects& fx) {
  if (const auto last = lace_.lastBlock(self_)) disseminate(last->index, fx);
}

void HighAgent::issueLarge(Tick now, Effects& fx) {
  pruneIncoming();
  RoundRecord rec;
  rec.seen = freshCreators();
  rec.waited = now - armedAt_;

  std::vector<Pointer> ptrs;
  for (BlockIndex r : lace_.roots()) ptrs.push_back(pointerTo(r, false));

  std::vector<Payment> outputs;
  Amount available = balance_;
  for (BlockIndex i : incoming_) available += lace_.block(i).paidTo(self_);
  Amount remaining = available;
  while (!queue_.empty()) {
    const Intent& in = queue_.front();
    if (in.to == self_ || in.to.value >= agentCount()) {
      queue_.pop_front();
      ++refused_;
      continue;
    }
    if (in.amount > remaining) break;
    outputs.push_back(Payment{in.to, in.amount, false});
    remaining -= in.amount;
    queue_.pop_front();
  }
  rec.batch = outputs.size();

  std::vector<Payment> payments;
  if (!outputs.empty() || !incoming_.empty()) {
    if (balanceBlock_) ptrs.push_back(pointerTo(*balanceBlock_, true));
    for (BlockIndex i : incoming_) ptrs.push_back(pointerTo(i, true));
    payments = std::move(outputs);
    payments.push_back(Payment{self_, remaining, false});
  }
  const auto previous = lace_.lastBlock(self_);
  BlockPtr b = issue(std::move(payments), std::move(ptrs), Purpose::Batch, fx);
  // Heights can skip (a chain of Byzantine blocks, or fresh initial blocks
  // making an agent cordial early), so the height filter of the receive rule
  // alone can strand an agent; catch every peer up to the previous self-block.
  disseminate(previous ? std::optional<BlockIndex>(previous->index) : std::nullopt, fx);
  rec.height = lace_.height(lace_.indexOf(b->hash));
  fx.rounds.push_back(rec);
  armStall(now, fx);
}

void HighAgent::armStall(Tick now, Effects& fx) {
  stalled_ = false;
  if (delta_.stall <= 0) return;
  const Tick after = currentDelta() + static_cast<Tick>(delta_.stall);
  stallDeadline_ = now + after;
  fx.timers.push_back(after);
}

}  // namespace flash
