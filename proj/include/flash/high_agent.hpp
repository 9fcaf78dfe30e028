#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "flash/agent.hpp"

namespace flash {

struct DeltaPolicy {
  enum class Kind { Fixed, Percentile };
  Kind kind{Kind::Fixed};
  /// Fixed wait in ticks.
  std::int64_t ticks{0};
  /// Percentile policy: wait the q-quantile of observed arrival spreads
  /// (time between the first and each later block of the same height).
  double quantile{0.97};
  /// Ticks past Δ after a self-block with no newer one, after which the
  /// agent sends every peer what its latest block observes and the peer
  /// lacks. 0 disables; negative leaves the choice to the simulator.
  std::int64_t stall{-1};

  bool operator==(const DeltaPolicy&) const = default;
};

/// High-congestion agent: once blocks by a supermajority of creators are
/// unobserved by its last block (its own counting), it waits Δ and issues a
/// large block pointing to every root, batching queued payments and
/// consolidating finalized incoming ones. Each received q-block of height k
/// triggers sending q the lower blocks it has not observed.
///
/// Heights may skip, and the two sides of an equivocation can split the
/// correct agents, so that rule alone can leave every agent waiting for
/// blocks nobody sends. Three catch-up paths close the gap: each issue sends
/// peers what the previous self-block observes; a buffered q-block makes us
/// send q what our latest block stands on; and an agent with no new block
/// for Δ + stall ticks sends peers what its latest block observes.
class HighAgent : public Agent {
 public:
  HighAgent(AgentParams params, DeltaPolicy delta);

  Effects start(Tick now) override;
  Effects receive(const BlockPtr& b, AgentId from, Tick now) override;
  Effects timer(Tick now) override;
  Effects pay(const Intent& intent, Tick now) override;
  bool hasWork() const override { return !queue_.empty() || !incoming_.empty(); }

  bool cordial() const;
  /// Distinct creators of blocks the last self-block does not observe, plus self.
  std::size_t freshCreators() const;
  /// Height of the last self-block (0 before the initial block).
  std::size_t round() const;
  Tick currentDelta() const;
  bool waiting() const { return armed_; }

 private:
  void maybeArm(Tick now, Effects& fx);
  void issueLarge(Tick now, Effects& fx);
  void recordArrival(BlockIndex i, Tick now);
  void catchUp(Effects& fx);
  void armStall(Tick now, Effects& fx);

  DeltaPolicy delta_;
  bool armed_{false};
  Tick armedAt_{0};
  Tick armDeadline_{0};
  std::optional<Tick> stallDeadline_;
  bool stalled_{false};
  std::map<std::size_t, Tick> firstArrival_;
  std::vector<Tick> spreads_;
};

}  // namespace flash
