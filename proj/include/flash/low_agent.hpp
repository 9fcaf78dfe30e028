#pragma once

#include <deque>
#include <vector>

#include "flash/agent.hpp"

namespace flash {

enum class Schedule {
  /// One block per scheduled turn: consolidation, else a queued payment, else
  /// a heartbeat.
  Turns,
  /// Issue as soon as there is something to transact.
  Eager,
};

/// At most `cap` urgent blocks among any agent's last `window` blocks; the
/// window is counted along the creator's blocks in the urgent block's closure,
/// so every receiver reaches the same verdict.
struct UrgentPolicy {
  std::size_t cap{1};
  std::size_t window{4};

  bool operator==(const UrgentPolicy&) const = default;
};

struct LowConfig {
  Schedule schedule{Schedule::Eager};
  UrgentPolicy urgent;
};

/// Whether the urgent marks of block `b` are honoured under `policy`.
bool urgentHonoured(const Blocklace& lace, BlockIndex b, const UrgentPolicy& policy);

struct Transaction {
  std::vector<BlockIndex> inputs;
  std::vector<Payment> outputs;
  Purpose purpose{Purpose::Payment};
};

/// Low-congestion agent: small blocks (at most two inputs, two outputs, four
/// pointers), cordial dissemination on issue, consolidation of finalized
/// incoming payments and acks for urgent blocks.
class LowAgent : public Agent {
 public:
  LowAgent(AgentParams params, LowConfig config);

  Effects start(Tick now) override;
  Effects receive(const BlockPtr& b, AgentId from, Tick now) override;
  Effects pay(const Intent& intent, Tick now) override;
  bool hasWork() const override;

  /// Issues exactly one block (Turns schedule).
  Effects turn(Tick now);
  /// Issues an empty block with the usual pointers and dissemination; keeps
  /// the blocklace moving once payments stop.
  Effects heartbeat(Tick now);

  /// Pointers of a small block for `tx`: input pointers plus one or two roots.
  std::vector<Pointer> smallBlockPointers(const Transaction& tx) const;

  /// The next transaction the agent would issue: consolidation first, then
  /// the head of the payment queue. Unaffordable payments at the head are
  /// refused (dropped) on the way.
  std::optional<Transaction> nextTransaction();

  const LowConfig& config() const { return config_; }
  std::size_t acksIssued() const { return acks_; }
  std::size_t urgentDowngraded() const { return downgraded_; }

 protected:
  void onAccepted(BlockIndex i, Effects& fx) override;

 private:
  void issueTransaction(const Transaction& tx, Purpose purpose, Effects& fx);
  void issueAcks(Effects& fx);
  void pump(Effects& fx);
  bool ownBudgetAllows() const;

  LowConfig config_;
  std::deque<BlockIndex> toAck_;
  std::size_t acks_{0};
  std::size_t downgraded_{0};
};

}  // namespace flash
