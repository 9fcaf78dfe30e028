#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "flash/blocklace.hpp"
#include "flash/crypto.hpp"
#include "flash/index_set.hpp"
#include "flash/types.hpp"

namespace flash {

/// Why an agent issued a block.
enum class Purpose { Genesis, Payment, Consolidation, Ack, Heartbeat, Batch, Forged };
std::string_view purposeName(Purpose p);

enum class SendKind { Issue, Cordial };

struct Send {
  AgentId to;
  BlockPtr block;
  SendKind kind{SendKind::Issue};
};

struct Issued {
  BlockPtr block;
  Purpose purpose{Purpose::Payment};
};

struct Rejection {
  Hash hash;
  RejectReason reason{RejectReason::None};
};

/// One high-congestion round as seen by its issuer.
struct RoundRecord {
  std::size_t height{0};
  /// Distinct creators (self included) of blocks the new block is first to observe.
  std::size_t seen{0};
  Tick waited{0};
  std::size_t batch{0};
};

/// Everything an agent did in response to one event. The simulator turns
/// sends into deliveries and the rest into trace records.
struct Effects {
  std::vector<Issued> issued;
  std::vector<Send> sends;
  std::vector<BlockPtr> accepted;
  std::vector<BlockPtr> finalized;
  std::vector<Rejection> rejected;
  std::vector<RoundRecord> rounds;
  /// Ask to be woken after each of these many ticks (high variant's waits).
  std::vector<Tick> timers;

  void append(Effects&& other);
};

struct Intent {
  AgentId to;
  Amount amount{0};
  bool urgent{false};
};

struct AgentParams {
  AgentId self;
  Quorum quorum;
  std::vector<Amount> genesis;
  std::shared_ptr<const CryptoSuite> suite;
  std::size_t pendingCap{1u << 16};
};

/// State shared by both protocol variants: the local blocklace, the
/// idempotent send ledger, the balance-carrying self-block and the queue of
/// finalized incoming payments awaiting consolidation.
class Agent {
 public:
  explicit Agent(AgentParams params);
  virtual ~Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  AgentId self() const { return self_; }
  const Blocklace& lace() const { return lace_; }
  std::size_t agentCount() const { return lace_.agentCount(); }

  /// Issues the initial block.
  virtual Effects start(Tick now);
  virtual Effects receive(const BlockPtr& b, AgentId from, Tick now);
  virtual Effects timer(Tick) { return {}; }
  /// Queues an outgoing payment.
  virtual Effects pay(const Intent& intent, Tick now) = 0;
  /// Whether the agent holds work it would issue a block for.
  virtual bool hasWork() const = 0;

  /// Spendable amount: the self-payment in the balance block.
  Amount balance() const { return balance_; }
  std::optional<BlockIndex> balanceBlock() const { return balanceBlock_; }
  const std::deque<BlockIndex>& incoming() const { return incoming_; }
  const std::deque<Intent>& queue() const { return queue_; }
  std::size_t refusedIntents() const { return refused_; }
  /// Agents excluded from dissemination: those seen equivocating.
  bool knownFaulty(AgentId q) const { return lace_.isEquivocator(q); }
  /// Blocks already sent to (or received from) q.
  const IndexSet& sentTo(AgentId q) const { return sent_.at(q.value); }

  // -- adversary hooks ----------------------------------------------------
  /// Seals a block as this agent without inserting or sending it.
  BlockPtr forge(std::vector<Payment> payments, std::vector<Pointer> pointers) const;
  /// Inserts a self-made block into the local blocklace without sending it.
  AcceptOutcome adopt(const BlockPtr& b, Effects& fx);

 protected:
  /// Seals, accepts locally, broadcasts to every other agent.
  BlockPtr issue(std::vector<Payment> payments, std::vector<Pointer> pointers, Purpose purpose, Effects& fx);
  /// Idempotent point-to-point send of a local block.
  void sendTo(AgentId q, BlockIndex b, SendKind kind, Effects& fx);
  /// Cordial dissemination: sends every agent not known to be faulty the
  /// blocks observed by `previous` (the issuer's prior self-block) that it
  /// neither observes nor was already sent.
  void disseminate(std::optional<BlockIndex> previous, Effects& fx);
  /// Pointer to a local block.
  Pointer pointerTo(BlockIndex i, bool input) const;
  /// Absorbs an AcceptOutcome: records accepted/final blocks and queues
  /// finalized incoming payments.
  void absorb(const AcceptOutcome& out, Effects& fx);
  /// Hook for each accepted block (own ones included), in acceptance order.
  virtual void onAccepted(BlockIndex, Effects&) {}

  /// Pops finalized incoming blocks already consumed or no longer usable.
  void pruneIncoming();

  AgentId self_;
  Blocklace lace_;
  std::vector<IndexSet> sent_;
  std::optional<BlockIndex> balanceBlock_;
  Amount balance_{0};
  std::deque<BlockIndex> incoming_;
  IndexSet consumed_;
  std::deque<Intent> queue_;
  std::size_t refused_{0};
};

}  // namespace flash
