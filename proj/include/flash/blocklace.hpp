#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flash/crypto.hpp"
#include "flash/index_set.hpp"
#include "flash/types.hpp"

namespace flash {

/// Position of a block in a blocklace's receipt order. Receipt order is a
/// topological order of the pointer relation, so a block's closure only
/// contains indices <= its own.
using BlockIndex = std::size_t;

enum class Verdict { Correct, Incorrect, Pending };

enum class RejectReason {
  None,
  BadSeal,
  UnknownAgent,
  Malformed,
  GenesisMismatch,
  PointerCreatorMismatch,
  InputWithoutPayment,
  Unbalanced,
  NoInitialBlock,
  OwnEquivocation,
  OwnDoublespend,
  IncorrectDependency,
  DependsOnRejected,
};

std::string_view reasonName(RejectReason r);

struct Evaluation {
  Verdict verdict{Verdict::Pending};
  RejectReason reason{RejectReason::None};
  std::vector<Hash> missing;
};

enum class AcceptStatus { Accepted, Pending, Rejected, Duplicate };

struct AcceptOutcome {
  AcceptStatus status{AcceptStatus::Duplicate};
  RejectReason reason{RejectReason::None};
  /// The block itself (if accepted) followed by buffered blocks it released.
  std::vector<BlockIndex> accepted;
  /// Blocks that reached finality as a consequence, in detection order.
  std::vector<BlockIndex> newlyFinal;
  /// Buffered blocks dropped because a predecessor was rejected.
  std::vector<Hash> cascadeRejected;
};

struct BlocklaceConfig {
  Quorum quorum;
  /// Required initial self-payment per agent; empty accepts any amount.
  std::vector<Amount> genesis;
  std::size_t pendingCap{1u << 16};
};

struct LastBlock {
  BlockIndex index;
  /// Set when the agent has more than one maximal block (it equivocated);
  /// `index` is then the most recently accepted one.
  bool ambiguous{false};
};

/// An agent's local blocklace: a closed set of blocks plus derived indices
/// (closures, input reachability, equivocations, approvals, finality).
///
/// Approval and finality are cached per block. Both are monotone under
/// blocklace growth, so the caches only ever gain entries.
class Blocklace {
 public:
  Blocklace(BlocklaceConfig config, std::shared_ptr<const CryptoSuite> suite);

  // -- mutation ---------------------------------------------------------

  /// Receive rule: accept a correct block whose predecessors are present,
  /// buffer it if some are missing, reject it if verifiably incorrect.
  AcceptOutcome accept(BlockPtr b);

  /// Adds a block whose predecessors are present without judging its
  /// correctness (which is still computed and cached). Builds arbitrary
  /// blocklaces for analysis. Throws std::invalid_argument on missing
  /// predecessors, UnknownAgent ids or duplicates.
  BlockIndex insertUnchecked(BlockPtr b);

  // -- lookup -----------------------------------------------------------

  std::size_t size() const { return blocks_.size(); }
  bool contains(const Hash& h) const { return index_.count(h) != 0; }
  std::optional<BlockIndex> find(const Hash& h) const;
  /// Throws UnknownBlock.
  BlockIndex indexOf(const Hash& h) const;
  const Block& block(BlockIndex i) const { return *blocks_.at(i); }
  const BlockPtr& blockPtr(BlockIndex i) const { return blocks_.at(i); }
  const Block& block(const Hash& h) const { return block(indexOf(h)); }
  bool isPending(const Hash& h) const { return pending_.count(h) != 0; }
  std::size_t pendingCount() const { return pending_.size(); }
  std::size_t pendingOverflow() const { return pendingOverflow_; }
  bool wasRejected(const Hash& h) const { return rejected_.count(h) != 0; }

  const BlocklaceConfig& config() const { return config_; }
  const CryptoSuite& suite() const { return *suite_; }
  std::size_t agentCount() const { return config_.quorum.n; }

  // -- structural predicates ---------------------------------------------

  /// Reflexive reachability along any pointers.
  bool observes(BlockIndex from, BlockIndex to) const { return closure_.at(from).test(to); }
  bool observes(const Hash& from, const Hash& to) const { return observes(indexOf(from), indexOf(to)); }
  /// Reflexive reachability along input pointers only.
  bool dependsOn(BlockIndex from, BlockIndex to) const { return inputReach_.at(from).test(to); }
  bool dependsOn(const Hash& from, const Hash& to) const { return dependsOn(indexOf(from), indexOf(to)); }

  /// [b]: every block b observes, b included.
  const IndexSet& closure(BlockIndex b) const { return closure_.at(b); }
  const IndexSet& closure(const Hash& b) const { return closure(indexOf(b)); }
  /// [b]_i: blocks b depends on plus every block of b's creator that b observes.
  IndexSet inputClosure(BlockIndex b) const;
  IndexSet inputClosure(const Hash& b) const { return inputClosure(indexOf(b)); }

  /// Blocks not pointed to by any block, sorted by (creator, hash).
  std::vector<BlockIndex> roots() const;
  const IndexSet& rootSet() const { return roots_; }

  /// Same creator, distinct, neither observes the other.
  bool equivocation(BlockIndex a, BlockIndex b) const;
  bool equivocation(const Hash& a, const Hash& b) const { return equivocation(indexOf(a), indexOf(b)); }
  const std::vector<BlockIndex>& equivocatingWith(BlockIndex b) const { return equivocating_.at(b); }
  bool isEquivocator(AgentId q) const { return equivocators_.count(q) != 0; }
  /// Equivocator judged within [b] only.
  bool isEquivocatorWithin(AgentId q, BlockIndex b) const;
  const std::set<AgentId>& equivocators() const { return equivocators_; }

  /// Same creator, distinct, sharing an input target.
  static bool doublespend(const Block& a, const Block& b);

  /// Outputs sum to the creator's receipts in its inputs; initial blocks carry
  /// their genesis amount. Throws UnknownBlock if an input is absent.
  bool balanced(const Block& b) const;

  /// Correctness of a candidate (not necessarily inserted) block.
  Evaluation evaluate(const Block& b) const;
  /// Cached correctness of an inserted block.
  bool isCorrect(BlockIndex b) const { return correct_.at(b); }

  // -- approval and finality ---------------------------------------------

  bool approves(BlockIndex b, BlockIndex target) const;
  bool approves(const Hash& b, const Hash& target) const { return approves(indexOf(b), indexOf(target)); }
  bool agentApproves(AgentId q, BlockIndex target) const;
  bool agentApproves(AgentId q, const Hash& target) const { return agentApproves(q, indexOf(target)); }
  const IndexSet& approvers(BlockIndex target) const { return approvers_.at(target); }

  bool isFinal(BlockIndex b) const { return final_.test(b); }
  bool isFinal(const Hash& b) const { return isFinal(indexOf(b)); }
  /// Finality against an explicit threshold (used to replay f-violations).
  bool isFinal(BlockIndex b, std::size_t threshold) const { return approvers_.at(b).count() >= threshold; }
  const IndexSet& finalSet() const { return final_; }

  // -- accounting -------------------------------------------------------

  /// Payments to p in final blocks that no p-block uses as input.
  std::vector<Utxo> utxos(AgentId p) const;
  Amount balance(AgentId p) const;
  /// Agents whose blocks use `b` as input.
  const IndexSet& spentBy(BlockIndex b) const { return spentBy_.at(b); }

  // -- per-agent views ----------------------------------------------------

  const std::vector<BlockIndex>& blocksBy(AgentId p) const;
  std::optional<LastBlock> lastBlock(AgentId p) const;
  /// Union of the closures of every p-block: what p demonstrably knows.
  const IndexSet& observedBy(AgentId p) const;
  std::optional<BlockIndex> initialBlock(AgentId p) const;

  /// 1 for initial blocks, else 1 + the largest height among observed blocks.
  std::size_t height(BlockIndex b) const { return height_.at(b); }
  std::size_t maxHeight() const { return maxHeight_; }

  /// Bitset of every inserted index.
  IndexSet all() const;

 private:
  struct Candidate {
    Evaluation eval;
    IndexSet closure;
    IndexSet inputReach;
    std::vector<BlockIndex> targets;
  };

  Candidate analyse(const Block& b) const;
  BlockIndex insert(BlockPtr b, Candidate c, std::vector<BlockIndex>* newlyFinal);
  void releasePending(const Hash& arrived, AcceptOutcome& out);
  void rejectDependents(const Hash& rejectedHash, AcceptOutcome& out);
  void bufferPending(const BlockPtr& b, const std::vector<Hash>& missing);

  BlocklaceConfig config_;
  std::shared_ptr<const CryptoSuite> suite_;

  std::vector<BlockPtr> blocks_;
  std::unordered_map<Hash, BlockIndex, HashHasher> index_;
  std::vector<IndexSet> closure_;
  std::vector<IndexSet> inputReach_;
  std::vector<std::size_t> height_;
  std::vector<bool> correct_;
  std::vector<std::vector<BlockIndex>> equivocating_;
  std::vector<IndexSet> approvers_;
  std::vector<IndexSet> spentBy_;
  IndexSet final_;
  IndexSet roots_;
  std::size_t maxHeight_{0};

  std::vector<std::vector<BlockIndex>> byCreator_;
  std::vector<IndexSet> observedBy_;
  std::vector<std::vector<std::pair<BlockIndex, BlockIndex>>> equivocationPairs_;
  std::vector<std::vector<std::pair<BlockIndex, BlockIndex>>> doublespendPairs_;
  /// (creator, input target) -> blocks of creator spending target
  std::map<std::pair<std::uint32_t, BlockIndex>, std::vector<BlockIndex>> inputUsers_;
  std::set<AgentId> equivocators_;

  std::unordered_map<Hash, BlockPtr, HashHasher> pending_;
  std::unordered_map<Hash, std::vector<Hash>, HashHasher> waitingOn_;
  std::unordered_map<Hash, RejectReason, HashHasher> rejected_;
  std::size_t pendingOverflow_{0};
};

}  // namespace flash
