#include "flash/blocklace.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

#include "flash/encoding.hpp"

namespace flash {

std::string_view reasonName(RejectReason r) {
  switch (r) {
    case RejectReason::None: return "none";
    case RejectReason::BadSeal: return "bad-seal";
    case RejectReason::UnknownAgent: return "unknown-agent";
    case RejectReason::Malformed: return "malformed";
    case RejectReason::GenesisMismatch: return "genesis-mismatch";
    case RejectReason::PointerCreatorMismatch: return "pointer-creator-mismatch";
    case RejectReason::InputWithoutPayment: return "input-without-payment";
    case RejectReason::Unbalanced: return "unbalanced";
    case RejectReason::NoInitialBlock: return "no-initial-block";
    case RejectReason::OwnEquivocation: return "own-equivocation";
    case RejectReason::OwnDoublespend: return "own-doublespend";
    case RejectReason::IncorrectDependency: return "incorrect-dependency";
    case RejectReason::DependsOnRejected: return "depends-on-rejected";
  }
  return "?";
}

Blocklace::Blocklace(BlocklaceConfig config, std::shared_ptr<const CryptoSuite> suite)
    : config_(std::move(config)), suite_(std::move(suite)) {
  if (config_.quorum.n == 0) throw ConfigError("blocklace needs at least one agent");
  if (!config_.genesis.empty() && config_.genesis.size() != config_.quorum.n) {
    throw ConfigError("genesis map must name every agent");
  }
  if (!suite_) throw ConfigError("blocklace needs a crypto suite");
  byCreator_.resize(config_.quorum.n);
  observedBy_.resize(config_.quorum.n);
  equivocationPairs_.resize(config_.quorum.n);
  doublespendPairs_.resize(config_.quorum.n);
}

std::optional<BlockIndex> Blocklace::find(const Hash& h) const {
  auto it = index_.find(h);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

BlockIndex Blocklace::indexOf(const Hash& h) const {
  auto it = index_.find(h);
  if (it == index_.end()) throw UnknownBlock(h);
  return it->second;
}

Blocklace::Candidate Blocklace::analyse(const Block& b) const {
  Candidate c;
  auto fail = [&c](RejectReason r) {
    if (c.eval.verdict != Verdict::Incorrect) {
      c.eval.verdict = Verdict::Incorrect;
      c.eval.reason = r;
    }
  };
  const std::size_t n = config_.quorum.n;
  c.eval.verdict = Verdict::Correct;

  if (b.creator.value >= n) {
    fail(RejectReason::UnknownAgent);
    return c;
  }
  for (const auto& p : b.payments) {
    if (p.recipient.value >= n) {
      fail(RejectReason::UnknownAgent);
      return c;
    }
  }
  for (std::size_t i = 1; i < b.pointers.size(); ++i) {
    if (!(b.pointers[i - 1].target < b.pointers[i].target)) {
      fail(RejectReason::Malformed);
      return c;
    }
  }

  // Structure first: closure and input reachability are needed even for
  // blocks inserted without judgement.
  for (const auto& p : b.pointers) {
    auto it = index_.find(p.target);
    if (it == index_.end()) {
      if (rejected_.count(p.target) != 0) {
        fail(RejectReason::DependsOnRejected);
        return c;
      }
      c.eval.missing.push_back(p.target);
    } else {
      c.targets.push_back(it->second);
    }
  }
  if (!c.eval.missing.empty()) {
    c.eval.verdict = Verdict::Pending;
    return c;
  }

  const BlockIndex self = blocks_.size();
  c.closure.set(self);
  c.inputReach.set(self);
  for (std::size_t i = 0; i < b.pointers.size(); ++i) {
    const auto& p = b.pointers[i];
    const BlockIndex t = c.targets[i];
    if (blocks_[t]->creator != p.targetCreator) fail(RejectReason::PointerCreatorMismatch);
    c.closure |= closure_[t];
    if (p.isInput) c.inputReach |= inputReach_[t];
  }
  if (c.eval.verdict == Verdict::Incorrect) return c;

  if (!verifySeal(b, *suite_)) fail(RejectReason::BadSeal);

  // Inputs must pay the creator; the block must balance against them.
  Amount in = 0;
  for (std::size_t i = 0; i < b.pointers.size(); ++i) {
    if (!b.pointers[i].isInput) continue;
    const Block& input = *blocks_[c.targets[i]];
    const bool paysCreator = std::any_of(input.payments.begin(), input.payments.end(),
                                         [&](const Payment& pay) { return pay.recipient == b.creator; });
    if (!paysCreator) fail(RejectReason::InputWithoutPayment);
    const Amount paid = input.paidTo(b.creator);
    in += paid;
  }
  if (b.isInitial()) {
    if (b.payments.size() != 1 || b.payments.front().recipient != b.creator) {
      fail(RejectReason::Malformed);
    } else if (!config_.genesis.empty() && b.payments.front().amount != config_.genesis[b.creator.value]) {
      fail(RejectReason::GenesisMismatch);
    }
  } else {
    Amount out = 0;
    for (const auto& p : b.payments) out += p.amount;
    if (out != in) fail(RejectReason::Unbalanced);

    bool hasInitial = false;
    for (BlockIndex y : byCreator_[b.creator.value]) {
      if (blocks_[y]->isInitial() && c.closure.test(y)) {
        hasInitial = true;
        break;
      }
    }
    if (!hasInitial) fail(RejectReason::NoInitialBlock);
  }

  for (const auto& [x, y] : equivocationPairs_[b.creator.value]) {
    if (c.closure.test(x) && c.closure.test(y)) {
      fail(RejectReason::OwnEquivocation);
      break;
    }
  }
  for (const auto& [x, y] : doublespendPairs_[b.creator.value]) {
    if (c.closure.test(x) && c.closure.test(y)) {
      fail(RejectReason::OwnDoublespend);
      break;
    }
  }
  for (std::size_t i = 0; i < b.pointers.size(); ++i) {
    if (!b.pointers[i].isInput) continue;
    auto it = inputUsers_.find({b.creator.value, c.targets[i]});
    if (it == inputUsers_.end()) continue;
    for (BlockIndex y : it->second) {
      if (c.closure.test(y)) fail(RejectReason::OwnDoublespend);
    }
  }

  // Every block of the input closure other than b must itself be correct.
  IndexSet deps = c.inputReach;
  for (BlockIndex y : byCreator_[b.creator.value]) {
    if (c.closure.test(y)) deps.set(y);
  }
  deps.reset(self);
  bool depsCorrect = true;
  deps.forEach([&](std::size_t y) { depsCorrect = depsCorrect && correct_[y]; });
  if (!depsCorrect) fail(RejectReason::IncorrectDependency);

  return c;
}

Evaluation Blocklace::evaluate(const Block& b) const {
  if (auto idx = find(b.hash); idx && blocks_[*idx]->signature == b.signature) {
    return Evaluation{correct_[*idx] ? Verdict::Correct : Verdict::Incorrect, RejectReason::None, {}};
  }
  return analyse(b).eval;
}

BlockIndex Blocklace::insert(BlockPtr bp, Candidate c, std::vector<BlockIndex>* newlyFinal) {
  const Block& b = *bp;
  const BlockIndex m = blocks_.size();
  const std::uint32_t creator = b.creator.value;

  blocks_.push_back(bp);
  index_.emplace(b.hash, m);
  closure_.push_back(std::move(c.closure));
  inputReach_.push_back(std::move(c.inputReach));
  std::size_t h = 1;
  for (BlockIndex t : c.targets) h = std::max(h, height_[t] + 1);
  height_.push_back(h);
  maxHeight_ = std::max(maxHeight_, h);
  correct_.push_back(c.eval.verdict == Verdict::Correct);
  equivocating_.emplace_back();
  approvers_.emplace_back();
  spentBy_.emplace_back();

  roots_.set(m);
  for (BlockIndex t : c.targets) roots_.reset(t);

  const IndexSet& cl = closure_[m];
  for (BlockIndex y : byCreator_[creator]) {
    if (!cl.test(y)) {
      equivocating_[m].push_back(y);
      equivocating_[y].push_back(m);
      equivocationPairs_[creator].emplace_back(y, m);
      equivocators_.insert(b.creator);
    }
  }
  byCreator_[creator].push_back(m);
  observedBy_[creator] |= cl;

  for (std::size_t i = 0; i < b.pointers.size(); ++i) {
    if (!b.pointers[i].isInput) continue;
    const BlockIndex t = c.targets[i];
    auto& users = inputUsers_[{creator, t}];
    for (BlockIndex y : users) doublespendPairs_[creator].emplace_back(y, m);
    users.push_back(m);
    spentBy_[t].set(creator);
  }

  const std::size_t threshold = config_.quorum.threshold();
  cl.forEach([&](std::size_t x) {
    if (approvers_[x].test(creator)) return;
    for (BlockIndex y : equivocating_[x]) {
      if (cl.test(y)) return;
    }
    approvers_[x].set(creator);
    if (!final_.test(x) && approvers_[x].count() >= threshold) {
      final_.set(x);
      if (newlyFinal) newlyFinal->push_back(x);
    }
  });
  return m;
}

AcceptOutcome Blocklace::accept(BlockPtr b) {
  AcceptOutcome out;
  if (contains(b->hash) || pending_.count(b->hash) != 0) {
    out.status = AcceptStatus::Duplicate;
    return out;
  }
  if (auto it = rejected_.find(b->hash); it != rejected_.end()) {
    out.status = AcceptStatus::Rejected;
    out.reason = it->second;
    return out;
  }
  Candidate c = analyse(*b);
  switch (c.eval.verdict) {
    case Verdict::Pending:
      bufferPending(b, c.eval.missing);
      out.status = AcceptStatus::Pending;
      return out;
    case Verdict::Incorrect:
      // A block failing its seal is not attributable to the claimed hash.
      if (c.eval.reason != RejectReason::BadSeal) rejected_.emplace(b->hash, c.eval.reason);
      out.status = AcceptStatus::Rejected;
      out.reason = c.eval.reason;
      return out;
    case Verdict::Correct:
      break;
  }
  const Hash h = b->hash;
  out.accepted.push_back(insert(std::move(b), std::move(c), &out.newlyFinal));
  out.status = AcceptStatus::Accepted;
  releasePending(h, out);
  return out;
}

void Blocklace::bufferPending(const BlockPtr& b, const std::vector<Hash>& missing) {
  if (pending_.size() >= config_.pendingCap) {
    ++pendingOverflow_;
    return;
  }
  pending_.emplace(b->hash, b);
  waitingOn_[missing.front()].push_back(b->hash);
}

void Blocklace::releasePending(const Hash& arrived, AcceptOutcome& out) {
  std::deque<Hash> work{arrived};
  while (!work.empty()) {
    const Hash h = work.front();
    work.pop_front();
    auto wit = waitingOn_.find(h);
    if (wit == waitingOn_.end()) continue;
    std::vector<Hash> waiters = std::move(wit->second);
    waitingOn_.erase(wit);
    for (const Hash& w : waiters) {
      auto pit = pending_.find(w);
      if (pit == pending_.end()) continue;
      BlockPtr blk = pit->second;
      Candidate c = analyse(*blk);
      if (c.eval.verdict == Verdict::Pending) {
        waitingOn_[c.eval.missing.front()].push_back(w);
        continue;
      }
      pending_.erase(pit);
      if (c.eval.verdict == Verdict::Incorrect) {
        if (c.eval.reason != RejectReason::BadSeal) rejected_.emplace(w, c.eval.reason);
        out.cascadeRejected.push_back(w);
        rejectDependents(w, out);
        continue;
      }
      out.accepted.push_back(insert(std::move(blk), std::move(c), &out.newlyFinal));
      work.push_back(w);
    }
  }
}

void Blocklace::rejectDependents(const Hash& rejectedHash, AcceptOutcome& out) {
  std::deque<Hash> work{rejectedHash};
  while (!work.empty()) {
    const Hash h = work.front();
    work.pop_front();
    auto wit = waitingOn_.find(h);
    if (wit == waitingOn_.end()) continue;
    std::vector<Hash> waiters = std::move(wit->second);
    waitingOn_.erase(wit);
    for (const Hash& w : waiters) {
      if (pending_.erase(w) == 0) continue;
      rejected_.emplace(w, RejectReason::DependsOnRejected);
      out.cascadeRejected.push_back(w);
      work.push_back(w);
    }
  }
}

BlockIndex Blocklace::insertUnchecked(BlockPtr b) {
  if (contains(b->hash)) throw std::invalid_argument("block already present: " + b->hash.shortHex());
  Candidate c = analyse(*b);
  if (c.eval.verdict == Verdict::Pending) {
    throw std::invalid_argument("predecessor missing for block " + b->hash.shortHex());
  }
  // Failures detected before the closure is known are structural.
  if (c.eval.verdict == Verdict::Incorrect &&
      (c.closure.empty() || c.eval.reason == RejectReason::PointerCreatorMismatch)) {
    throw std::invalid_argument("structurally invalid block: " + std::string(reasonName(c.eval.reason)));
  }
  return insert(std::move(b), std::move(c), nullptr);
}

IndexSet Blocklace::inputClosure(BlockIndex b) const {
  IndexSet out = inputReach_.at(b);
  for (BlockIndex y : byCreator_[blocks_[b]->creator.value]) {
    if (closure_[b].test(y)) out.set(y);
  }
  return out;
}

std::vector<BlockIndex> Blocklace::roots() const {
  std::vector<BlockIndex> out = roots_.members();
  std::sort(out.begin(), out.end(), [this](BlockIndex a, BlockIndex b) {
    const Block& x = *blocks_[a];
    const Block& y = *blocks_[b];
    if (x.creator != y.creator) return x.creator < y.creator;
    return x.hash < y.hash;
  });
  return out;
}

bool Blocklace::equivocation(BlockIndex a, BlockIndex b) const {
  if (a == b) return false;
  if (blocks_.at(a)->creator != blocks_.at(b)->creator) return false;
  return !observes(a, b) && !observes(b, a);
}

bool Blocklace::isEquivocatorWithin(AgentId q, BlockIndex b) const {
  if (q.value >= config_.quorum.n) return false;
  const IndexSet& cl = closure_.at(b);
  for (const auto& [x, y] : equivocationPairs_[q.value]) {
    if (cl.test(x) && cl.test(y)) return true;
  }
  return false;
}

bool Blocklace::doublespend(const Block& a, const Block& b) {
  if (a.creator != b.creator || a.hash == b.hash) return false;
  for (const auto& pa : a.pointers) {
    if (!pa.isInput) continue;
    for (const auto& pb : b.pointers) {
      if (pb.isInput && pb.target == pa.target) return true;
    }
  }
  return false;
}

bool Blocklace::balanced(const Block& b) const {
  if (b.isInitial()) {
    if (b.payments.size() != 1 || b.payments.front().recipient != b.creator) return false;
    return config_.genesis.empty() || b.payments.front().amount == config_.genesis.at(b.creator.value);
  }
  Amount in = 0;
  for (const auto& p : b.pointers) {
    if (p.isInput) in += block(p.target).paidTo(b.creator);
  }
  Amount out = 0;
  for (const auto& p : b.payments) out += p.amount;
  return in == out;
}

bool Blocklace::approves(BlockIndex b, BlockIndex target) const {
  const IndexSet& cl = closure_.at(b);
  if (!cl.test(target)) return false;
  for (BlockIndex y : equivocating_.at(target)) {
    if (cl.test(y)) return false;
  }
  return true;
}

bool Blocklace::agentApproves(AgentId q, BlockIndex target) const {
  return q.value < config_.quorum.n && approvers_.at(target).test(q.value);
}

std::vector<Utxo> Blocklace::utxos(AgentId p) const {
  std::vector<Utxo> out;
  final_.forEach([&](std::size_t x) {
    if (spentBy_[x].test(p.value)) return;
    const Block& b = *blocks_[x];
    for (std::size_t i = 0; i < b.payments.size(); ++i) {
      if (b.payments[i].recipient == p) out.push_back(Utxo{b.hash, i, p, b.payments[i].amount});
    }
  });
  return out;
}

Amount Blocklace::balance(AgentId p) const {
  Amount sum = 0;
  for (const auto& u : utxos(p)) sum += u.amount;
  return sum;
}

const std::vector<BlockIndex>& Blocklace::blocksBy(AgentId p) const { return byCreator_.at(p.value); }

std::optional<LastBlock> Blocklace::lastBlock(AgentId p) const {
  const auto& mine = byCreator_.at(p.value);
  if (mine.empty()) return std::nullopt;
  LastBlock lb{mine.back(), false};
  for (BlockIndex y : mine) {
    if (!closure_[lb.index].test(y)) {
      lb.ambiguous = true;
      break;
    }
  }
  return lb;
}

const IndexSet& Blocklace::observedBy(AgentId p) const { return observedBy_.at(p.value); }

std::optional<BlockIndex> Blocklace::initialBlock(AgentId p) const {
  for (BlockIndex y : byCreator_.at(p.value)) {
    if (blocks_[y]->isInitial()) return y;
  }
  return std::nullopt;
}

IndexSet Blocklace::all() const {
  IndexSet s;
  for (BlockIndex i = 0; i < blocks_.size(); ++i) s.set(i);
  return s;
}

}  // namespace flash
