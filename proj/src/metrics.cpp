#include "flash/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace flash {

std::size_t RunLog::correctCount() const { return static_cast<std::size_t>(std::count(correct.begin(), correct.end(), true)); }

std::size_t RoundIndex::roundOf(std::size_t entry) const {
  return static_cast<std::size_t>(std::lower_bound(ends.begin(), ends.end(), entry) - ends.begin());
}

namespace {

// Per-block and per-agent positions the round partition needs.
struct Positions {
  std::vector<std::size_t> issuePos;
  std::vector<std::size_t> allAccepted;  // entry at which the last correct agent accepted
  std::vector<std::size_t> firstFinal;   // first Final entry at a correct agent
  std::vector<std::vector<std::size_t>> issuesBy;  // correct agent -> its blocks, in issue order
  std::vector<std::uint32_t> correctAgents;

  explicit Positions(const RunLog& log)
      : issuePos(log.blocks.size(), kNoPos),
        allAccepted(log.blocks.size(), kNoPos),
        firstFinal(log.blocks.size(), kNoPos),
        issuesBy(log.n) {
    for (std::uint32_t a = 0; a < log.n; ++a)
      if (log.correct[a]) correctAgents.push_back(a);
    const std::size_t need = correctAgents.size();
    std::vector<std::size_t> accepts(log.blocks.size(), 0);
    for (std::size_t pos = 0; pos < log.entries.size(); ++pos) {
      const LogEntry& e = log.entries[pos];
      switch (e.kind) {
        case LogKind::Issue:
          issuePos[e.block] = pos;
          if (log.correct[e.agent]) issuesBy[e.agent].push_back(e.block);
          break;
        case LogKind::Accept:
          if (log.correct[e.agent] && ++accepts[e.block] == need) allAccepted[e.block] = pos;
          break;
        case LogKind::Final:
          if (log.correct[e.agent] && firstFinal[e.block] == kNoPos) firstFinal[e.block] = pos;
          break;
      }
    }
  }

  // End entry of the round that starts at entry s, or kNoPos if it never completes.
  std::size_t roundEnd(std::size_t s) const {
    std::size_t end = s;
    for (std::uint32_t a : correctAgents) {
      const auto& mine = issuesBy[a];
      auto it = std::lower_bound(mine.begin(), mine.end(), s,
                                 [&](std::size_t blk, std::size_t pos) { return issuePos[blk] < pos; });
      if (it == mine.end()) return kNoPos;
      const std::size_t done = allAccepted[*it];
      if (done == kNoPos) return kNoPos;
      end = std::max(end, done);
    }
    return end;
  }
};

}  // namespace

RoundIndex roundIndexLow(const RunLog& log) {
  const Positions pos(log);
  RoundIndex out;
  std::size_t s = 0;
  while (s < log.entries.size()) {
    const std::size_t e = pos.correctAgents.empty() ? kNoPos : pos.roundEnd(s);
    if (e == kNoPos) {
      out.partialFrom = s;
      break;
    }
    out.ends.push_back(e);
    s = e + 1;
  }
  return out;
}

std::vector<std::optional<std::size_t>> finalityLatencyLow(const RunLog& log) {
  const Positions pos(log);
  std::vector<std::optional<std::size_t>> out(log.blocks.size());
  for (std::size_t b = 0; b < log.blocks.size(); ++b) {
    const std::size_t fin = pos.firstFinal[b];
    if (fin == kNoPos || pos.issuePos[b] == kNoPos) continue;
    std::size_t s = pos.issuePos[b];
    std::size_t k = 1;
    while (true) {
      const std::size_t e = pos.roundEnd(s);
      if (e == kNoPos || fin <= e) break;
      s = e + 1;
      ++k;
    }
    out[b] = k;
  }
  return out;
}

std::vector<std::optional<std::size_t>> finalityLatencyHigh(const RunLog& log) {
  std::vector<std::optional<std::size_t>> out(log.blocks.size());
  std::vector<std::size_t> maxHeight(log.n, 0);
  for (const LogEntry& e : log.entries) {
    if (e.kind == LogKind::Accept) {
      maxHeight[e.agent] = std::max(maxHeight[e.agent], log.blocks[e.block].height);
    } else if (e.kind == LogKind::Final && log.correct[e.agent] && !out[e.block]) {
      const std::size_t h = log.blocks[e.block].height;
      out[e.block] = maxHeight[e.agent] > h ? maxHeight[e.agent] - h : 0;
    }
  }
  return out;
}

LatencySummary summarizeLatency(const RunLog& log, const std::vector<std::optional<std::size_t>>& latency) {
  LatencySummary s;
  std::size_t count = 0;
  double sum = 0;
  for (std::size_t b = 0; b < log.blocks.size(); ++b) {
    const BlockRecord& r = log.blocks[b];
    if (!latency[b]) {
      if (r.liveness) ++s.unfinalized;
      else if (!r.byCorrect) ++s.unfinalizedByzantine;
      continue;
    }
    // initial blocks point nowhere, so nothing issued alongside them approves them
    if (!r.liveness || r.purpose == Purpose::Genesis) continue;
    ++s.histogram[*latency[b]];
    s.max = std::max(s.max, *latency[b]);
    sum += static_cast<double>(*latency[b]);
    ++count;
  }
  s.mean = count ? sum / static_cast<double>(count) : 0.0;
  return s;
}

MetricsReport summarize(const RunLog& log, const Counters& c, bool highVariant) {
  MetricsReport m;
  m.messagesTotal = c.messages;
  m.bytesTotal = c.bytes;
  m.retransmissions = c.retransmissions;
  m.ackMessages = c.ackMessages;
  m.pendingOverflow = c.pendingOverflow;
  m.refusedIntents = c.refusedIntents;
  m.urgentDowngraded = c.urgentDowngraded;

  std::vector<bool> finalSomewhere(log.blocks.size(), false);
  for (const LogEntry& e : log.entries)
    if (e.kind == LogKind::Final && log.correct[e.agent]) finalSomewhere[e.block] = true;

  double bytesSum = 0;
  for (std::size_t b = 0; b < log.blocks.size(); ++b) {
    const BlockRecord& r = log.blocks[b];
    ++m.blocksIssued;
    m.paymentsIssued += r.outgoing;
    if (finalSomewhere[b]) m.paymentsFinalized += r.outgoing;
    if (r.purpose == Purpose::Ack) ++m.ackBlocks;
    if (r.urgent) ++m.urgentBlocks;
    m.maxBlockBytes = std::max(m.maxBlockBytes, r.bytes);
    bytesSum += static_cast<double>(r.bytes);
  }
  m.meanBlockBytes = log.blocks.empty() ? 0.0 : bytesSum / static_cast<double>(log.blocks.size());
  if (m.paymentsFinalized > 0) {
    m.msgsPerPayment = static_cast<double>(m.messagesTotal) / static_cast<double>(m.paymentsFinalized);
    m.bytesPerPayment = static_cast<double>(m.bytesTotal) / static_cast<double>(m.paymentsFinalized);
  }
  if (m.blocksIssued > 0) m.msgsPerBlock = static_cast<double>(m.messagesTotal) / static_cast<double>(m.blocksIssued);

  if (highVariant) {
    m.latency = summarizeLatency(log, finalityLatencyHigh(log));
    std::size_t top = 0;
    for (const auto& r : log.blocks)
      if (r.byCorrect) top = std::max(top, r.height);
    m.rounds = top;
  } else {
    m.latency = summarizeLatency(log, finalityLatencyLow(log));
    m.rounds = roundIndexLow(log).ends.size();
  }
  return m;
}

double complexityFit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("complexityFit needs at least two points");
  const double k = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  bool constant = true;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0) || !(ys[i] > 0)) throw std::invalid_argument("complexityFit needs positive values");
    if (ys[i] != ys[0]) constant = false;
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  if (constant) return 0.0;
  const double den = k * sxx - sx * sx;
  if (den == 0) throw std::invalid_argument("complexityFit needs distinct x values");
  return (k * sxy - sx * sy) / den;
}

nlohmann::json MetricsReport::toJson() const {
  nlohmann::json hist = nlohmann::json::object();
  for (auto [k, v] : latency.histogram) hist[std::to_string(k)] = v;
  return {{"messages", messagesTotal},
          {"bytes", bytesTotal},
          {"blocks", blocksIssued},
          {"payments_issued", paymentsIssued},
          {"payments_finalized", paymentsFinalized},
          {"msgs_per_payment", msgsPerPayment},
          {"bytes_per_payment", bytesPerPayment},
          {"msgs_per_block", msgsPerBlock},
          {"retransmissions", retransmissions},
          {"ack_blocks", ackBlocks},
          {"ack_messages", ackMessages},
          {"urgent_blocks", urgentBlocks},
          {"pending_overflow", pendingOverflow},
          {"refused_intents", refusedIntents},
          {"urgent_downgraded", urgentDowngraded},
          {"max_block_bytes", maxBlockBytes},
          {"mean_block_bytes", meanBlockBytes},
          {"rounds", rounds},
          {"latency",
           {{"max", latency.max},
            {"mean", latency.mean},
            {"histogram", hist},
            {"unfinalized", latency.unfinalized},
            {"unfinalized_byzantine", latency.unfinalizedByzantine}}}};
}

std::string MetricsReport::table() const {
  std::ostringstream o;
  auto row = [&](const char* k, auto v) { o << "  " << std::left << std::setw(22) << k << v << '\n'; };
  o << std::fixed << std::setprecision(3);
  row("messages", messagesTotal);
  row("bytes", bytesTotal);
  row("blocks", blocksIssued);
  row("payments finalized", paymentsFinalized);
  row("msgs/payment", msgsPerPayment);
  row("bytes/payment", bytesPerPayment);
  row("msgs/block", msgsPerBlock);
  row("retransmissions", retransmissions);
  row("ack blocks", ackBlocks);
  row("ack messages", ackMessages);
  row("max block bytes", maxBlockBytes);
  row("rounds", rounds);
  row("latency max", latency.max);
  row("latency mean", latency.mean);
  row("unfinalized", latency.unfinalized);
  return o.str();
}

}  // namespace flash
