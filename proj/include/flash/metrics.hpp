#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flash/agent.hpp"
#include "flash/types.hpp"

namespace flash {

/// One block as the simulator registered it at creation.
struct BlockRecord {
  BlockPtr block;
  Purpose purpose{Purpose::Payment};
  std::size_t height{1};
  /// Non-self output payments.
  std::size_t outgoing{0};
  std::size_t bytes{0};
  bool byCorrect{false};
  /// Counted by the liveness check (correct, not a drain heartbeat).
  bool liveness{false};
  bool urgent{false};
  Tick issued{0};
};

enum class LogKind : std::uint8_t { Issue, Accept, Final };

struct LogEntry {
  Tick time{0};
  LogKind kind{LogKind::Issue};
  std::uint32_t agent{0};
  std::uint32_t block{0};
};

/// Compact event log of a run: the input of every metric below.
struct RunLog {
  std::size_t n{0};
  std::vector<bool> correct;
  std::vector<BlockRecord> blocks;
  std::vector<LogEntry> entries;

  std::size_t correctCount() const;
};

/// Message-level counters collected while the run executes.
struct Counters {
  std::uint64_t messages{0};
  std::uint64_t bytes{0};
  std::uint64_t retransmissions{0};
  std::uint64_t ackMessages{0};
  std::uint64_t pendingOverflow{0};
  std::uint64_t refusedIntents{0};
  std::uint64_t urgentDowngraded{0};
};

/// Bytes a message adds on top of the block encoding (framing, sender id).
inline constexpr std::size_t kEnvelopeBytes = 16;

inline constexpr std::size_t kNoPos = std::numeric_limits<std::size_t>::max();

/// Greedy partition of a low-variant log into rounds. A round starting at
/// entry s ends at the first entry by which every correct agent has issued a
/// block at or after s and each of those blocks is accepted by every correct
/// agent.
struct RoundIndex {
  /// Last entry of each complete round.
  std::vector<std::size_t> ends;
  /// First entry of the trailing partial round (kNoPos if none).
  std::size_t partialFrom{kNoPos};

  /// Round number (0-based) of an entry; ends.size() for the partial tail.
  std::size_t roundOf(std::size_t entry) const;
};

RoundIndex roundIndexLow(const RunLog& log);

/// Rounds from issue to the first correct-agent finality of each block
/// (nullopt: never final). Low variant: counted with the greedy round
/// partition started at the issue entry. High variant: largest accepted
/// height at the finalizing agent minus the block's height.
std::vector<std::optional<std::size_t>> finalityLatencyLow(const RunLog& log);
std::vector<std::optional<std::size_t>> finalityLatencyHigh(const RunLog& log);

/// Latency over liveness blocks other than initial blocks.
struct LatencySummary {
  std::map<std::size_t, std::size_t> histogram;
  std::size_t max{0};
  double mean{0.0};
  /// Liveness blocks never final at any correct agent.
  std::size_t unfinalized{0};
  /// Blocks by Byzantine agents never final (acceptable).
  std::size_t unfinalizedByzantine{0};
};

struct MetricsReport {
  std::uint64_t messagesTotal{0};
  std::uint64_t bytesTotal{0};
  std::uint64_t blocksIssued{0};
  std::uint64_t paymentsIssued{0};
  std::uint64_t paymentsFinalized{0};
  double msgsPerPayment{0.0};
  double bytesPerPayment{0.0};
  double msgsPerBlock{0.0};
  std::uint64_t retransmissions{0};
  std::uint64_t ackBlocks{0};
  std::uint64_t ackMessages{0};
  std::uint64_t urgentBlocks{0};
  std::uint64_t pendingOverflow{0};
  std::uint64_t refusedIntents{0};
  std::uint64_t urgentDowngraded{0};
  std::size_t maxBlockBytes{0};
  double meanBlockBytes{0.0};
  std::size_t rounds{0};
  LatencySummary latency;

  nlohmann::json toJson() const;
  std::string table() const;
};

/// `highVariant` picks the latency measure.
MetricsReport summarize(const RunLog& log, const Counters& counters, bool highVariant);

LatencySummary summarizeLatency(const RunLog& log, const std::vector<std::optional<std::size_t>>& latency);

/// Log-log least-squares slope of ys over xs. A constant series gives 0.
/// Throws std::invalid_argument on fewer than two points or non-positive values.
double complexityFit(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace flash
