#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flash/metrics.hpp"
#include "flash/scenario.hpp"

namespace flash {

/// Two blocks spending the same input, both final.
struct SafetyViolation {
  Tick time{0};
  /// Correct agent at which both were final; kGlobal if only across agents.
  std::uint32_t agent{0};
  Hash first;
  Hash second;

  static constexpr std::uint32_t kGlobal = 0xffffffffu;
};

/// Unspent outputs of the correct agents' joint blocklace, after dropping
/// non-final doublespending blocks and whatever spends from them.
struct Conservation {
  Amount genesis{0};
  Amount finalUnspent{0};
  Amount outstanding{0};
  bool holds() const { return finalUnspent + outstanding == genesis; }
};

struct Verdicts {
  /// pass | fail | assumption-violated
  std::string safety{"pass"};
  /// pass | fail | nonquiescent | skipped
  std::string liveness{"pass"};
  /// pass | fail | assumption-violated
  std::string conservation{"pass"};
  /// pass | fail | skipped (script expectations)
  std::string expect{"skipped"};

  /// Everything passed or was explicitly allowed (assumption-violated runs).
  bool ok() const;
  nlohmann::json toJson() const;
};

struct RunOptions {
  bool trace{false};
  bool metrics{true};
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> maxSteps;
};

struct RunResult {
  Scenario scenario;
  Verdicts verdicts;
  MetricsReport metrics;
  Counters counters;
  RunLog log;
  std::vector<SafetyViolation> violations;
  Conservation conservation;
  /// JSON lines, if tracing was on.
  std::string trace;
  std::uint64_t steps{0};
  Tick endTime{0};
  bool quiescent{true};
  /// Script mode: label -> per-agent (finality, approvers) at the end.
  std::map<std::string, Hash> labels;
  std::vector<std::string> expectFailures;

  nlohmann::json toJson() const;
};

/// Runs a validated scenario to quiescence or its step bound. Deterministic:
/// the result (trace included) is a pure function of the scenario and options.
RunResult run(const Scenario& scenario, const RunOptions& options = {});

}  // namespace flash
