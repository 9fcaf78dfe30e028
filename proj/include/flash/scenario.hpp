#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "flash/high_agent.hpp"
#include "flash/low_agent.hpp"
#include "flash/types.hpp"

namespace flash {

enum class Variant { Low, High };

struct DelayModel {
  enum class Kind { Synchronous, Normal, Adversarial };
  Kind kind{Kind::Synchronous};
  Tick ticks{1};      // synchronous
  double mean{10.0};  // normal
  double sigma{2.0};  // normal
  Tick bound{10};     // adversarial: uniform in [1, bound]

  bool operator==(const DelayModel&) const = default;
};

struct Workload {
  /// Low variant: payments each correct agent makes.
  std::size_t paymentsPerAgent{0};
  /// High variant: payments queued per agent after each of its blocks.
  std::size_t paymentsPerRound{0};
  /// payments_per_round given as "n": one payment per agent in the system.
  bool paymentsPerRoundIsN{false};
  /// High variant: rounds carrying workload.
  std::size_t rounds{0};
  Amount amount{1};
  /// Every k-th payment of an agent is urgent (0: none).
  std::size_t urgentEvery{0};
  /// Eager schedule: ticks between an agent's payment intents.
  Tick interval{20};
  /// Recipients drawn at random, or cycled (k-th payment of a goes to a+1+k
  /// mod n, skipping a) so every agent receives equally often.
  bool roundRobin{false};

  bool operator==(const Workload&) const = default;
};

enum class Behavior { Silent, Withholding, NaiveDoublespend, EquivocatingDoublespend, Colluding };

struct ByzantineSpec {
  Behavior behavior{Behavior::Silent};
  /// Explicit agents, or else the highest-numbered `count` agents not yet
  /// taken (`count` absent with `countMax`: as many as f allows).
  std::vector<std::uint32_t> agents;
  std::optional<std::size_t> count;
  bool countMax{false};

  bool operator==(const ByzantineSpec&) const = default;
};

/// A simulation scenario. Stored as JSON (see README for the schema).
struct Scenario {
  std::string name{"unnamed"};
  std::string description;
  Variant variant{Variant::Low};
  std::size_t n{4};
  /// Explicit fault bound; absent means the largest f with 3f < n.
  std::optional<std::size_t> f;
  /// One amount for everybody, or one per agent.
  std::variant<Amount, std::vector<Amount>> genesis{Amount{100}};
  std::string crypto{"sim"};
  DelayModel delay;
  Schedule schedule{Schedule::Eager};
  Tick turnInterval{4};
  Workload workload;
  DeltaPolicy delta;
  std::vector<ByzantineSpec> byzantine;
  UrgentPolicy urgent;
  std::uint64_t seed{1};
  std::uint64_t maxSteps{5'000'000};
  std::size_t pendingCap{1u << 16};
  /// Ticks between heartbeat waves once the workload is done.
  Tick drainInterval{0};
  /// Share of peers a withholding agent sends to, in percent.
  std::size_t withholdPercent{50};
  /// Marks scenarios that deliberately exceed f (safety demo).
  bool assumptionViolation{false};
  /// Scripted replays instead of a workload.
  std::optional<nlohmann::json> script;
  std::optional<nlohmann::json> expect;

  bool operator==(const Scenario&) const = default;

  std::size_t faultBound() const;
  std::vector<Amount> genesisAmounts() const;
  Quorum quorum() const { return Quorum{n, faultBound()}; }
  /// Byzantine agent -> behavior, resolved against n and f, sorted by agent.
  std::vector<std::pair<AgentId, Behavior>> byzantineAgents() const;
  Tick effectiveDrainInterval() const;

  /// Throws ConfigError on any inconsistency.
  void validate() const;

  static Scenario fromJson(const nlohmann::json& j);
  nlohmann::json toJson() const;
  static Scenario load(const std::string& path);
};

std::string_view behaviorName(Behavior b);
Behavior behaviorFromName(const std::string& s);

}  // namespace flash
