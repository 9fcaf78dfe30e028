#include "flash/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace flash {

using nlohmann::json;

namespace {

const std::pair<Behavior, const char*> kBehaviors[] = {
    {Behavior::Silent, "silent"},
    {Behavior::Withholding, "withholding"},
    {Behavior::NaiveDoublespend, "naive_doublespend"},
    {Behavior::EquivocatingDoublespend, "equivocating_doublespend"},
    {Behavior::Colluding, "colluding"},
};

[[noreturn]] void bad(const std::string& what) { throw ConfigError("scenario: " + what); }

template <typename T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(std::string("field '") + key + "': " + e.what());
  }
}

void known(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) bad(std::string(where) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
      bad(std::string("unknown field '") + it.key() + "' in " + where);
  }
}

DelayModel delayFromJson(const json& j) {
  known(j, {"model", "ticks", "mean", "sigma", "bound"}, "delay");
  DelayModel d;
  auto m = field<std::string>(j, "model", "synchronous");
  if (m == "synchronous") d.kind = DelayModel::Kind::Synchronous;
  else if (m == "normal") d.kind = DelayModel::Kind::Normal;
  else if (m == "adversarial") d.kind = DelayModel::Kind::Adversarial;
  else bad("unknown delay model '" + m + "'");
  d.ticks = field<Tick>(j, "ticks", d.ticks);
  d.mean = field<double>(j, "mean", d.mean);
  d.sigma = field<double>(j, "sigma", d.sigma);
  d.bound = field<Tick>(j, "bound", d.bound);
  return d;
}

json delayToJson(const DelayModel& d) {
  switch (d.kind) {
    case DelayModel::Kind::Synchronous: return {{"model", "synchronous"}, {"ticks", d.ticks}};
    case DelayModel::Kind::Normal: return {{"model", "normal"}, {"mean", d.mean}, {"sigma", d.sigma}};
    case DelayModel::Kind::Adversarial: return {{"model", "adversarial"}, {"bound", d.bound}};
  }
  return {};
}

}  // namespace

std::string_view behaviorName(Behavior b) {
  for (auto& [k, name] : kBehaviors)
    if (k == b) return name;
  return "?";
}

Behavior behaviorFromName(const std::string& s) {
  for (auto& [k, name] : kBehaviors)
    if (s == name) return k;
  bad("unknown behavior '" + s + "'");
}

std::size_t Scenario::faultBound() const {
  if (f) return *f;
  return n == 0 ? 0 : (n - 1) / 3;
}

std::vector<Amount> Scenario::genesisAmounts() const {
  if (auto* one = std::get_if<Amount>(&genesis)) return std::vector<Amount>(n, *one);
  return std::get<std::vector<Amount>>(genesis);
}

std::vector<std::pair<AgentId, Behavior>> Scenario::byzantineAgents() const {
  std::vector<std::pair<AgentId, Behavior>> out;
  std::set<std::uint32_t> taken;
  for (auto& spec : byzantine)
    for (auto a : spec.agents) {
      if (!taken.insert(a).second) bad("agent " + std::to_string(a) + " tagged twice");
      out.emplace_back(AgentId(a), spec.behavior);
    }
  // counted specs take the highest free ids, in spec order
  std::uint32_t next = static_cast<std::uint32_t>(n);
  for (auto& spec : byzantine) {
    if (!spec.agents.empty()) continue;
    std::size_t k = spec.count.value_or(0);
    if (spec.countMax) k = faultBound() > out.size() ? faultBound() - out.size() : 0;
    for (std::size_t i = 0; i < k; ++i) {
      do {
        if (next == 0) bad("not enough agents for byzantine count");
        --next;
      } while (taken.count(next));
      taken.insert(next);
      out.emplace_back(AgentId(next), spec.behavior);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Tick Scenario::effectiveDrainInterval() const {
  if (drainInterval > 0) return drainInterval;
  switch (delay.kind) {
    case DelayModel::Kind::Synchronous: return 2 * delay.ticks + 1;
    case DelayModel::Kind::Normal: return static_cast<Tick>(2 * (delay.mean + 3 * delay.sigma)) + 1;
    case DelayModel::Kind::Adversarial: return 2 * delay.bound + 1;
  }
  return 1;
}

void Scenario::validate() const {
  if (n == 0) bad("n must be positive");
  if (n > 4096) bad("n too large");
  if (3 * faultBound() >= n) bad("f must satisfy 3f < n (n=" + std::to_string(n) + ", f=" + std::to_string(faultBound()) + ")");
  if (auto* list = std::get_if<std::vector<Amount>>(&genesis); list && list->size() != n)
    bad("genesis list needs one amount per agent");
  if (crypto != "sim" && crypto != "ed25519") bad("unknown crypto suite '" + crypto + "'");
  switch (delay.kind) {
    case DelayModel::Kind::Synchronous:
      if (delay.ticks < 1) bad("synchronous delay must be at least 1 tick");
      break;
    case DelayModel::Kind::Normal:
      if (!(delay.mean >= 1.0) || !(delay.sigma >= 0.0)) bad("normal delay needs mean >= 1 and sigma >= 0");
      break;
    case DelayModel::Kind::Adversarial:
      if (delay.bound < 1) bad("adversarial bound must be at least 1");
      break;
  }
  if (schedule == Schedule::Turns && variant != Variant::Low) bad("turns schedule is for the low variant");
  if (turnInterval < 1) bad("turn_interval must be positive");
  if (workload.interval < 1) bad("workload interval must be positive");
  if (delta.ticks < 0) bad("delta ticks must be non-negative");
  if (!(delta.quantile >= 0.0 && delta.quantile <= 1.0)) bad("delta quantile must lie in [0,1]");
  if (urgent.window < 1) bad("urgent window must be positive");
  if (withholdPercent > 99) bad("withhold_percent must be below 100 (a strict subset)");
  if (maxSteps == 0) bad("max_steps must be positive");
  for (auto& spec : byzantine)
    for (auto a : spec.agents)
      if (a >= n) bad("byzantine agent " + std::to_string(a) + " out of range");
  auto byz = byzantineAgents();
  if (byz.size() > faultBound() && !assumptionViolation)
    bad(std::to_string(byz.size()) + " byzantine agents exceed f=" + std::to_string(faultBound()) +
        " (set assumption_violation to replay a model violation)");
  if (script && !script->is_array()) bad("script must be an array");
}

Scenario Scenario::fromJson(const json& j) {
  known(j, {"name", "variant", "n", "f", "genesis", "crypto", "delay", "schedule", "turn_interval", "workload", "delta",
            "byzantine", "urgent", "seed", "max_steps", "pending_cap", "drain_interval", "withhold_percent",
            "assumption_violation", "script", "expect", "description"},
        "scenario");
  Scenario s;
  s.name = field<std::string>(j, "name", s.name);
  s.description = field<std::string>(j, "description", "");
  auto v = field<std::string>(j, "variant", "low");
  if (v == "low") s.variant = Variant::Low;
  else if (v == "high") s.variant = Variant::High;
  else bad("unknown variant '" + v + "'");
  s.n = field<std::size_t>(j, "n", s.n);
  if (j.contains("f")) {
    if (j["f"].is_string()) {
      if (j["f"] != "max") bad("f must be a number or \"max\"");
    } else {
      s.f = field<std::size_t>(j, "f", 0);
    }
  }
  if (j.contains("genesis")) {
    if (j["genesis"].is_array()) s.genesis = field<std::vector<Amount>>(j, "genesis", {});
    else s.genesis = field<Amount>(j, "genesis", 0);
  }
  s.crypto = field<std::string>(j, "crypto", s.crypto);
  if (j.contains("delay")) s.delay = delayFromJson(j["delay"]);
  auto sched = field<std::string>(j, "schedule", "eager");
  if (sched == "eager") s.schedule = Schedule::Eager;
  else if (sched == "turns") s.schedule = Schedule::Turns;
  else bad("unknown schedule '" + sched + "'");
  s.turnInterval = field<Tick>(j, "turn_interval", s.turnInterval);
  if (j.contains("workload")) {
    auto& w = j["workload"];
    known(w, {"payments_per_agent", "payments_per_round", "rounds", "amount", "urgent_every", "interval", "recipients"},
          "workload");
    s.workload.paymentsPerAgent = field<std::size_t>(w, "payments_per_agent", 0);
    if (w.contains("payments_per_round") && w["payments_per_round"].is_string()) {
      if (w["payments_per_round"] != "n") bad("payments_per_round must be a number or \"n\"");
      s.workload.paymentsPerRoundIsN = true;
    } else {
      s.workload.paymentsPerRound = field<std::size_t>(w, "payments_per_round", 0);
    }
    s.workload.rounds = field<std::size_t>(w, "rounds", 0);
    s.workload.amount = field<Amount>(w, "amount", 1);
    s.workload.urgentEvery = field<std::size_t>(w, "urgent_every", 0);
    s.workload.interval = field<Tick>(w, "interval", s.workload.interval);
    const auto rec = field<std::string>(w, "recipients", "random");
    if (rec != "random" && rec != "round_robin") bad("recipients must be random or round_robin");
    s.workload.roundRobin = rec == "round_robin";
  }
  if (j.contains("delta")) {
    auto& d = j["delta"];
    known(d, {"policy", "ticks", "quantile", "stall"}, "delta");
    auto p = field<std::string>(d, "policy", "fixed");
    if (p == "fixed") s.delta.kind = DeltaPolicy::Kind::Fixed;
    else if (p == "percentile") s.delta.kind = DeltaPolicy::Kind::Percentile;
    else bad("unknown delta policy '" + p + "'");
    s.delta.ticks = field<std::int64_t>(d, "ticks", 0);
    s.delta.quantile = field<double>(d, "quantile", s.delta.quantile);
    s.delta.stall = field<std::int64_t>(d, "stall", -1);
  }
  if (j.contains("byzantine")) {
    if (!j["byzantine"].is_array()) bad("byzantine must be an array");
    for (auto& b : j["byzantine"]) {
      known(b, {"behavior", "agents", "count"}, "byzantine entry");
      ByzantineSpec spec;
      spec.behavior = behaviorFromName(field<std::string>(b, "behavior", ""));
      spec.agents = field<std::vector<std::uint32_t>>(b, "agents", {});
      if (b.contains("count")) {
        if (b["count"].is_string()) {
          if (b["count"] != "max") bad("count must be a number or \"max\"");
          spec.countMax = true;
        } else {
          spec.count = field<std::size_t>(b, "count", 0);
        }
      }
      if (!spec.agents.empty() && (spec.count || spec.countMax)) bad("byzantine entry has both agents and count");
      s.byzantine.push_back(spec);
    }
  }
  if (j.contains("urgent")) {
    known(j["urgent"], {"cap", "window"}, "urgent");
    s.urgent.cap = field<std::size_t>(j["urgent"], "cap", s.urgent.cap);
    s.urgent.window = field<std::size_t>(j["urgent"], "window", s.urgent.window);
  }
  s.seed = field<std::uint64_t>(j, "seed", s.seed);
  s.maxSteps = field<std::uint64_t>(j, "max_steps", s.maxSteps);
  s.pendingCap = field<std::size_t>(j, "pending_cap", s.pendingCap);
  s.drainInterval = field<Tick>(j, "drain_interval", s.drainInterval);
  s.withholdPercent = field<std::size_t>(j, "withhold_percent", s.withholdPercent);
  s.assumptionViolation = field<bool>(j, "assumption_violation", false);
  if (j.contains("script")) s.script = j["script"];
  if (j.contains("expect")) s.expect = j["expect"];
  s.validate();
  return s;
}

json Scenario::toJson() const {
  json j;
  j["name"] = name;
  if (!description.empty()) j["description"] = description;
  j["variant"] = variant == Variant::Low ? "low" : "high";
  j["n"] = n;
  if (f) j["f"] = *f;
  else j["f"] = "max";
  if (auto* one = std::get_if<Amount>(&genesis)) j["genesis"] = *one;
  else j["genesis"] = std::get<std::vector<Amount>>(genesis);
  j["crypto"] = crypto;
  j["delay"] = delayToJson(delay);
  j["schedule"] = schedule == Schedule::Turns ? "turns" : "eager";
  j["turn_interval"] = turnInterval;
  j["workload"] = {{"payments_per_agent", workload.paymentsPerAgent},
                   {"payments_per_round", workload.paymentsPerRoundIsN ? json("n") : json(workload.paymentsPerRound)},
                   {"rounds", workload.rounds},
                   {"amount", workload.amount},
                   {"urgent_every", workload.urgentEvery},
                   {"interval", workload.interval},
                   {"recipients", workload.roundRobin ? "round_robin" : "random"}};
  j["delta"] = {{"policy", delta.kind == DeltaPolicy::Kind::Fixed ? "fixed" : "percentile"},
                {"ticks", delta.ticks},
                {"quantile", delta.quantile}};
  if (delta.stall >= 0) j["delta"]["stall"] = delta.stall;
  json byz = json::array();
  for (auto& spec : byzantine) {
    json b{{"behavior", behaviorName(spec.behavior)}};
    if (!spec.agents.empty()) b["agents"] = spec.agents;
    else if (spec.countMax) b["count"] = "max";
    else if (spec.count) b["count"] = *spec.count;
    byz.push_back(b);
  }
  j["byzantine"] = byz;
  j["urgent"] = {{"cap", urgent.cap}, {"window", urgent.window}};
  j["seed"] = seed;
  j["max_steps"] = maxSteps;
  j["pending_cap"] = pendingCap;
  j["drain_interval"] = drainInterval;
  j["withhold_percent"] = withholdPercent;
  j["assumption_violation"] = assumptionViolation;
  if (script) j["script"] = *script;
  if (expect) j["expect"] = *expect;
  return j;
}

Scenario Scenario::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    bad(path + ": " + e.what());
  }
  return fromJson(j);
}

}  // namespace flash
