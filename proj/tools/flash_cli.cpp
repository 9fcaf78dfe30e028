// flash: run scenario files through the simulator.
//
//   flash run scenarios/good-case-low.scn --seed 7 --format table
//   flash sweep scenarios/good-case-low.scn --n 4,8,16,32 --seeds 3 --out out/
//
// Exit status: 0 all verdicts pass, 1 some verdict failed, 2 usage/config error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "flash/netsim.hpp"

using namespace flash;
namespace fs = std::filesystem;

namespace {

void writeFile(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream o(p, std::ios::binary);
  if (!o) throw ConfigError("cannot write " + p.string());
  o << text;
}

const char* kCsvHeader =
    "scenario,n,f,seed,safety,liveness,conservation,expect,messages,bytes,blocks,payments_finalized,"
    "msgs_per_payment,bytes_per_payment,msgs_per_block,retransmissions,ack_blocks,ack_messages,latency_max,"
    "unfinalized,steps";

std::string csvRow(const RunResult& r) {
  std::ostringstream o;
  const auto& m = r.metrics;
  o << std::setprecision(10) << r.scenario.name << ',' << r.scenario.n << ',' << r.scenario.faultBound() << ','
    << r.scenario.seed << ',' << r.verdicts.safety << ',' << r.verdicts.liveness << ',' << r.verdicts.conservation
    << ',' << r.verdicts.expect << ',' << m.messagesTotal << ',' << m.bytesTotal << ',' << m.blocksIssued << ','
    << m.paymentsFinalized << ',' << m.msgsPerPayment << ',' << m.bytesPerPayment << ',' << m.msgsPerBlock << ','
    << m.retransmissions << ',' << m.ackBlocks << ',' << m.ackMessages << ',' << m.latency.max << ','
    << m.latency.unfinalized << ',' << r.steps;
  return o.str();
}

std::string table(const RunResult& r) {
  std::ostringstream o;
  o << "scenario " << r.scenario.name << "  n=" << r.scenario.n << " f=" << r.scenario.faultBound()
    << " seed=" << r.scenario.seed << '\n';
  o << "  safety " << r.verdicts.safety << "  liveness " << r.verdicts.liveness << "  conservation "
    << r.verdicts.conservation << "  expect " << r.verdicts.expect << '\n';
  for (const auto& e : r.expectFailures) o << "  expectation failed: " << e << '\n';
  o << r.metrics.table();
  o << "  conservation         " << r.conservation.finalUnspent << " final + " << r.conservation.outstanding
    << " outstanding = " << r.conservation.finalUnspent + r.conservation.outstanding << " (genesis "
    << r.conservation.genesis << ")\n";
  return o.str();
}

std::vector<std::size_t> parseList(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw ConfigError("bad n list '" + s + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous payment protocol simulator"};
  app.require_subcommand(1);

  std::string path, format = "table", outDir, nList;
  std::optional<std::uint64_t> seed, maxSteps;
  std::size_t seeds = 1;
  bool trace = false;

  auto* run = app.add_subcommand("run", "run one scenario");
  run->add_option("scenario", path, "scenario file")->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--out", outDir, "directory for report.json and trace.jsonl");
  run->add_option("--format", format, "stdout format")->check(CLI::IsMember({"json", "table", "csv"}));
  run->add_option("--max-steps", maxSteps, "override the step bound");
  run->add_flag("--trace", trace, "print the trace to stdout instead of a report");

  auto* sweep = app.add_subcommand("sweep", "run a scenario family over n and fit complexity slopes");
  sweep->add_option("scenario", path, "scenario file")->required();
  sweep->add_option("--n", nList, "comma-separated agent counts (at least two)")->required();
  sweep->add_option("--seeds", seeds, "seeds per point (scenario seed, +1, ...)")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", seed, "first seed");
  sweep->add_option("--out", outDir, "directory for sweep.csv");
  sweep->add_option("--format", format, "stdout format")->check(CLI::IsMember({"json", "table", "csv"}));
  sweep->add_option("--max-steps", maxSteps, "override the step bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Scenario sc = Scenario::load(path);
    if (run->parsed()) {
      RunOptions opt;
      opt.seed = seed;
      opt.maxSteps = maxSteps;
      opt.trace = trace || !outDir.empty();
      RunResult r = flash::run(sc, opt);
      if (!outDir.empty()) {
        writeFile(fs::path(outDir) / "report.json", r.toJson().dump(2) + "\n");
        writeFile(fs::path(outDir) / "trace.jsonl", r.trace);
      }
      if (trace) std::cout << r.trace;
      else if (format == "json") std::cout << r.toJson().dump(2) << '\n';
      else if (format == "csv") std::cout << kCsvHeader << '\n' << csvRow(r) << '\n';
      else std::cout << table(r);
      return r.verdicts.ok() ? 0 : 1;
    }

    const auto ns = parseList(nList);
    if (ns.size() < 2) {
      std::cerr << "sweep: need at least two values of n\n";
      return 2;
    }
    const std::uint64_t first = seed.value_or(sc.seed);
    std::vector<double> xs, msgs, bytes;
    std::ostringstream csv;
    csv << kCsvHeader << '\n';
    bool allOk = true;
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t n : ns) {
      Scenario s = sc;
      s.n = n;
      double m = 0, b = 0;
      for (std::size_t k = 0; k < seeds; ++k) {
        RunOptions opt;
        opt.seed = first + k;
        opt.maxSteps = maxSteps;
        RunResult r = flash::run(s, opt);
        allOk = allOk && r.verdicts.ok();
        csv << csvRow(r) << '\n';
        m += r.metrics.msgsPerPayment;
        b += r.metrics.bytesPerPayment;
      }
      xs.push_back(static_cast<double>(n));
      msgs.push_back(m / static_cast<double>(seeds));
      bytes.push_back(b / static_cast<double>(seeds));
      points.push_back({{"n", n}, {"msgs_per_payment", msgs.back()}, {"bytes_per_payment", bytes.back()}});
    }
    const double msgSlope = complexityFit(xs, msgs);
    const double byteSlope = complexityFit(xs, bytes);
    if (!outDir.empty()) writeFile(fs::path(outDir) / "sweep.csv", csv.str());
    if (format == "json") {
      std::cout << nlohmann::json{{"scenario", sc.name},
                                  {"points", points},
                                  {"msgs_slope", msgSlope},
                                  {"bytes_slope", byteSlope},
                                  {"ok", allOk}}
                       .dump(2)
                << '\n';
    } else if (format == "csv") {
      std::cout << csv.str();
    } else {
      std::cout << std::fixed << std::setprecision(3) << "sweep " << sc.name << '\n'
                << "  " << std::setw(6) << "n" << std::setw(16) << "msgs/payment" << std::setw(16) << "bytes/payment"
                << '\n';
      for (std::size_t i = 0; i < xs.size(); ++i)
        std::cout << "  " << std::setw(6) << xs[i] << std::setw(16) << msgs[i] << std::setw(16) << bytes[i] << '\n';
      std::cout << "  slope msgs/payment  " << msgSlope << "\n  slope bytes/payment " << byteSlope << '\n'
                << "  all runs " << (allOk ? "pass" : "FAIL") << '\n';
    }
    return allOk ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
