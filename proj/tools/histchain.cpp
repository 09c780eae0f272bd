#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "histchain/attacks.hpp"
#include "histchain/audit.hpp"
#include "histchain/simulation.hpp"

namespace hc = histchain;

namespace {

constexpr int kUsageError = 2;
constexpr int kAssertionFailed = 1;

struct RunOptions {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> minutes;
  std::optional<int> nodes;
  std::optional<int> replication_factor;
  std::string scenario;
  bool trace_wire = false;
  int attack_interval = 2;
  bool passive = false;
  bool both_links = false;
  std::string out = "out";
};

hc::SimConfig build_config(const RunOptions& o) {
  hc::SimConfig c = o.config_file.empty() ? hc::SimConfig{} : hc::SimConfig::load(o.config_file);
  if (o.seed) c.seed = *o.seed;
  if (o.minutes) c.minutes = *o.minutes;
  if (o.nodes) c.n_storage_nodes = *o.nodes;
  if (o.replication_factor) c.replication_factor = *o.replication_factor;
  c.trace_wire = c.trace_wire || o.trace_wire;
  c.validate();
  return c;
}

int run(const RunOptions& o) {
  hc::SimConfig config;
  try {
    config = build_config(o);
  } catch (const std::exception& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kUsageError;
  }

  const std::filesystem::path out = o.out;
  std::unique_ptr<hc::Simulation> sim;
  std::optional<hc::ScenarioReport> report;
  try {
    hc::MitmSpec mitm{o.attack_interval, o.passive, o.both_links};
    if (o.scenario == "A") {
      sim = hc::make_reference_fixture(config);
      report = hc::run_scenario_A(*sim, hc::TamperSpec{});
    } else {
      sim = std::make_unique<hc::Simulation>(config);
      if (o.scenario == "B") {
        report = hc::run_scenario_B(*sim, mitm);
      } else if (o.scenario == "C") {
        report = hc::run_scenario_C(*sim, mitm);
      }
    }
  } catch (const hc::ScenarioSetupError& e) {
    std::cerr << "scenario setup: " << e.what() << '\n';
    return kUsageError;
  }
  sim->run();
  sim->write_artifacts(out);

  if (!report) {
    std::cout << "wrote artifacts to " << out.string() << " (" << sim->chain().size()
              << " blocks)\n";
    return 0;
  }
  hc::write_text(out / "report.txt", report->serialize());
  if (report->tampered_state) {
    report->tampered_state->write(out / "tampered");
  }
  std::cout << report->serialize();
  return report->passed() ? 0 : kAssertionFailed;
}

int audit(const std::string& dir, const std::string& hash) {
  const auto report = hc::audit_directory(dir, hc::parse_hash_algorithm(hash));
  std::cout << report.render();
  return report.chain.valid() && report.all_intact() ? 0 : kAssertionFailed;
}

int dump_chain(const std::string& dir, const std::string& hash) {
  std::ifstream in(std::filesystem::path(dir) / "chain.txt");
  if (!in) {
    throw std::runtime_error("cannot read " + dir + "/chain.txt");
  }
  const auto chain = hc::Chain::read_dump(in, hc::parse_hash_algorithm(hash));
  chain.write_dump(std::cout);
  const auto verdict = chain.verify();
  if (!verdict.valid()) {
    std::cerr << "first bad block at " << verdict.first_bad->position << ": "
              << hc::to_string(verdict.first_bad->reason) << '\n';
    return kAssertionFailed;
  }
  return 0;
}

int dump_historian(const std::string& dir, int node) {
  const auto path = std::filesystem::path(dir) / ("historian_" + std::to_string(node) + ".txt");
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  hc::Historian::read_dump(in).write_dump(std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Historian/blockchain SCADA integrity simulator"};
  app.require_subcommand(1);

  RunOptions opts;
  auto* run_cmd = app.add_subcommand("run", "Simulate and write artifacts");
  run_cmd->add_option("--config", opts.config_file, "key=value configuration file")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", opts.seed);
  run_cmd->add_option("--minutes", opts.minutes);
  run_cmd->add_option("--nodes", opts.nodes);
  run_cmd->add_option("--replication-factor", opts.replication_factor);
  run_cmd->add_option("--scenario", opts.scenario)->check(CLI::IsMember({"A", "B", "C"}));
  run_cmd->add_flag("--trace-wire", opts.trace_wire);
  run_cmd->add_option("--attack-interval", opts.attack_interval, "Scenarios B/C");
  run_cmd->add_flag("--passive", opts.passive, "Scenario B: eavesdrop only");
  run_cmd->add_flag("--both-links", opts.both_links, "Scenario C: attack node2 as well");
  run_cmd->add_option("--out", opts.out, "Artifact directory")->capture_default_str();

  std::string dir = "out";
  std::string hash = "sha256";
  int node = 0;
  auto* audit_cmd = app.add_subcommand("audit", "Re-verify dumped artifacts offline");
  auto* chain_cmd = app.add_subcommand("dump-chain", "Print and verify a chain dump");
  auto* hist_cmd = app.add_subcommand("dump-historian", "Print one node's historian dump");
  for (auto* cmd : {audit_cmd, chain_cmd, hist_cmd}) {
    cmd->add_option("--dir", dir, "Artifact directory")->capture_default_str();
    cmd->add_option("--hash", hash)->check(CLI::IsMember({"sha256", "sha512"}));
  }
  hist_cmd->add_option("node", node)->required()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*run_cmd) return run(opts);
    if (*audit_cmd) return audit(dir, hash);
    if (*chain_cmd) return dump_chain(dir, hash);
    return dump_historian(dir, node);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }
}
