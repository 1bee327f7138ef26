#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "netsel/netsel.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool strict = false;
};

void add_common(CLI::App* cmd, Options& o, bool needs_config = true) {
  auto* c = cmd->add_option("--config", o.config, "experiment config (JSON)");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "override the experiment seed");
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
  cmd->add_flag("--strict", o.strict, "treat malformed input and empty partitions as fatal");
}

netsel::ExperimentConfig configure(const Options& o) {
  auto c = netsel::load_config(o.config);
  if (o.workers) c.workers = *o.workers;
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.output = o.out;
  c.strict = c.strict || o.strict;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"netsel: network model selection for attributed networks"};
  app.require_subcommand(1);
  Options o;
  auto* run = app.add_subcommand("run", "run every stage of an experiment");
  auto* ingest = app.add_subcommand("ingest", "ingest an events file into dataset artifacts");
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset into dataset artifacts");
  auto* infer = app.add_subcommand("infer", "infer every network model of the grid");
  auto* evaluate = app.add_subcommand("evaluate", "evaluate every grid config on validation and testing");
  auto* select = app.add_subcommand("select", "selection statistics from results.csv");
  auto* report = app.add_subcommand("report", "results and report files from cached prediction batches");
  for (auto* cmd : {run, ingest, synth, infer, evaluate, report}) add_common(cmd, o);
  add_common(select, o, false);
  CLI11_PARSE(app, argc, argv);

  try {
    if (select->parsed()) {
      std::string out = o.out;
      if (out.empty()) {
        if (o.config.empty()) throw netsel::Error("select needs --out or --config");
        out = configure(o).output;
      }
      netsel::stage_select(out);
      return EXIT_SUCCESS;
    }
    const auto c = configure(o);
    const std::filesystem::path out = c.output;
    if (run->parsed()) {
      const auto s = netsel::run_experiment(c, out);
      std::cout << s.configs << " configs evaluated in " << s.wall_seconds << " s; results in " << out.string()
                << "\n";
    } else if (ingest->parsed() || synth->parsed()) {
      if (ingest->parsed() && !c.dataset.events) throw netsel::Error("ingest needs a dataset.events block");
      if (synth->parsed() && !c.dataset.synth) throw netsel::Error("synth needs a dataset.synth block");
      const auto d = netsel::stage_dataset(c, out);
      netsel::write_manifest(out, netsel::manifest_header(c));
      std::cout << d.log.n_nodes() << " nodes, " << d.log.size() << " events\n";
      for (const auto& w : d.parts.warnings) std::cerr << "warning: " << w << "\n";
    } else if (infer->parsed()) {
      const auto d = netsel::load_dataset(c, out);
      const auto nets = netsel::stage_infer(c, d, out);
      std::cout << nets.size() << " network models written\n";
    } else if (evaluate->parsed()) {
      const auto d = netsel::load_dataset(c, out);
      const auto nets = netsel::load_networks(c, d, out);
      const auto ev = netsel::stage_evaluate(c, d, nets, out);
      netsel::write_manifest(out, netsel::evaluation_manifest(c, d, ev));
      std::cout << ev.batches.size() << " configs evaluated\n";
    } else if (report->parsed()) {
      const auto d = netsel::load_dataset(c, out);
      netsel::stage_report(netsel::load_batches(c, d, out), d.log, out);
    }
  } catch (const std::exception& e) {
    std::cerr << "netsel: " << e.what() << "\n";
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
