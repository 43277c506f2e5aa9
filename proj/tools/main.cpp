// modefusion: estimate an updated mode split by fusing mobile-network traces,
// app usage, census tables and an outdated survey.
//
//   modefusion synth --out city/
//   modefusion ingest --config city/pipeline.json
//   modefusion fit --config city/pipeline.json --instances 20
//   modefusion report --config city/pipeline.json
//
// Exit codes: 0 success, 1 validation failure, 2 I/O failure.

#include "modefusion/errors.hpp"
#include "modefusion/pipeline.hpp"
#include "modefusion/synth_city.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace modefusion;

struct Options {
  std::string config;
  std::string run_config;
  std::optional<std::string> data_configuration;
  std::optional<int> instances;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

struct SynthOptions {
  std::string out;
  std::size_t municipalities = 10;
  std::size_t towers = 200;
  std::size_t devices = 5000;
  std::size_t apps = 40;
  std::size_t days = 1;
  double noise = 0.05;
  std::uint64_t seed = 1;
};

void add_pipeline_flags(CLI::App* cmd, Options& o, bool run_flags) {
  cmd->add_option("--config", o.config, "Pipeline manifest (JSON)")->required();
  cmd->add_option("--run-config", o.run_config, "Run configuration overriding the manifest's");
  if (!run_flags) return;
  cmd->add_option("--data-configuration", o.data_configuration, "all, no-dpi or no-mobile");
  cmd->add_option("--instances", o.instances, "Number of model instances")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--out", o.out, "Output directory");
}

std::pair<PipelineManifest, PipelineConfig> load(const Options& o) {
  PipelineManifest manifest = PipelineManifest::load(o.config);
  if (o.out) manifest.output_dir = *o.out;
  const std::filesystem::path run_config = o.run_config.empty() ? manifest.run_config : std::filesystem::path(o.run_config);
  PipelineConfig config = run_config.empty() ? PipelineConfig{} : PipelineConfig::load(run_config);
  if (o.data_configuration) config.run.data_configuration = parse_data_configuration(*o.data_configuration);
  if (o.instances) config.run.n_instances = *o.instances;
  if (o.seed) config.run.base_seed = *o.seed;
  config.run.check();
  return {std::move(manifest), std::move(config)};
}

int run(int argc, char** argv) {
  CLI::App app{"Mode-split estimation by collective matrix tri-factorization"};
  app.require_subcommand(1);

  Options o;
  SynthOptions s;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic city bundle");
  synth->add_option("--out", s.out, "Bundle directory")->required();
  synth->add_option("--municipalities", s.municipalities);
  synth->add_option("--towers", s.towers);
  synth->add_option("--devices", s.devices);
  synth->add_option("--apps", s.apps);
  synth->add_option("--days", s.days);
  synth->add_option("--noise", s.noise);
  synth->add_option("--seed", s.seed);

  auto* ingest = app.add_subcommand("ingest", "Derive relations from raw traces and usage counts");
  add_pipeline_flags(ingest, o, false);
  auto* fit = app.add_subcommand("fit", "Fit model instances and keep the best");
  add_pipeline_flags(fit, o, true);
  auto* report = app.add_subcommand("report", "Write the updated split, shares and validation");
  add_pipeline_flags(report, o, true);
  auto* validate = app.add_subcommand("validate-graph", "Check the relation graph");
  add_pipeline_flags(validate, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (synth->parsed()) {
    SyntheticSpec spec = SyntheticSpec::with_default_split(s.municipalities, s.towers, s.devices, s.noise, s.seed);
    spec.n_apps = s.apps;
    spec.n_days = s.days;
    const SyntheticBundle bundle = generate(spec, s.out);
    std::cout << "synth: wrote " << bundle.pipeline_manifest.string() << " (" << bundle.ledger_trips
              << " morning trips)\n";
    return 0;
  }
  if (validate->parsed()) {
    const auto issues = cmd_validate_graph(PipelineManifest::load(o.config));
    for (const auto& issue : issues) std::cout << issue << '\n';
    if (!issues.empty()) return 1;
    std::cout << "graph ok\n";
    return 0;
  }
  const auto [manifest, config] = load(o);
  if (ingest->parsed()) cmd_ingest(manifest, config, std::cout);
  if (fit->parsed()) cmd_fit(manifest, config, std::cout);
  if (report->parsed()) cmd_report(manifest, config, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const modefusion::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
