#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ovxai/pipeline.hpp"

namespace pl = ovxai::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Stratified ovarian tumour classifier with GA feature selection and Shapley reports"};
  app.require_subcommand(1);

  std::string config, data, out, spec, cutoffs = "standard", model, prep;
  std::optional<std::uint64_t> seed;
  bool leak_safe = false, nested = false;
  std::size_t background = 100;

  auto* synth = app.add_subcommand("synth", "Write a synthetic labelled CSV");
  synth->add_option("--spec,--config", spec, "Synthetic spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out, "Output CSV path")->required();
  synth->add_option("--seed", seed, "Override the spec seed");

  auto* run = app.add_subcommand("run", "Run the full pipeline");
  run->add_option("--config", config, "Run config JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--data", data, "Input CSV")->required();
  run->add_option("--out", out, "Output directory (overrides config)");
  run->add_option("--seed", seed, "Override the config seed");
  run->add_flag("--leak-safe", leak_safe, "Refit preprocessing inside every fold");
  run->add_flag("--nested", nested, "Run feature selection inside every outer fold");

  auto* roma = app.add_subcommand("roma", "Score ROMA on a dataset");
  roma->add_option("--data", data, "Input CSV")->required();
  roma->add_option("--cutoffs", cutoffs, "standard or terlikowska");
  roma->add_option("--out", out, "Output directory")->required();
  roma->add_option("--config", config, "Run config JSON for schema and column names");

  auto* expl = app.add_subcommand("explain", "Attribute rows under a saved model");
  expl->add_option("--model", model, "model.json")->required();
  expl->add_option("--data", data, "Input CSV")->required();
  expl->add_option("--out", out, "Output directory")->required();
  expl->add_option("--preprocess", prep, "preprocess.json to apply to raw values");
  expl->add_option("--background", background, "Background rows")->check(CLI::PositiveNumber);
  expl->add_option("--seed", seed, "Background sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pl::kConfigError;
  }

  if (*synth) return pl::cmd_synth(spec, out, seed);
  if (*run) {
    pl::RunOverrides o;
    o.seed = seed;
    if (!out.empty()) o.output_dir = out;
    o.leak_safe = leak_safe;
    o.nested = nested;
    return pl::cmd_run(config, data, o);
  }
  if (*roma)
    return pl::cmd_roma(data, cutoffs, out,
                        config.empty() ? std::nullopt : std::optional<std::string>(config));
  if (*expl) {
    pl::ExplainOptions o;
    if (!prep.empty()) o.preprocess_path = prep;
    o.background_rows = background;
    o.seed = seed.value_or(0);
    return pl::cmd_explain(model, data, out, o);
  }
  return pl::kOther;
}
