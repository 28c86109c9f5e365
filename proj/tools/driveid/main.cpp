#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace driveid::cli;
  CLI::App app{"Driver identification from driving telemetry"};
  app.require_subcommand(1, 1);

  RunSpec spec;
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
  for (const std::string& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "Configuration file (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Seed for training, classifier and evaluation");
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    sub->add_flag("--single-thread", spec.single_thread, "Fully sequential execution");
  }
  app.description(
      "Commands:\n"
      "  synth    generate a synthetic dataset\n"
      "  train    train the encoder and classifier\n"
      "  eval     run the evaluation protocols\n"
      "  ablate   feature / interval / embedding-size sweeps\n"
      "  project  2-D projection of embeddings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  CLI::App* chosen = app.get_subcommands().front();
  spec.command = chosen->get_name();
  spec.config_path = config;
  spec.out = out;
  if (chosen->count("--seed") > 0) spec.seed = seed;
  return run(spec, std::cout, std::cerr);
}
