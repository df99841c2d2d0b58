#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "cbilab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"cbilab: CBI / subordinator / extremal shot-noise simulation lab"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "experiment config file")->required();

  CLI::App* list = app.add_subcommand("list-presets", "print the mechanism preset catalogue");
  CLI::App* version = app.add_subcommand("version", "print the version");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cbilab::run_experiment(config_path);
  if (list->parsed()) {
    std::printf("%s", cbilab::preset_catalogue_text().c_str());
    return 0;
  }
  if (version->parsed()) {
    std::printf("cbilab %s\n", cbilab::kVersion);
    return 0;
  }
  return 1;
}
