#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "ccdd/app.hpp"
#include "ccdd/config.hpp"
#include "ccdd/error.hpp"

namespace {

struct Command {
  CLI::App* app = nullptr;
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void add_key_flags(Command& cmd) {
  for (const std::string& key : ccdd::RunConfig::keys()) {
    cmd.app->add_option_function<std::string>(
        "--" + key, [&cmd, key](const std::string& v) { cmd.overrides[key] = v; },
        "config key " + key);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint continuous/discrete diffusion language model toolkit"};
  app.require_subcommand(1);

  std::map<std::string, Command> commands;
  const std::map<std::string, std::string> help = {
      {"train", "train a model and write metrics.csv and a checkpoint"},
      {"sample", "draw samples from a checkpoint"},
      {"eval", "estimate the ELBO of held-out data"},
      {"verify", "run the numerical verification suite"},
  };
  for (const auto& [name, text] : help) {
    Command& cmd = commands[name];
    cmd.app = app.add_subcommand(name, text);
    cmd.app->add_option("--config", cmd.config_path, "key = value config file");
    add_key_flags(cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  for (auto& [name, cmd] : commands) {
    if (!cmd.app->parsed()) continue;
    ccdd::RunConfig config;
    try {
      config = ccdd::resolve_config(name, cmd.config_path, cmd.overrides);
    } catch (const ccdd::Error& e) {
      std::cerr << "ccdd: " << ccdd::error_category(e.kind()) << ": " << e.what() << "\n";
      return static_cast<int>(e.kind());
    }
    return ccdd::run(name, config, std::cout, std::cerr);
  }
  return 1;
}
