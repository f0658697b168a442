// qmetro: run a metrology scenario from a config file and/or flags.
//
//   qmetro kappa-scan --config scan.ini --visibility 0.9 --out results/

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qmetro/config.hpp"
#include "qmetro/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multiparameter quantum metrology toolkit"};
  app.set_version_flag("--version", std::string(qmetro::kToolVersion));

  std::string command;
  std::string config_path;
  app.add_option("command", command, "Command to run")
      ->check(CLI::IsMember(qmetro::kCommands));
  app.add_option("-c,--config", config_path, "Config document (key = value, [sections])")
      ->check(CLI::ExistingFile);

  std::map<std::string, std::string> flag_values;
  for (const auto& key : qmetro::config_schema()) {
    if (key.name == "command") continue;
    app.add_option("--" + key.name, flag_values[key.name], key.help);
  }

  // Unrecognised --name value pairs go to the config parser, which reports
  // them with the nearest valid key.
  app.allow_extras();
  CLI11_PARSE(app, argc, argv);

  std::map<std::string, std::string> overrides;
  for (const auto& key : qmetro::config_schema()) {
    if (key.name == "command") continue;
    if (app.count("--" + key.name) > 0) overrides[key.name] = flag_values[key.name];
  }
  if (!command.empty()) overrides["command"] = command;
  const auto extras = app.remaining();
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string name = extras[i];
    if (name.rfind("--", 0) != 0) {
      std::cout << qmetro::error_json(command, {"unexpected argument '" + name + "'"}) << "\n";
      return 2;
    }
    name = name.substr(2);
    std::string value;
    if (const auto eq = name.find('='); eq != std::string::npos) {
      value = name.substr(eq + 1);
      name = name.substr(0, eq);
    } else if (i + 1 < extras.size()) {
      value = extras[++i];
    }
    overrides[name] = value;
  }

  std::string text;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }

  const auto parsed = qmetro::parse_config(text, overrides);
  if (!parsed.config) {
    std::cout << qmetro::error_json(command, parsed.errors) << "\n";
    return 2;
  }
  qmetro::RunConfig config = *parsed.config;
  if (!config_path.empty()) config.input_paths.push_back(config_path);

  const auto report = qmetro::run(config);
  std::cout << report.status_json << "\n";
  return report.exit_code;
}
