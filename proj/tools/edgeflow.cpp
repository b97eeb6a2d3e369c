#include <iostream>

#include "CLI11.hpp"

#include "edgeflow/cli.hpp"

using namespace edgeflow::cli;

int main(int argc, char** argv) {
  CLI::App app{"edgeflow: edge transport and RG flow for quasi-periodic Hall lattices"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::optional<double> beta, lambda, u;
  std::optional<int> L1, L2;
  std::optional<std::string> out;
  bool eta_min = false;
  std::string filter;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"spectrum", "edge modes, eigenvalues and bulk decay"},
      {"twopoint", "edge two-point function and satellites"},
      {"scaling", "v0, v1, Z and dressed vertices"},
      {"transport", "edge coefficients G0, G1"},
      {"ward", "current and vertex Ward identity residuals"},
      {"rgflow", "scale-by-scale flow and nu fixed point"},
      {"bubble", "finite-volume bubble against the closed form"},
      {"sweep", "run a subcommand over sweep.axis / sweep.values"},
      {"selftest", "every built-in example and invariant check"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "config file")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "key=value override (repeatable)");
    sub->add_option("--beta", beta, "grids.beta");
    sub->add_option("--L1", L1, "lattice.L1");
    sub->add_option("--L2", L2, "lattice.L2");
    sub->add_option("--lambda", lambda, "disorder.lambda");
    sub->add_option("--u", u, "model.u");
    sub->add_option("--out", out, "output.directory");
    if (name == "bubble") sub->add_flag("--eta-min", eta_min, "eta = 2 pi / beta at every level");
    if (name == "selftest") sub->add_option("--filter", filter, "run checks whose group/name contains this");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  auto num = [](auto x) { return format_double(static_cast<double>(x)); };
  std::vector<std::string> overrides = sets;
  if (beta) overrides.push_back("grids.beta=" + num(*beta));
  if (L1) overrides.push_back("lattice.L1=" + std::to_string(*L1));
  if (L2) overrides.push_back("lattice.L2=" + std::to_string(*L2));
  if (lambda) overrides.push_back("disorder.lambda=" + num(*lambda));
  if (u) overrides.push_back("model.u=" + num(*u));
  if (out) overrides.push_back("output.directory=" + *out);
  if (eta_min) overrides.push_back("bubble.eta_min=true");

  ExperimentConfig cfg;
  try {
    cfg = config_path.empty() ? parse_config("", overrides) : load_config(config_path, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  if (command == "selftest" && !filter.empty()) {
    auto checks = run_selftest(std::cout, filter);
    for (const auto& c : checks)
      if (!c.pass) return 4;
    return 0;
  }
  return run(command, cfg, std::cout, std::cerr);
}
