#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nfde/cli.hpp"

namespace {

void add_model_flags(CLI::App* cmd, nfde::RunManifest& m) {
  cmd->add_option("--config", m.config_path, "Model document (JSON, schema 1)")->envname("NFDE_CONFIG");
  cmd->add_option("--preset", m.preset, "Built-in model preset")->envname("NFDE_PRESET");
  cmd->add_option("--out", m.out_dir, "Output directory")->envname("NFDE_OUT");
}

void add_run_flags(CLI::App* cmd, nfde::RunManifest& m) {
  cmd->add_option("--dt", m.dt, "Integration step (overrides the document)")->envname("NFDE_DT");
  cmd->add_option("--t-end", m.t_end, "Final time (overrides the document)")->envname("NFDE_T_END");
  cmd->add_option("--seed", m.seed, "Seed for sampled data")->envname("NFDE_SEED");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neutral compartmental FDE simulator, certifier and experiment harness"};
  app.require_subcommand(0, 1);
  nfde::RunManifest m;
  std::vector<std::string> tols;
  bool list = false;
  app.add_flag("--list-presets", list, "Print the built-in presets and exit");

  auto* sim = app.add_subcommand("simulate", "Integrate a model and write trajectory.csv");
  add_model_flags(sim, m);
  add_run_flags(sim, m);
  sim->add_option("--stride", m.stride, "Write every n-th grid node")->check(CLI::PositiveNumber);

  auto* cert = app.add_subcommand("certify", "Check the structural hypotheses and write certificate.json");
  add_model_flags(cert, m);

  auto* exp = app.add_subcommand("experiment", "Run a labsuite experiment and write <kind>.report.json");
  exp->add_option("kind", m.kind, "monotone | mass | converge | cover | superq")
      ->required()
      ->check(CLI::IsMember({"monotone", "mass", "converge", "cover", "superq"}));
  add_model_flags(exp, m);
  add_run_flags(exp, m);
  exp->add_option("--pairs", m.pairs, "Ordered pairs for the monotone experiment")->envname("NFDE_PAIRS");
  exp->add_option("--tol", tols, "Tolerance override KEY=VALUE (cone, mass, conv, cover, superq, bound, amplitude)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : nfde::exit_config;
  }
  if (list) {
    for (const auto& name : nfde::preset_names()) std::cout << name << '\n';
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return nfde::exit_config;
  }
  for (const auto& t : tols) {
    const auto eq = t.find('=');
    try {
      if (eq == std::string::npos) throw std::invalid_argument("expected KEY=VALUE");
      m.tolerances[t.substr(0, eq)] = std::stod(t.substr(eq + 1));
    } catch (const std::exception&) {
      std::cerr << "config error: --tol " << t << ": expected KEY=VALUE\n";
      return nfde::exit_config;
    }
  }

  if (sim->parsed()) {
    m.command = "simulate";
    return nfde::cmd_simulate(m);
  }
  if (cert->parsed()) {
    m.command = "certify";
    return nfde::cmd_certify(m);
  }
  m.command = "experiment";
  return nfde::cmd_experiment(m);
}
