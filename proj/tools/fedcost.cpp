#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fedcost/experiment.hpp"

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-aware federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  const char* commands[][2] = {
      {"run", "Run the pipeline selected by the config's control mode"},
      {"optimize", "Estimate or take rho and solve for the cost-optimal (K, E)"},
      {"estimate", "Run pilot trainings and estimate rho"},
      {"compare-schedulers", "Compare round scheduling strategies over K or E sweeps"},
      {"validate-properties", "Check structural properties of the optimum"},
      {"cost-surface", "Tabulate the predicted cost over a (K, E) grid"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--out", out_dir, "Override the output directory");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    auto config = fedcost::parse_config(read_text(config_path));
    if (seed) config.seed = *seed;
    if (out_dir) config.output_dir = *out_dir;
    for (const auto& path : fedcost::run_subcommand(command, config)) std::cout << path.string() << '\n';
  } catch (const fedcost::ConfigError& e) {
    for (const auto& p : e.problems()) std::cerr << "error: " << p << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
