// sample: run, sweep, plan and validate experiment configs.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plmc/plmc.hpp"

namespace fs = std::filesystem;
using plmc::json;

namespace {

struct Loaded {
  json raw;
  fs::path base_dir;
};

Loaded load(const std::string& path) {
  const fs::path p(path);
  return {plmc::load_json_file(p), p.has_parent_path() ? p.parent_path() : fs::path(".")};
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(plmc::parse_double(tok));
  }
  return out;
}

fs::path output_dir(const plmc::ExperimentConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  return cfg.output_dir.value_or("out");
}

int cmd_run(const std::string& path, const std::string& out, bool plan_only) {
  const Loaded l = load(path);
  const auto cfg = plmc::parse_config(l.raw, l.base_dir);
  plmc::RunOptions opt;
  opt.plan_only = plan_only;
  opt.out_dir = output_dir(cfg, out);
  const auto rep = plmc::run_experiment(cfg, opt);
  std::cout << plmc::to_json(rep).dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& path, const std::string& axis, const std::string& values,
              const std::string& out) {
  const Loaded l = load(path);
  const auto cfg = plmc::parse_config(l.raw, l.base_dir);
  const auto table = plmc::sweep(cfg, axis, parse_values(values), l.base_dir);
  std::ostringstream csv;
  plmc::write_csv(csv, table);
  const fs::path dir = output_dir(cfg, out);
  fs::create_directories(dir);
  std::ofstream(dir / "sweep.csv", std::ios::binary) << csv.str();
  std::cout << csv.str();
  return 0;
}

int cmd_plan(const std::string& path, double eps, const std::string& mode) {
  const Loaded l = load(path);
  json raw = l.raw;
  // The plan subcommand only needs the problem; give it a plan section to parse.
  json& sampler = raw["sampler"];
  sampler.erase("eta");
  sampler.erase("K");
  json& plan = sampler["plan"];
  if (!plan.is_object()) plan = json::object();
  if (eps > 0.0) plan["eps"] = eps;
  if (!mode.empty()) plan["mode"] = mode;
  const bool det = plan.contains("mode") && plan["mode"].is_string() &&
                   plmc::is_deterministic(plmc::plan_mode_from_string(plan["mode"].get<std::string>()));
  sampler["variant"] = det ? "LMC" : "PLMC";
  const auto cfg = plmc::parse_config(raw, l.base_dir);
  const auto pot = plmc::build_potential(cfg);
  const auto rc = plmc::resolve_constants(cfg, pot);
  std::cout << plmc::to_json(plmc::make_plan(*cfg.sampler.plan, rc)).dump(2) << "\n";
  return 0;
}

int cmd_validate(const std::string& path) {
  const Loaded l = load(path);
  const auto ds = plmc::validate(l.raw, l.base_dir);
  for (const auto& d : ds) std::cout << d.path << ": " << d.message << "\n";
  if (ds.empty()) std::cout << "ok\n";
  return ds.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbed Langevin Monte Carlo experiments"};
  app.require_subcommand(1);

  std::string config, out, axis, values, mode;
  bool plan_only = false;
  double eps = 0.0;

  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (overrides output.dir)");
  run->add_flag("--plan-only", plan_only, "Resolve the plan and stop before sampling");

  auto* sw = app.add_subcommand("sweep", "Sweep one parameter");
  sw->add_option("config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  sw->add_option("--axis", axis, "K, eta, mu, alpha or n_chains")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();
  sw->add_option("--out", out, "Output directory (overrides output.dir)");

  auto* plan = app.add_subcommand("plan", "Print the parameter plan as JSON");
  plan->add_option("config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--eps", eps, "Target accuracy");
  plan->add_option("--mode", mode, "w2, tv, det-w2, det-tv or regularized")
      ->check(CLI::IsMember({"w2", "tv", "det-w2", "det-tv", "regularized"}));

  auto* val = app.add_subcommand("validate", "Check a config without running it");
  val->add_option("config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, out, plan_only);
    if (*sw) return cmd_sweep(config, axis, values, out);
    if (*plan) return cmd_plan(config, eps, mode);
    if (*val) return cmd_validate(config);
  } catch (const plmc::ConfigError& e) {
    std::cerr << "invalid config:\n" << e.what();
    return 2;
  } catch (const plmc::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
