// Command-line front end: condition checks, path simulation and the
// combined check-plus-simulate verdict for jump-diffusion models on
// manifolds with boundary.

#include "ijd/model_spec.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitConditionFail = 2;
constexpr int kExitUsage = 64;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<double> dt;
  std::optional<double> tol;
};

ijd::ProblemInstance load_instance(const std::string& path, const Overrides& ov) {
  ijd::ProblemInstance inst = ijd::load_spec_file(path);
  if (ov.seed) {
    inst.sim.seed = *ov.seed;
    inst.plan.seed = *ov.seed;
  }
  if (ov.paths) inst.sim.n_paths = *ov.paths;
  if (ov.dt) inst.sim.dt = *ov.dt;
  if (ov.tol) {
    inst.plan.tolerances.tangency = *ov.tol;
    inst.plan.tolerances.closure = *ov.tol;
  }
  return inst;
}

std::uint64_t spec_hash(const std::string& path) {
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ijd::fnv1a(text);
}

int run_check(const std::string& path, const Overrides& ov) {
  ijd::ProblemInstance inst = load_instance(path, ov);
  ijd::ConditionReport report = ijd::run_full_report(inst.model, inst.chart, inst.plan);
  report.provenance_hash = spec_hash(path);
  std::cout << ijd::report_to_table(report);
  std::cout << ijd::report_to_json(report).dump(2) << "\n";
  return report.summary_pass ? kExitPass : kExitConditionFail;
}

int run_simulate(const std::string& path, const std::string& scheme, const std::string& out_file,
                 const Overrides& ov) {
  ijd::ProblemInstance inst = load_instance(path, ov);
  ijd::PathEnsemble ens;
  if (scheme == "chart") {
    ijd::SimConfig cfg = inst.sim;
    cfg.scheme = ijd::Scheme::chart_projected;
    ens = ijd::simulate_chart(inst.model, inst.chart, cfg, inst.y0, inst.plan);
  } else {
    ijd::SimConfig cfg = inst.sim;
    cfg.scheme = ijd::Scheme::ambient;
    ens = ijd::simulate_ambient(inst.model, cfg, inst.chart.phi(inst.y0));
  }
  if (out_file.size() > 4 && out_file.substr(out_file.size() - 4) == ".bin") {
    ijd::write_binary(ens, out_file);
  } else {
    ijd::write_csv(ens, out_file);
  }
  const ijd::DistanceStats stats = ijd::distance_statistics(ens, inst.chart);
  std::printf("wrote %zu paths to %s (max dist %.3e, mean max dist %.3e)\n", ens.paths.size(),
              out_file.c_str(), stats.max_dist, stats.mean_dist);
  return kExitPass;
}

int run_verify(const std::string& path, const std::string& out_file, const Overrides& ov) {
  ijd::ProblemInstance inst = load_instance(path, ov);
  ijd::VerdictBundle bundle = ijd::verify(inst);
  bundle.report.provenance_hash = spec_hash(path);
  const ijd::json doc = ijd::bundle_to_json(bundle, inst);
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    out << doc.dump(2) << "\n";
  }
  std::cout << doc.dump(2) << "\n";
  return bundle.report.summary_pass ? kExitPass : kExitConditionFail;
}

int run_example(const std::string& name) {
  ijd::ProblemInstance inst = ijd::builtin_example(name);
  ijd::VerdictBundle bundle = ijd::verify(inst);
  bundle.report.provenance_hash = ijd::fnv1a(ijd::builtin_spec_json(name).dump());
  std::cout << ijd::bundle_to_json(bundle, inst).dump(2) << "\n";
  return bundle.report.summary_pass ? kExitPass : kExitConditionFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"invariance checks and Monte Carlo simulation for jump-diffusions on manifolds"};
  app.require_subcommand(1);

  Overrides ov;
  std::uint64_t seed_arg = 0;
  int paths_arg = 0;
  double dt_arg = 0.0;
  double tol_arg = 0.0;
  app.add_option("--seed", seed_arg, "override the RNG seed")
      ->each([&](const std::string&) { ov.seed = seed_arg; });
  app.add_option("--paths", paths_arg, "override the path count")
      ->each([&](const std::string&) { ov.paths = paths_arg; });
  app.add_option("--dt", dt_arg, "override the step size")
      ->each([&](const std::string&) { ov.dt = dt_arg; });
  app.add_option("--tol", tol_arg, "override the tangency and closure tolerances")
      ->each([&](const std::string&) { ov.tol = tol_arg; });

  std::string spec_path, out_file, scheme = "ambient", example_name;

  CLI::App* check = app.add_subcommand("check", "evaluate the invariance conditions");
  check->add_option("spec", spec_path, "model specification JSON")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "simulate paths and export them");
  simulate->add_option("spec", spec_path, "model specification JSON")->required();
  simulate->add_option("--scheme", scheme, "ambient or chart")
      ->check(CLI::IsMember({"ambient", "chart"}));
  simulate->add_option("--out", out_file, "output file (.csv or .bin)")->required();

  CLI::App* verify = app.add_subcommand("verify", "run checks, both schemes and the verdict");
  verify->add_option("spec", spec_path, "model specification JSON")->required();
  verify->add_option("--out", out_file, "bundle JSON output file");

  CLI::App* examples = app.add_subcommand("examples", "list or run the shipped examples");
  CLI::App* ex_list = examples->add_subcommand("list", "list example names");
  CLI::App* ex_run = examples->add_subcommand("run", "verify one example end to end");
  ex_run->add_option("name", example_name, "example name")->required();
  examples->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\nSpecification schema: {\"spec_version\":1, \"model\":{\"builtin\":...}, "
                 "\"levy\":{...}, \"chart\":{...}, \"plan\":{...}, \"sim\":{...}}\n";
    return kExitUsage;
  }

  try {
    if (*check) return run_check(spec_path, ov);
    if (*simulate) return run_simulate(spec_path, scheme, out_file, ov);
    if (*verify) return run_verify(spec_path, out_file, ov);
    if (*ex_list) {
      for (const char* n : {"circle", "ball", "ou_cone", "subordinator", "hjm_affine_toy"})
        std::cout << n << "\n";
      return kExitPass;
    }
    if (*ex_run) return run_example(example_name);
  } catch (const ijd::SpecError& err) {
    std::cerr << "specification error: " << err.what() << "\n";
    return kExitError;
  } catch (const ijd::UnknownExampleError& err) {
    std::cerr << err.what() << "\n";
    return kExitError;
  } catch (const ijd::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
