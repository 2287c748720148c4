// Experiment driver: kernel-smoothing associative memory networks and a
// matched baseline transformer, with seeded, manifest-backed runs.

#include <CLI11.hpp>

#include "mosaic/config.hpp"
#include "mosaic/experiments.hpp"

#include <iostream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitContract = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitUsage = 64;

struct CommonArgs {
  std::string config_path;
  std::string seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file");
  cmd->add_option("--seed", args.seed, "root seed (overrides the config)");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--set", args.overrides,
                  "override one key, e.g. --set training.iterations=500");
}

mosaic::ExperimentConfig resolve(const CommonArgs& args,
                                 const std::string& kind) {
  mosaic::ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg.load_file(args.config_path);
  cfg.set("experiment.kind", kind);  // the subcommand is authoritative
  if (!args.seed.empty()) cfg.set("experiment.seed", args.seed);
  if (!args.out.empty()) cfg.set("experiment.out", args.out);
  for (const std::string& kv : args.overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw mosaic::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.apply_kind_defaults();
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memory-mosaic experiments"};
  app.require_subcommand(1);

  CommonArgs gradcheck_args, moons_train_args, moons_eval_args,
      induction_args, icl_train_args, icl_eval_args, sweep_args,
      attn_args;

  CLI::App* c_gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient suite");
  add_common(c_gradcheck, gradcheck_args);
  CLI::App* c_moons_train =
      app.add_subcommand("moons-train", "train a three-moons model");
  add_common(c_moons_train, moons_train_args);
  CLI::App* c_moons_eval = app.add_subcommand(
      "moons-eval", "error-versus-context curve of a moons model");
  add_common(c_moons_eval, moons_eval_args);
  CLI::App* c_induction = app.add_subcommand(
      "induction", "train and score one model on the induction task");
  add_common(c_induction, induction_args);
  CLI::App* c_icl_train =
      app.add_subcommand("icl-train", "train a language model on PFA data");
  add_common(c_icl_train, icl_train_args);
  CLI::App* c_icl_eval = app.add_subcommand(
      "icl-eval", "score a checkpoint on held-out (or IID) automata");
  add_common(c_icl_eval, icl_eval_args);
  CLI::App* c_sweep = app.add_subcommand(
      "sweep", "grid search with validation selection and test scoring");
  add_common(c_sweep, sweep_args);
  CLI::App* c_attn = app.add_subcommand(
      "attn-profile", "last-token attention profiles and bandwidths");
  add_common(c_attn, attn_args);

  CLI::App* c_compare = app.add_subcommand(
      "compare", "aligned metric table of two run manifests");
  std::string manifest_a, manifest_b;
  c_compare->add_option("manifest_a", manifest_a, "first manifest")
      ->required();
  c_compare->add_option("manifest_b", manifest_b, "second manifest")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return kExitUsage;
  }

  try {
    if (*c_gradcheck)
      return mosaic::run_gradcheck(resolve(gradcheck_args, "gradcheck"));
    if (*c_moons_train)
      return mosaic::run_moons_train(resolve(moons_train_args, "moons"));
    if (*c_moons_eval)
      return mosaic::run_moons_eval(resolve(moons_eval_args, "moons"));
    if (*c_induction)
      return mosaic::run_induction(resolve(induction_args, "induction"));
    if (*c_icl_train)
      return mosaic::run_icl_train(resolve(icl_train_args, "icl"));
    if (*c_icl_eval)
      return mosaic::run_icl_eval(resolve(icl_eval_args, "icl"));
    if (*c_sweep) return mosaic::run_sweep(resolve(sweep_args, "icl"));
    if (*c_attn)
      return mosaic::run_attn_profile(resolve(attn_args, "attnprofile"));
    if (*c_compare)
      return mosaic::run_compare(manifest_a, manifest_b, std::cout);
  } catch (const mosaic::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mosaic::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const mosaic::ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return kExitContract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  }
  return kExitUsage;
}
