#include <iostream>

#include <CLI11.hpp>

#include "wav/runner.hpp"

int main(int argc, char** argv) {
  using namespace wav;
  CLI::App app{"World-model exploration experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  runner::RunOptions opt;
  std::string out = "out";

  using Cmd = int (*)(const runner::ExperimentConfig&, const runner::RunOptions&);
  const std::vector<std::tuple<const char*, const char*, Cmd>> commands = {
      {"gen-data", "Collect play and write the seed/pool/test/video split", runner::cmd_gen_data},
      {"train", "Train the world model and inverse models on the seed set", runner::cmd_train},
      {"explore", "Run acquisition rounds for every strategy and seed", runner::cmd_explore},
      {"rank-corr", "Rank agreement of each strategy's scores with the oracle ranking", runner::cmd_rank_corr},
      {"theory", "Monte Carlo checks of the linear-Gaussian risk formulas", runner::cmd_theory},
      {"tlcm-demo", "Discrete latent demo of inverse-model identifiability", runner::cmd_tlcm_demo},
  };
  Cmd chosen = nullptr;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config (defaults used when omitted)");
    sub->add_option("--seed", seed, "Global seed, overrides the config");
    sub->add_option("--out", out, "Output root")->capture_default_str();
    sub->add_flag("--force", opt.force, "Overwrite existing outputs");
    sub->add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->callback([&chosen, fn = fn] { chosen = fn; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    runner::ExperimentConfig config = config_path.empty() ? runner::parse_config("{}") : runner::load_config(config_path);
    if (seed) config.seed = *seed;
    opt.out = out;
    opt.log = &std::cerr;
    const int code = chosen(config, opt);
    std::cout << (opt.out / runner::run_id(config)).string() << '\n';
    return code;
  } catch (const wav::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
