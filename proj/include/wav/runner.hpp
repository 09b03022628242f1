#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "wav/experiments.hpp"
#include "wav/theory.hpp"

namespace wav::runner {

struct ExploreSection {
  std::vector<verify::Strategy> strategies{verify::Strategy::Random,   verify::Strategy::Uncertainty,
                                           verify::Strategy::Progress, verify::Strategy::Oracle,
                                           verify::Strategy::WavSparse, verify::Strategy::WavVanilla};
  int seeds = 5;
  int rounds = 3;
  std::size_t budget = 100;
  std::size_t K = 8;
  bool env_mode = false;
  double subgoal_smoothing = 0.1;
  verify::Distance distance = verify::Distance::GroupMismatch;
  bool checkpoint_every_round = true;
};

struct GapSpecConfig {
  int d_s = 20, d_a = 2, d_z = 2;
  double sigma_s = 1.0, sigma_a = 0.1, lambda = 1.0;
};

struct TheorySection {
  int trials = 10000;
  std::vector<std::tuple<int, int, double>> lemma_grid{{2, 10, 1.0}, {5, 30, 1.0}, {10, 50, 2.0}};
  std::vector<GapSpecConfig> gap_specs{{5, 2, 2, 1.0, 0.1, 1.0},  {10, 2, 2, 1.0, 0.1, 1.0},
                                       {20, 2, 2, 1.0, 0.1, 1.0}, {10, 2, 2, 0.5, 0.1, 1.0},
                                       {10, 2, 2, 2.0, 0.1, 1.0}};
  std::vector<int> n_grid{40, 60, 100};
  std::uint64_t matrix_seed = 1;
};

struct TlcmSection {
  std::size_t seed_size = 2000;
  std::size_t oos_size = 2000;
};

/// Everything a command can be configured with. Every key is optional in
/// the JSON form; unknown keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> data_dir;  // split written by gen-data; generated in memory if absent
  exp::DataConfig data;
  model::TrainHyper world_model;
  model::IdmHyper idm;
  double sparsity_weight = 10.0;
  model::EnsembleConfig ensemble;
  ExploreSection explore;
  TheorySection theory;
  TlcmSection tlcm;
};

/// Strict parse; throws ConfigError naming the offending key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON with every field filled in. Parsing it back and dumping
/// again gives the same text.
std::string to_json(const ExperimentConfig& config);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);
/// 16 hex digits of FNV-1a over the canonical config (its seed included).
std::string run_id(const ExperimentConfig& config);

verify::ExplorationConfig exploration_config(const ExperimentConfig& config);

struct RunOptions {
  std::filesystem::path out = "out";
  bool force = false;
  int jobs = 1;
  std::ostream* log = nullptr;  // progress lines; null for silence
};

/// Each command writes under out/<run_id>/ and merges its files into
/// manifest.json. Returns the process exit code.
int cmd_gen_data(const ExperimentConfig& config, const RunOptions& opt);
int cmd_train(const ExperimentConfig& config, const RunOptions& opt);
int cmd_explore(const ExperimentConfig& config, const RunOptions& opt);
int cmd_rank_corr(const ExperimentConfig& config, const RunOptions& opt);
int cmd_theory(const ExperimentConfig& config, const RunOptions& opt);
int cmd_tlcm_demo(const ExperimentConfig& config, const RunOptions& opt);

inline constexpr const char* kRoundsHeader =
    "run_id,strategy,seed,round,budget_used,test_pred_loss,dynamics_accuracy,spearman_vs_oracle,kendall_vs_oracle,"
    "wall_time_s";

}  // namespace wav::runner
