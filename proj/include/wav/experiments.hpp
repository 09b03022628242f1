#pragma once

#include <vector>

#include "wav/verify.hpp"

namespace wav::exp {

using data::LabeledTransition;
using grid::FeatureLayout;

/// Raw play collected before splitting: scripted task episodes with
/// epsilon-greedy noise plus uniform random play.
struct SourceConfig {
  std::size_t task_transitions = 6000;
  std::size_t random_transitions = 6000;
  double epsilon = 0.3;
};

struct DataConfig {
  data::EnvConfig env;
  SourceConfig source;
  data::SplitConfig split;
};

/// Throws ConfigError if the requested partitions cannot fit in the source.
void validate(const DataConfig& config);

std::vector<LabeledTransition> collect_source(const data::EnvConfig& env, const SourceConfig& source, Rng& rng);

/// Deterministic in (config, seed).
data::ExperimentSplit make_experiment_split(const DataConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sparse vs vanilla inverse model on held-out compositions.

struct OosConfig {
  data::EnvConfig env;
  SourceConfig source{8000, 8000, 0.3};
  std::vector<std::size_t> seed_sizes{200, 400};
  double sparsity_weight = 10.0;
  model::IdmHyper hyper;
};

struct OosRow {
  std::uint64_t seed = 0;
  std::size_t seed_size = 0;
  std::size_t oos_items = 0;
  double sparse_accuracy = 0.0;
  double vanilla_accuracy = 0.0;
  double sparse_mask_sparsity = 0.0;
};

/// One row per seed size. Both models see the first n Seen transitions;
/// accuracy is measured on every OOS-only transition of the source.
std::vector<OosRow> run_idm_oos(const OosConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------

struct PairedTest {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double t = 0.0;
  double p_one_sided = 1.0;  // H1: mean(a - b) > 0
};

/// One-sided paired t-test. A zero-variance difference gives p = 0 when the
/// mean is positive and 1 otherwise. Needs n >= 2.
PairedTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace wav::exp
