#pragma once

#include <vector>

#include "wav/world_model.hpp"

namespace wav::model {

struct EnsembleConfig {
  std::size_t members = 5;
  bool bootstrap = true;       // resample the training set per member
  bool distinct_seeds = true;  // false: every member uses the ensemble seed
  double init_scale = 0.1;     // replaces TrainHyper::init_scale for members
};

struct Ensemble {
  std::vector<WorldModel> members;
};

/// Throws ConfigError for fewer than two members.
Ensemble train_ensemble(const FeatureLayout& layout, const std::vector<LabeledTransition>& data,
                        const EnsembleConfig& config, const TrainHyper& hyper, std::uint64_t seed);

/// Mean over output groups of the across-member variance of the group
/// distribution (squared deviation from the member mean, summed over classes).
double disagreement(const Ensemble& ens, const FeatureVector& s, Action a);

}  // namespace wav::model
