#include "wav/ensemble.hpp"

namespace wav::model {

Ensemble train_ensemble(const FeatureLayout& layout, const std::vector<LabeledTransition>& data,
                        const EnsembleConfig& config, const TrainHyper& hyper, std::uint64_t seed) {
  if (config.members < 2) throw ConfigError("ensemble needs at least 2 members");
  if (data.empty()) throw PreconditionError("train_ensemble: empty training set");
  Ensemble ens;
  TrainHyper h = hyper;
  h.init_scale = config.init_scale;
  for (std::size_t m = 0; m < config.members; ++m) {
    const std::uint64_t member_seed = config.distinct_seeds ? derive_seed(seed, {m}) : seed;
    std::vector<LabeledTransition> sample;
    if (config.bootstrap) {
      Rng rng = Rng::derive(member_seed, {0x626f6f74});
      sample.reserve(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) sample.push_back(data[rng.index(data.size())]);
    }
    ens.members.push_back(train_world_model(layout, config.bootstrap ? sample : data, h, member_seed));
  }
  return ens;
}

double disagreement(const Ensemble& ens, const FeatureVector& s, Action a) {
  if (ens.members.size() < 2) throw ConfigError("ensemble needs at least 2 members");
  std::vector<std::vector<std::vector<double>>> dists;
  dists.reserve(ens.members.size());
  for (const auto& m : ens.members) dists.push_back(m.distributions(s, a));
  const double M = static_cast<double>(dists.size());
  const std::size_t G = dists.front().size();
  double total = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t K = dists.front()[g].size();
    double var = 0.0;
    // Pairwise form of the variance, exactly zero for identical members.
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < dists.size(); ++i)
        for (std::size_t j = i + 1; j < dists.size(); ++j) {
          const double diff = dists[i][g][k] - dists[j][g][k];
          var += diff * diff;
        }
    }
    total += var / (M * M);
  }
  return total / static_cast<double>(G);
}

}  // namespace wav::model
