#include "wav/experiments.hpp"

#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace wav::exp {

namespace {

enum : std::uint64_t { kSourceStream = 0x736f75, kSplitStream = 0x73706c };

constexpr std::uint64_t kRandomIdBase = std::uint64_t{1} << 32;

}  // namespace

void validate(const DataConfig& c) {
  const auto& s = c.split;
  const std::size_t need = s.seed_size + s.pool_size + s.test_size + s.video_size;
  const std::size_t have = c.source.task_transitions + c.source.random_transitions;
  if (need > have) {
    throw ConfigError("split needs " + std::to_string(need) + " transitions (seed+pool+test+video) but the source "
                      "collects only " + std::to_string(have));
  }
  if (s.seed_size == 0 || s.test_size == 0) throw ConfigError("seed_size and test_size must be positive");
  if (c.env.n_objects < 0 || c.env.n_noisy_floors < 0) throw ConfigError("object and floor counts must be non-negative");
  if (c.source.epsilon < 0.0 || c.source.epsilon > 1.0) throw ConfigError("epsilon must be in [0, 1]");
}

std::vector<LabeledTransition> collect_source(const data::EnvConfig& env, const SourceConfig& source, Rng& rng) {
  auto out = data::collect_task_play(env, source.task_transitions, source.epsilon, rng, 0);
  auto random = data::collect_random_play(env, source.random_transitions, rng, kRandomIdBase);
  out.insert(out.end(), std::make_move_iterator(random.begin()), std::make_move_iterator(random.end()));
  return out;
}

data::ExperimentSplit make_experiment_split(const DataConfig& config, std::uint64_t seed) {
  validate(config);
  Rng source_rng = Rng::derive(seed, {kSourceStream});
  const auto source = collect_source(config.env, config.source, source_rng);
  Rng split_rng = Rng::derive(seed, {kSplitStream});
  return data::build_split(config.env.shape, source, config.split, split_rng);
}

std::vector<OosRow> run_idm_oos(const OosConfig& config, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, {kSourceStream});
  const auto source = collect_source(config.env, config.source, rng);
  const auto filtered = data::apply_composition_filter(source, data::CompositionTable::standard());
  if (filtered.oos_test.empty()) throw ConfigError("source produced no held-out compositions");
  const FeatureLayout layout(config.env.shape);
  std::vector<OosRow> rows;
  for (std::size_t n : config.seed_sizes) {
    if (n == 0 || n > filtered.train.size()) {
      throw ConfigError("seed size " + std::to_string(n) + " exceeds the " + std::to_string(filtered.train.size()) +
                        " Seen transitions collected");
    }
    const std::vector<LabeledTransition> train(filtered.train.begin(),
                                               filtered.train.begin() + static_cast<std::ptrdiff_t>(n));
    const std::uint64_t model_seed = derive_seed(seed, {n});
    const auto vanilla = model::train_vanilla_idm(layout, train, config.hyper, model_seed);
    const auto sparse = model::train_sparse_idm(layout, train, config.sparsity_weight, config.hyper, model_seed);
    rows.push_back({seed, n, filtered.oos_test.size(), model::action_accuracy(sparse, filtered.oos_test),
                    model::action_accuracy(vanilla, filtered.oos_test), model::mask_sparsity(sparse)});
  }
  return rows;
}

PairedTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw PreconditionError("paired_t_test: needs two equal samples of size >= 2");
  PairedTest r;
  r.n = a.size();
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double n = static_cast<double>(d.size());
  r.mean_diff = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : d) ss += (x - r.mean_diff) * (x - r.mean_diff);
  const double se = std::sqrt(ss / (n - 1.0) / n);
  if (se == 0.0) {
    r.t = r.mean_diff > 0.0 ? INFINITY : (r.mean_diff < 0.0 ? -INFINITY : 0.0);
    r.p_one_sided = r.mean_diff > 0.0 ? 0.0 : 1.0;
    return r;
  }
  r.t = r.mean_diff / se;
  const boost::math::students_t dist(n - 1.0);
  r.p_one_sided = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

}  // namespace wav::exp
