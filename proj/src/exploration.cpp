#include <chrono>
#include <cmath>
#include <limits>

#include "wav/metrics.hpp"
#include "wav/verify.hpp"

namespace wav::verify {

namespace {

// Substream tags for run_exploration.
enum : std::uint64_t { kWmStream = 1, kIdmStream = 2, kEnsembleStream = 3, kEnvStream = 4, kScoreStream = 5 };

constexpr std::uint64_t kEnvIdBase = std::uint64_t{1} << 40;

struct RankPair {
  double spearman;
  double kendall;
};

RankPair rank_vs_oracle(const std::vector<AcquisitionScore>& scores, const std::vector<double>& oracle) {
  std::vector<double> s;
  s.reserve(scores.size());
  for (const auto& a : scores) s.push_back(a.score);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    return {metrics::spearman(s, oracle), metrics::kendall(s, oracle)};
  } catch (const UndefinedMetric&) {
    return {nan, nan};
  } catch (const PreconditionError&) {
    return {nan, nan};
  }
}

}  // namespace

double test_dynamics_accuracy(const model::WorldModel& wm, const std::vector<LabeledTransition>& test) {
  std::vector<metrics::DynamicsItem> items;
  items.reserve(test.size());
  for (const auto& t : test) items.push_back({t.s, t.s_next, model::predict_next(wm, t.s, t.a).next});
  return metrics::dynamics_accuracy(items);
}

ExplorationResult run_exploration(const data::ExperimentSplit& split, Strategy strategy,
                                  const ExplorationConfig& config, std::uint64_t seed,
                                  const RoundHook& on_round) {
  if (config.rounds < 0) throw ConfigError("rounds must be non-negative");
  if (split.seed_labeled.empty()) throw PreconditionError("run_exploration: empty seed set");
  if (split.test.empty()) throw PreconditionError("run_exploration: empty test set");
  const std::size_t total = static_cast<std::size_t>(config.rounds) * config.budget;
  if (!config.env_mode && split.pool.size() < total) {
    throw BudgetError("pool holds " + std::to_string(split.pool.size()) + " transitions but " +
                      std::to_string(config.rounds) + " rounds x budget " + std::to_string(config.budget) +
                      " need " + std::to_string(total));
  }
  if (config.env_mode && !(is_wav(strategy) || strategy == Strategy::Random)) {
    throw ConfigError("env mode supports the WAV and random strategies only");
  }
  if (config.env_mode && config.K < 1) throw ConfigError("K must be at least 1");

  const FeatureLayout layout(split.shape);
  data::ExplorationPool pool(split.pool);
  data::LabelOracle acquisition_oracle;
  data::LabelOracle eval_oracle;

  ExplorationResult result;
  result.labeled = split.seed_labeled;
  auto train_wm = [&](int round) {
    return model::train_world_model(layout, result.labeled, config.wm_hyper, derive_seed(seed, {kWmStream, static_cast<std::uint64_t>(round)}));
  };
  model::WorldModel wm = train_wm(0);
  std::optional<model::WorldModel> previous_wm;
  std::optional<model::SubgoalGenerator> generator;
  if (config.env_mode) {
    if (split.video.empty()) throw PreconditionError("env mode needs video transitions for the subgoal prior");
    generator = model::fit_subgoal_generator(layout, split.video, config.subgoal_smoothing);
  }

  for (int round = 1; round <= config.rounds; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r64 = static_cast<std::uint64_t>(round);
    RoundLog log;
    log.round = round;

    std::optional<model::IdmParams> idm, vanilla;
    std::optional<model::Ensemble> ensemble;
    const std::uint64_t idm_seed = derive_seed(seed, {kIdmStream, r64});
    if (strategy == Strategy::WavSparse) {
      idm = model::train_sparse_idm(layout, result.labeled, config.sparsity_weight, config.idm_hyper, idm_seed);
    }
    if (strategy == Strategy::WavVanilla || strategy == Strategy::Uncertainty || strategy == Strategy::Progress) {
      vanilla = model::train_vanilla_idm(layout, result.labeled, config.idm_hyper, idm_seed);
      if (strategy == Strategy::WavVanilla) idm = vanilla;
    }
    if (strategy == Strategy::Uncertainty) {
      ensemble = model::train_ensemble(layout, result.labeled, config.ensemble, config.wm_hyper,
                                       derive_seed(seed, {kEnsembleStream, r64}));
    }

    ScoringContext ctx;
    ctx.wm = &wm;
    ctx.idm = idm ? &*idm : nullptr;
    ctx.vanilla_idm = vanilla ? &*vanilla : nullptr;
    ctx.ensemble = ensemble ? &*ensemble : nullptr;
    ctx.previous_wm = previous_wm ? &*previous_wm : nullptr;
    ctx.oracle = reads_labels(strategy) ? &acquisition_oracle : nullptr;
    ctx.distance = config.distance;
    ctx.seed = derive_seed(seed, {kScoreStream});
    ctx.round = round;

    std::vector<LabeledTransition> acquired;
    if (!config.env_mode) {
      const auto unrevealed = pool.unrevealed_indices();
      std::vector<const UnlabeledTransition*> candidates;
      candidates.reserve(unrevealed.size());
      for (auto i : unrevealed) candidates.push_back(&pool[i]);
      log.scores = score_candidates(strategy, ctx, candidates);

      std::vector<double> oracle_scores;
      oracle_scores.reserve(candidates.size());
      for (const auto* c : candidates) oracle_scores.push_back(wm.loss(c->s, eval_oracle.label(*c), c->s_next));
      const auto rc = rank_vs_oracle(log.scores, oracle_scores);
      log.spearman_vs_oracle = rc.spearman;
      log.kendall_vs_oracle = rc.kendall;

      for (auto pos : select_batch(strategy, log.scores, config.budget)) acquired.push_back(pool.reveal(unrevealed[pos]));
    } else {
      Rng rng = Rng::derive(seed, {kEnvStream, static_cast<std::uint64_t>(strategy), r64});
      grid::GridState state;
      for (std::size_t i = 0; i < config.budget; ++i) {
        if (i % static_cast<std::size_t>(std::max(config.env.horizon, 1)) == 0) {
          state = grid::generate_layout(config.env.shape, config.env.n_objects, config.env.n_noisy_floors, rng);
        }
        Action a;
        double score = 0.0;
        if (strategy == Strategy::Random) {
          a = grid::kAllActions[rng.index(grid::kNumActions)];
        } else {
          const auto choice = wav_score_env(wm, *idm, *generator, state, config.K, rng, config.distance);
          a = choice.action;
          score = choice.score;
        }
        grid::GridState next = grid::step(state, a, rng);
        const std::uint64_t id = kEnvIdBase + r64 * config.budget + i;
        acquired.push_back(data::make_labeled(layout, {state, a, next}, id, "env"));
        log.scores.push_back({id, strategy, score, round});
        state = std::move(next);
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      log.spearman_vs_oracle = nan;
      log.kendall_vs_oracle = nan;
    }

    log.pre_test_loss = metrics::prediction_loss(wm, split.test);
    log.pre_dynamics_accuracy = test_dynamics_accuracy(wm, split.test);
    for (const auto& t : acquired) {
      log.acquired_ids.push_back(t.id);
      result.labeled.push_back(t);
    }
    if (!acquired.empty()) {
      previous_wm = wm;
      wm = train_wm(round);
    }
    log.post_test_loss = metrics::prediction_loss(wm, split.test);
    log.post_dynamics_accuracy = test_dynamics_accuracy(wm, split.test);
    log.budget_used = config.env_mode ? static_cast<std::size_t>(round) * config.budget : pool.budget_used();
    log.acquisition_label_reads = acquisition_oracle.reads();
    log.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_round) on_round(log, wm);
    result.rounds.push_back(std::move(log));
  }
  result.final_wm = std::move(wm);
  return result;
}

}  // namespace wav::verify
