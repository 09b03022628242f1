#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wav/ensemble.hpp"
#include "wav/inverse_model.hpp"
#include "wav/subgoal.hpp"

namespace wav::verify {

using data::LabeledTransition;
using data::UnlabeledTransition;
using grid::Action;
using grid::FeatureLayout;
using grid::FeatureVector;

enum class Strategy { Random, Uncertainty, Progress, Oracle, OracleEasy, OracleUniform, WavSparse, WavVanilla };
inline constexpr std::array<Strategy, 8> kAllStrategies = {
    Strategy::Random, Strategy::Uncertainty, Strategy::Progress,  Strategy::Oracle,
    Strategy::OracleEasy, Strategy::OracleUniform, Strategy::WavSparse, Strategy::WavVanilla};

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
/// Oracle, OracleEasy and OracleUniform read hidden labels; nothing else may.
bool reads_labels(Strategy s);
bool is_wav(Strategy s);

enum class Distance { GroupMismatch, CrossEntropy };
std::string_view distance_name(Distance d);
std::optional<Distance> parse_distance(std::string_view name);

/// Fraction of groups whose classes differ.
double group_mismatch(const FeatureVector& a, const FeatureVector& b);
/// GroupMismatch: mismatch between target and the argmax prediction.
/// CrossEntropy: summed per-group cross-entropy of target under the prediction.
double distance(Distance d, const FeatureVector& target, const model::Prediction& pred);

struct AcquisitionScore {
  std::uint64_t candidate_id = 0;
  Strategy strategy = Strategy::Random;
  double score = 0.0;  // higher = more informative
  int round = 0;
};

/// Reverse cycle on a pool item: a = idm(s, s'), s_hat = wm(s, a), score = dist(s', s_hat).
AcquisitionScore wav_score_pool(const model::WorldModel& wm, const model::IdmParams& idm,
                                const UnlabeledTransition& candidate, Distance d = Distance::GroupMismatch,
                                Strategy tag = Strategy::WavSparse, int round = 0);

struct EnvChoice {
  double score = 0.0;
  Action action = Action::TurnLeft;
  std::size_t index = 0;             // chosen subgoal
  std::vector<double> scores;        // one per subgoal
  std::vector<Action> actions;       // inferred action per subgoal
};

/// Reverse cycle against K sampled subgoals; returns the highest-scoring one
/// (lowest index on ties) and its inferred action.
EnvChoice wav_score_env(const model::WorldModel& wm, const model::IdmParams& idm, const model::SubgoalGenerator& gen,
                        const FeatureVector& s, std::size_t K, Rng& rng, Distance d = Distance::GroupMismatch);
EnvChoice wav_score_env(const model::WorldModel& wm, const model::IdmParams& idm, const model::SubgoalGenerator& gen,
                        const grid::GridState& s, std::size_t K, Rng& rng, Distance d = Distance::GroupMismatch);

/// Models and state a strategy may consult. Only the inputs its strategy
/// needs have to be set.
struct ScoringContext {
  const model::WorldModel* wm = nullptr;
  const model::IdmParams* idm = nullptr;          // WAV strategies
  const model::IdmParams* vanilla_idm = nullptr;  // Uncertainty, Progress
  const model::Ensemble* ensemble = nullptr;      // Uncertainty
  const model::WorldModel* previous_wm = nullptr; // Progress; absent in the first round
  data::LabelOracle* oracle = nullptr;            // oracle family only
  Distance distance = Distance::GroupMismatch;
  std::uint64_t seed = 0;
  int round = 0;
};

/// Scores every candidate. Throws ConfigError when a required input is
/// missing and AuditFailure if a label-free strategy read a label.
std::vector<AcquisitionScore> score_candidates(Strategy strategy, const ScoringContext& ctx,
                                               const std::vector<const UnlabeledTransition*>& candidates);

/// Positions (into scores) of the acquired items. Top `budget` by score with
/// ties to the lower position; OracleUniform takes the top of each of
/// `budget` equal-count loss intervals.
std::vector<std::size_t> select_batch(Strategy strategy, const std::vector<AcquisitionScore>& scores,
                                      std::size_t budget);

/// Per item: the strategy's score (computed without the label for label-free
/// strategies) and the world model's true cross-entropy.
std::vector<std::pair<double, double>> score_vs_error_table(Strategy strategy, const ScoringContext& ctx,
                                                            const std::vector<LabeledTransition>& eval);

// ---------------------------------------------------------------------------
// Acquisition loop.

struct ExplorationConfig {
  int rounds = 3;
  std::size_t budget = 100;
  std::size_t K = 8;                 // subgoals per state in env mode
  bool env_mode = false;             // collect live instead of revealing pool items
  data::EnvConfig env;               // env mode only
  model::TrainHyper wm_hyper;
  model::IdmHyper idm_hyper;
  double sparsity_weight = 10.0;
  model::EnsembleConfig ensemble;
  double subgoal_smoothing = 0.1;
  Distance distance = Distance::GroupMismatch;
};

struct RoundLog;
/// Called after each round with its log and the retrained world model.
using RoundHook = std::function<void(const RoundLog&, const model::WorldModel&)>;

struct RoundLog {
  int round = 0;
  std::vector<std::uint64_t> acquired_ids;
  std::size_t budget_used = 0;  // cumulative
  double pre_test_loss = 0.0;
  double post_test_loss = 0.0;
  double pre_dynamics_accuracy = 0.0;
  double post_dynamics_accuracy = 0.0;
  std::vector<AcquisitionScore> scores;
  double spearman_vs_oracle = 0.0;  // NaN when undefined (constant scores)
  double kendall_vs_oracle = 0.0;
  std::size_t acquisition_label_reads = 0;
  double wall_time_s = 0.0;
};

struct ExplorationResult {
  std::vector<RoundLog> rounds;
  model::WorldModel final_wm;
  std::vector<LabeledTransition> labeled;
};

/// Seeds shared across strategies (common random numbers): the world model
/// for round r is trained with the same seed whatever the strategy, so
/// identical labelled sets give identical models.
ExplorationResult run_exploration(const data::ExperimentSplit& split, Strategy strategy,
                                  const ExplorationConfig& config, std::uint64_t seed,
                                  const RoundHook& on_round = {});

/// Test-set metrics of a world model.
double test_dynamics_accuracy(const model::WorldModel& wm, const std::vector<LabeledTransition>& test);

}  // namespace wav::verify
