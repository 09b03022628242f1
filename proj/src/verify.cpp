#include "wav/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wav::verify {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Random: return "random";
    case Strategy::Uncertainty: return "uncertainty";
    case Strategy::Progress: return "progress";
    case Strategy::Oracle: return "oracle";
    case Strategy::OracleEasy: return "oracle_easy";
    case Strategy::OracleUniform: return "oracle_uniform";
    case Strategy::WavSparse: return "wav_sparse";
    case Strategy::WavVanilla: return "wav_vanilla";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (auto s : kAllStrategies) {
    if (strategy_name(s) == name) return s;
  }
  return std::nullopt;
}

bool reads_labels(Strategy s) {
  return s == Strategy::Oracle || s == Strategy::OracleEasy || s == Strategy::OracleUniform;
}

bool is_wav(Strategy s) { return s == Strategy::WavSparse || s == Strategy::WavVanilla; }

std::string_view distance_name(Distance d) {
  return d == Distance::GroupMismatch ? "group_mismatch" : "cross_entropy";
}

std::optional<Distance> parse_distance(std::string_view name) {
  if (name == "group_mismatch") return Distance::GroupMismatch;
  if (name == "cross_entropy") return Distance::CrossEntropy;
  return std::nullopt;
}

double group_mismatch(const FeatureVector& a, const FeatureVector& b) {
  if (a.classes.size() != b.classes.size() || a.classes.empty()) {
    throw PreconditionError("group_mismatch: vectors differ in group count");
  }
  std::size_t diff = 0;
  for (std::size_t g = 0; g < a.classes.size(); ++g) diff += a.classes[g] != b.classes[g] ? 1 : 0;
  return static_cast<double>(diff) / static_cast<double>(a.classes.size());
}

double distance(Distance d, const FeatureVector& target, const model::Prediction& pred) {
  if (d == Distance::GroupMismatch) return group_mismatch(target, pred.next);
  double total = 0.0;
  for (std::size_t g = 0; g < pred.distributions.size(); ++g) total -= std::log(pred.distributions[g][target.classes[g]]);
  return total;
}

AcquisitionScore wav_score_pool(const model::WorldModel& wm, const model::IdmParams& idm,
                                const UnlabeledTransition& candidate, Distance d, Strategy tag, int round) {
  const auto a = model::infer_action(idm, candidate.s, candidate.s_next).action;
  const auto pred = model::predict_next(wm, candidate.s, a);
  return {candidate.id, tag, distance(d, candidate.s_next, pred), round};
}

EnvChoice wav_score_env(const model::WorldModel& wm, const model::IdmParams& idm, const model::SubgoalGenerator& gen,
                        const FeatureVector& s, std::size_t K, Rng& rng, Distance d) {
  const auto goals = model::sample_subgoals(gen, s, K, rng);
  EnvChoice out;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    const auto a = model::infer_action(idm, s, goals[i]).action;
    const double sc = distance(d, goals[i], model::predict_next(wm, s, a));
    out.scores.push_back(sc);
    out.actions.push_back(a);
    if (i == 0 || sc > out.score) {
      out.score = sc;
      out.action = a;
      out.index = i;
    }
  }
  return out;
}

EnvChoice wav_score_env(const model::WorldModel& wm, const model::IdmParams& idm, const model::SubgoalGenerator& gen,
                        const grid::GridState& s, std::size_t K, Rng& rng, Distance d) {
  return wav_score_env(wm, idm, gen, grid::encode(wm.layout(), s), K, rng, d);
}

namespace {

template <class T>
const T& require(const T* p, Strategy s, const char* what) {
  if (!p) throw ConfigError(std::string("strategy '") + std::string(strategy_name(s)) + "' needs " + what);
  return *p;
}

}  // namespace

std::vector<AcquisitionScore> score_candidates(Strategy strategy, const ScoringContext& ctx,
                                               const std::vector<const UnlabeledTransition*>& candidates) {
  const auto& wm = require(ctx.wm, strategy, "a world model");
  const std::size_t reads_before = ctx.oracle ? ctx.oracle->reads() : 0;
  std::vector<AcquisitionScore> out;
  out.reserve(candidates.size());
  auto emit = [&](const UnlabeledTransition& c, double score) { out.push_back({c.id, strategy, score, ctx.round}); };

  const bool progress_warmup = strategy == Strategy::Progress && ctx.previous_wm == nullptr;
  switch (strategy) {
    case Strategy::Random:
    case Strategy::Progress:
      if (strategy == Strategy::Random || progress_warmup) {
        for (const auto* c : candidates) {
          Rng r = Rng::derive(ctx.seed, {0x72616e64, static_cast<std::uint64_t>(strategy),
                                         static_cast<std::uint64_t>(ctx.round), c->id});
          emit(*c, r.uniform());
        }
        break;
      }
      {
        const auto& idm = require(ctx.vanilla_idm, strategy, "a vanilla inverse model");
        for (const auto* c : candidates) {
          const auto a = model::infer_action(idm, c->s, c->s_next).action;
          emit(*c, ctx.previous_wm->loss(c->s, a, c->s_next) - wm.loss(c->s, a, c->s_next));
        }
      }
      break;
    case Strategy::Uncertainty: {
      const auto& idm = require(ctx.vanilla_idm, strategy, "a vanilla inverse model");
      const auto& ens = require(ctx.ensemble, strategy, "an ensemble");
      for (const auto* c : candidates) {
        emit(*c, model::disagreement(ens, c->s, model::infer_action(idm, c->s, c->s_next).action));
      }
      break;
    }
    case Strategy::Oracle:
    case Strategy::OracleUniform:
    case Strategy::OracleEasy: {
      require(ctx.oracle, strategy, "label access");
      auto& oracle = *ctx.oracle;
      const double sign = strategy == Strategy::OracleEasy ? -1.0 : 1.0;
      for (const auto* c : candidates) emit(*c, sign * wm.loss(c->s, oracle.label(*c), c->s_next));
      break;
    }
    case Strategy::WavSparse:
    case Strategy::WavVanilla: {
      const auto& idm = require(ctx.idm, strategy, "an inverse model");
      for (const auto* c : candidates) {
        out.push_back(wav_score_pool(wm, idm, *c, ctx.distance, strategy, ctx.round));
      }
      break;
    }
  }
  if (!reads_labels(strategy) && ctx.oracle && ctx.oracle->reads() != reads_before) {
    throw AuditFailure("label-free strategy '" + std::string(strategy_name(strategy)) + "' read hidden labels");
  }
  for (const auto& s : out) {
    if (!std::isfinite(s.score)) throw std::runtime_error("non-finite acquisition score");
  }
  return out;
}

std::vector<std::size_t> select_batch(Strategy strategy, const std::vector<AcquisitionScore>& scores,
                                      std::size_t budget) {
  budget = std::min(budget, scores.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  auto by_score_desc = [&](std::size_t a, std::size_t b) {
    return scores[a].score != scores[b].score ? scores[a].score > scores[b].score : a < b;
  };
  if (strategy != Strategy::OracleUniform || budget == 0) {
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(budget), order.end(), by_score_desc);
    order.resize(budget);
    return order;
  }
  // Equal-count loss intervals, highest loss first; take the top of each.
  std::sort(order.begin(), order.end(), by_score_desc);
  std::vector<std::size_t> out;
  const std::size_t n = order.size();
  for (std::size_t b = 0; b < budget; ++b) out.push_back(order[b * n / budget]);
  return out;
}

std::vector<std::pair<double, double>> score_vs_error_table(Strategy strategy, const ScoringContext& ctx,
                                                            const std::vector<LabeledTransition>& eval) {
  const auto& wm = require(ctx.wm, strategy, "a world model");
  std::vector<UnlabeledTransition> hidden;
  hidden.reserve(eval.size());
  for (const auto& t : eval) hidden.push_back(UnlabeledTransition::hide(t));
  std::vector<const UnlabeledTransition*> ptrs;
  for (const auto& u : hidden) ptrs.push_back(&u);
  const auto scores = score_candidates(strategy, ctx, ptrs);
  std::vector<std::pair<double, double>> out;
  out.reserve(eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) {
    out.emplace_back(scores[i].score, wm.loss(eval[i].s, eval[i].a, eval[i].s_next));
  }
  return out;
}

}  // namespace wav::verify
