#include <doctest.h>

#include <cmath>
#include <set>

#include "wav/experiments.hpp"
#include "wav/metrics.hpp"

using namespace wav;
using namespace wav::verify;
using data::LabeledTransition;
using data::UnlabeledTransition;

namespace {

const grid::FeatureLayout kLayout;

std::vector<LabeledTransition> play(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return data::collect_random_play(data::EnvConfig{}, n, rng);
}

data::ExperimentSplit small_split(std::uint64_t seed) {
  exp::DataConfig dc;
  dc.source = {1500, 1500, 0.3};
  dc.split.seed_size = 100;
  dc.split.pool_size = 400;
  dc.split.test_size = 140;
  dc.split.video_size = 400;
  return exp::make_experiment_split(dc, seed);
}

ExplorationConfig fast_config() {
  ExplorationConfig c;
  c.rounds = 2;
  c.budget = 50;
  c.wm_hyper.epochs = 8;
  c.idm_hyper.epochs = 10;
  c.ensemble.members = 2;
  return c;
}

std::vector<const UnlabeledTransition*> pointers(const std::vector<UnlabeledTransition>& v) {
  std::vector<const UnlabeledTransition*> out;
  for (const auto& u : v) out.push_back(&u);
  return out;
}

std::vector<double> values(const std::vector<AcquisitionScore>& s) {
  std::vector<double> out;
  for (const auto& a : s) out.push_back(a.score);
  return out;
}

}  // namespace

TEST_CASE("names round trip") {
  for (auto s : kAllStrategies) CHECK(parse_strategy(strategy_name(s)) == s);
  CHECK_FALSE(parse_strategy("greedy"));
  CHECK(parse_distance("cross_entropy") == Distance::CrossEntropy);
}

TEST_CASE("distances") {
  const auto t = play(30, 1)[4];
  const auto persist = model::predict_persistence(kLayout, t.s);
  CHECK(distance(Distance::GroupMismatch, t.s, persist) == 0.0);
  const auto changed = grid::changed_groups(t.s, t.s_next).size();
  CHECK(distance(Distance::GroupMismatch, t.s_next, persist) ==
        doctest::Approx(static_cast<double>(changed) / kLayout.group_count()));
  CHECK(group_mismatch(t.s, t.s) == 0.0);
}

TEST_CASE("a turn against persistence scores one group in G") {
  auto data = play(200, 2);
  const auto it = std::find_if(data.begin(), data.end(), [](auto& t) { return t.a == grid::Action::TurnLeft; });
  REQUIRE(it != data.end());
  const auto persist = model::predict_persistence(kLayout, it->s);
  CHECK(distance(Distance::GroupMismatch, it->s_next, persist) == doctest::Approx(1.0 / kLayout.group_count()));
}

TEST_CASE("perfect models give zero WAV score") {
  const auto t = play(50, 3)[11];
  const std::vector<LabeledTransition> rep(500, t);
  model::TrainHyper h;
  h.epochs = 30;
  const auto wm = model::train_world_model(kLayout, rep, h, 1);
  const auto idm = model::train_vanilla_idm(kLayout, rep, model::IdmHyper{}, 1);
  const auto s = wav_score_pool(wm, idm, UnlabeledTransition::hide(t));
  CHECK(s.score == 0.0);
  CHECK(s.candidate_id == t.id);

  // Scores are fractions of groups.
  const auto other = play(300, 4);
  for (const auto& o : other) {
    const double v = wav_score_pool(wm, idm, UnlabeledTransition::hide(o)).score;
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("environment scoring") {
  const auto train = play(1000, 5);
  model::TrainHyper h;
  h.epochs = 10;
  const auto wm = model::train_world_model(kLayout, train, h, 1);
  model::IdmHyper ih;
  ih.epochs = 20;
  const auto idm = model::train_vanilla_idm(kLayout, train, ih, 1);
  std::vector<UnlabeledTransition> video;
  for (const auto& t : train) video.push_back(UnlabeledTransition::hide(t));
  const auto gen = model::fit_subgoal_generator(kLayout, video, 0.1);

  SUBCASE("K = 1 reduces to pool scoring of the sampled subgoal") {
    for (const auto& t : play(40, 6)) {
      Rng a(9), b(9);
      const auto choice = wav_score_env(wm, idm, gen, t.s, 1, a);
      const auto goal = model::sample_subgoals(gen, t.s, 1, b)[0];
      UnlabeledTransition u;
      u.s = t.s;
      u.s_next = goal;
      CHECK(choice.score == wav_score_pool(wm, idm, u).score);
      CHECK(choice.action == model::infer_action(idm, t.s, goal).action);
      CHECK(choice.index == 0);
    }
  }
  SUBCASE("argmax over subgoals, lowest index on ties") {
    Rng rng(10);
    for (const auto& t : play(40, 7)) {
      const auto c = wav_score_env(wm, idm, gen, t.s, 8, rng);
      REQUIRE(c.scores.size() == 8);
      const auto best = std::max_element(c.scores.begin(), c.scores.end());
      CHECK(c.index == static_cast<std::size_t>(best - c.scores.begin()));
      CHECK(c.score == *best);
      CHECK(c.action == c.actions[c.index]);
    }
  }
  SUBCASE("identical subgoals tie at index 0") {
    const auto t = train[3];
    const auto single = model::fit_subgoal_generator(kLayout, {UnlabeledTransition::hide(t)}, 0.0);
    Rng rng(11);
    const auto c = wav_score_env(wm, idm, single, t.s, 4, rng);
    for (double v : c.scores) CHECK(v == c.scores[0]);
    CHECK(c.index == 0);
  }
}

TEST_CASE("candidate scoring") {
  const auto split = small_split(1);
  model::TrainHyper h;
  h.epochs = 10;
  const auto wm = model::train_world_model(kLayout, split.seed_labeled, h, 1);
  const auto idm = model::train_vanilla_idm(kLayout, split.seed_labeled, model::IdmHyper{}, 1);
  const auto ens = model::train_ensemble(kLayout, split.seed_labeled, model::EnsembleConfig{}, h, 1);
  const auto cands = pointers(split.pool);
  data::LabelOracle oracle;
  ScoringContext ctx;
  ctx.wm = &wm;
  ctx.idm = &idm;
  ctx.vanilla_idm = &idm;
  ctx.ensemble = &ens;
  ctx.previous_wm = &wm;
  ctx.oracle = &oracle;
  ctx.seed = 5;
  ctx.round = 1;

  SUBCASE("random is reproducible and round dependent") {
    const auto a = score_candidates(Strategy::Random, ctx, cands);
    CHECK(values(a) == values(score_candidates(Strategy::Random, ctx, cands)));
    auto other = ctx;
    other.round = 2;
    CHECK(values(a) != values(score_candidates(Strategy::Random, other, cands)));
  }
  SUBCASE("oracle scores are the true loss; easy is its mirror") {
    const auto o = score_candidates(Strategy::Oracle, ctx, cands);
    const auto e = score_candidates(Strategy::OracleEasy, ctx, cands);
    data::LabelOracle check;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      CHECK(o[i].score == wm.loss(cands[i]->s, check.label(*cands[i]), cands[i]->s_next));
      CHECK(e[i].score == -o[i].score);
    }
    CHECK(oracle.reads() == 2 * cands.size());
    const auto top = select_batch(Strategy::Oracle, o, 10);
    const auto bottom = select_batch(Strategy::OracleEasy, e, 10);
    for (std::size_t i = 0; i + 1 < top.size(); ++i) CHECK(o[top[i]].score >= o[top[i + 1]].score);
    for (std::size_t i = 0; i + 1 < bottom.size(); ++i) CHECK(o[bottom[i]].score <= o[bottom[i + 1]].score);
  }
  SUBCASE("label-free strategies ignore hidden labels") {
    std::vector<UnlabeledTransition> scrambled;
    Rng rng(3);
    for (const auto& u : split.pool) {
      LabeledTransition t;
      t.id = u.id;
      t.s = u.s;
      t.s_next = u.s_next;
      t.meta = u.meta;
      t.a = grid::kAllActions[rng.index(grid::kNumActions)];
      scrambled.push_back(UnlabeledTransition::hide(t));
    }
    const auto scrambled_ptrs = pointers(scrambled);
    for (auto s : {Strategy::Random, Strategy::Uncertainty, Strategy::Progress, Strategy::WavSparse,
                   Strategy::WavVanilla}) {
      CHECK(values(score_candidates(s, ctx, cands)) == values(score_candidates(s, ctx, scrambled_ptrs)));
    }
    CHECK(oracle.reads() == 0);
  }
  SUBCASE("missing inputs are config errors") {
    ScoringContext bare;
    bare.wm = &wm;
    CHECK_THROWS_AS(score_candidates(Strategy::Oracle, bare, cands), ConfigError);
    CHECK_THROWS_AS(score_candidates(Strategy::Uncertainty, bare, cands), ConfigError);
    CHECK_THROWS_AS(score_candidates(Strategy::WavSparse, bare, cands), ConfigError);
    bare.wm = nullptr;
    CHECK_THROWS_AS(score_candidates(Strategy::Random, bare, cands), ConfigError);
  }
}

TEST_CASE("batch selection") {
  std::vector<AcquisitionScore> s;
  for (double v : {0.3, 0.9, 0.3, 0.1, 0.9, 0.5}) s.push_back({0, Strategy::Random, v, 0});
  CHECK(select_batch(Strategy::Random, s, 3) == std::vector<std::size_t>{1, 4, 5});
  CHECK(select_batch(Strategy::Random, s, 4) == std::vector<std::size_t>{1, 4, 5, 0});
  CHECK(select_batch(Strategy::Random, s, 0).empty());
  CHECK(select_batch(Strategy::Random, s, 99).size() == 6);
  // A monotone map of the scores selects the same items.
  auto t = s;
  for (auto& a : t) a.score = std::exp(5 * a.score) - 2;
  for (std::size_t b = 0; b <= 6; ++b) CHECK(select_batch(Strategy::Random, t, b) == select_batch(Strategy::Random, s, b));
  // One from each of two loss intervals.
  CHECK(select_batch(Strategy::OracleUniform, s, 2) == std::vector<std::size_t>{1, 0});
}

TEST_CASE("exploration loop bookkeeping") {
  const auto split = small_split(2);
  const auto config = fast_config();

  SUBCASE("budget integrity") {
    for (auto strategy : {Strategy::Random, Strategy::Oracle, Strategy::WavSparse, Strategy::Uncertainty}) {
      const auto r = run_exploration(split, strategy, config, 7);
      REQUIRE(r.rounds.size() == 2);
      CHECK(r.labeled.size() == split.seed_labeled.size() + 100);
      std::set<std::uint64_t> ids;
      for (const auto& t : r.labeled) ids.insert(t.id);
      CHECK(ids.size() == r.labeled.size());
      CHECK(r.rounds[0].budget_used == 50);
      CHECK(r.rounds[1].budget_used == 100);
      CHECK(r.rounds[0].scores.size() == split.pool.size());
      CHECK(r.rounds[1].scores.size() == split.pool.size() - 50);
      CHECK(r.rounds[1].pre_test_loss == r.rounds[0].post_test_loss);
      if (reads_labels(strategy)) {
        CHECK(r.rounds[0].acquisition_label_reads > 0);
      } else {
        for (const auto& l : r.rounds) CHECK(l.acquisition_label_reads == 0);
      }
      if (strategy == Strategy::Oracle) {
        for (const auto& l : r.rounds) CHECK(l.spearman_vs_oracle == doctest::Approx(1.0));
      }
      if (strategy == Strategy::Random) {
        for (const auto& l : r.rounds) CHECK(std::abs(l.spearman_vs_oracle) <= 0.15);
      }
    }
  }
  SUBCASE("reruns are identical and hooks see every round") {
    int calls = 0;
    const auto a = run_exploration(split, Strategy::WavSparse, config, 8,
                                   [&](const RoundLog& log, const model::WorldModel&) { CHECK(log.round == ++calls); });
    const auto b = run_exploration(split, Strategy::WavSparse, config, 8);
    CHECK(calls == 2);
    CHECK(a.labeled == b.labeled);
    CHECK(a.final_wm.params() == b.final_wm.params());
  }
  SUBCASE("zero budget acquires nothing") {
    auto c = config;
    c.budget = 0;
    const auto r = run_exploration(split, Strategy::Random, c, 9);
    CHECK(r.labeled == split.seed_labeled);
    for (const auto& l : r.rounds) CHECK(l.post_test_loss == l.pre_test_loss);
  }
  SUBCASE("exhausting the pool is refused") {
    auto c = config;
    c.budget = 300;
    CHECK_THROWS_AS(run_exploration(split, Strategy::Random, c, 9), BudgetError);
  }
  SUBCASE("env mode") {
    auto c = config;
    c.env_mode = true;
    c.K = 4;
    const auto r = run_exploration(split, Strategy::WavSparse, c, 10);
    CHECK(r.labeled.size() == split.seed_labeled.size() + 100);
    CHECK(std::isnan(r.rounds[0].spearman_vs_oracle));
    CHECK_THROWS_AS(run_exploration(split, Strategy::Oracle, c, 10), ConfigError);
  }
}

TEST_CASE("default split grows to 500 labels over three rounds") {
  exp::DataConfig dc;
  const auto split = exp::make_experiment_split(dc, 3);
  auto c = fast_config();
  c.rounds = 3;
  c.budget = 100;
  const auto r = run_exploration(split, Strategy::Random, c, 1);
  CHECK(r.labeled.size() == 500);
  CHECK(r.rounds.back().budget_used == 300);
}
