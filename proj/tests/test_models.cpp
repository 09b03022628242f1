#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>

#include "wav/checkpoint.hpp"
#include "wav/experiments.hpp"
#include "wav/metrics.hpp"

using namespace wav;
using namespace wav::model;
using data::LabeledTransition;
using grid::Action;
using grid::FeatureLayout;

namespace {

const FeatureLayout kLayout;

std::vector<LabeledTransition> play_data(std::size_t n, std::uint64_t seed, int floors = 0) {
  data::EnvConfig env;
  env.n_noisy_floors = floors;
  Rng rng(seed);
  return data::collect_random_play(env, n, rng);
}

std::vector<LabeledTransition> mixed_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return exp::collect_source(data::EnvConfig{}, {n / 2, n - n / 2, 0.3}, rng);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

TEST_CASE("untrained world model is uniform") {
  const WorldModel wm(kLayout);
  const auto t = play_data(1, 1).front();
  const auto d = wm.distributions(t.s, t.a);
  REQUIRE(d.size() == static_cast<std::size_t>(kLayout.group_count()));
  double expected_loss = 0.0;
  for (std::size_t g = 0; g < d.size(); ++g) {
    for (double p : d[g]) CHECK(p == doctest::Approx(1.0 / static_cast<double>(d[g].size())));
    expected_loss += std::log(static_cast<double>(d[g].size()));
  }
  expected_loss /= static_cast<double>(d.size());
  CHECK(wm.loss(t.s, t.a, t.s_next) == doctest::Approx(expected_loss).epsilon(1e-12));
  CHECK(metrics::prediction_loss(wm, {t}) == doctest::Approx(expected_loss).epsilon(1e-12));
}

TEST_CASE("world model gradient matches finite differences") {
  const auto data = play_data(6, 2, 2);
  TrainHyper h;
  h.init_scale = 0.5;
  h.epochs = 0;
  auto wm = train_world_model(kLayout, data, h, 3);
  std::vector<double> grad(wm.param_count(), 0.0);
  for (const auto& t : data) wm.accumulate_gradient(t.s, t.a, t.s_next, 1.0, grad);
  auto total = [&] {
    double l = 0.0;
    for (const auto& t : data) l += wm.loss(t.s, t.a, t.s_next);
    return l;
  };
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (grad[i] != 0.0) touched.push_back(i);
  REQUIRE(touched.size() > 20);
  Rng rng(4);
  for (int k = 0; k < 40; ++k) {
    const std::size_t i = touched[rng.index(touched.size())];
    const double h_step = 1e-5;
    const double keep = wm.params()[i];
    wm.params()[i] = keep + h_step;
    const double up = total();
    wm.params()[i] = keep - h_step;
    const double down = total();
    wm.params()[i] = keep;
    const double fd = (up - down) / (2 * h_step);
    CHECK(std::abs(fd - grad[i]) <= 1e-4 * std::max(std::abs(fd), 1e-3));
  }
}

TEST_CASE("world model memorises a single transition") {
  const auto t = play_data(40, 5)[17];
  const std::vector<LabeledTransition> data(500, t);
  TrainHyper h;
  h.epochs = 30;
  const auto wm = train_world_model(kLayout, data, h, 1);
  CHECK(wm.loss(t.s, t.a, t.s_next) < 0.01);
  CHECK(predict_next(wm, t.s, t.a).next == t.s_next);
  CHECK(metrics::prediction_loss(wm, {t}) < 0.01);
}

TEST_CASE("world model beats persistence and is deterministic") {
  const auto train = play_data(2000, 6);
  const auto test = play_data(500, 7);
  TrainHyper h;
  h.epochs = 20;
  const auto wm = train_world_model(kLayout, train, h, 2);
  std::vector<metrics::DynamicsItem> model_items, persist_items;
  for (const auto& t : test) {
    model_items.push_back({t.s, t.s_next, predict_next(wm, t.s, t.a).next});
    persist_items.push_back({t.s, t.s_next, predict_persistence(kLayout, t.s).next});
  }
  CHECK(metrics::dynamics_accuracy(model_items) > metrics::dynamics_accuracy(persist_items));
  CHECK(metrics::dynamics_accuracy(persist_items) == 0.0);

  const auto again = train_world_model(kLayout, train, h, 2);
  CHECK(again.params() == wm.params());
  CHECK(again.loss_curve == wm.loss_curve);

  for (const auto& t : test) {
    for (const auto& d : wm.distributions(t.s, t.a)) {
      double sum = 0.0;
      for (double p : d) sum += p;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("world model rejects bad input") {
  CHECK_THROWS_AS(train_world_model(kLayout, {}, TrainHyper{}, 0), PreconditionError);
  TrainHyper h;
  h.lr = -1;
  CHECK_THROWS_AS(train_world_model(kLayout, play_data(5, 1), h, 0), ConfigError);
  h.lr = 1e6;
  h.epochs = 5;
  h.init_scale = 1.0;
  CHECK_THROWS_AS(train_world_model(kLayout, play_data(200, 1), h, 0), TrainingDiverged);
}

TEST_CASE("checkpoints reproduce predictions exactly") {
  const auto train = play_data(300, 8);
  TrainHyper h;
  h.epochs = 5;
  const auto wm = train_world_model(kLayout, train, h, 1);
  const auto back = parse_world_model(serialize(wm));
  CHECK(back.params() == wm.params());
  IdmHyper ih;
  ih.epochs = 5;
  const auto idm = train_sparse_idm(kLayout, train, 1.0, ih, 1);
  const auto idm_back = parse_idm(serialize(idm));
  CHECK(idm_back.weights == idm.weights);
  CHECK(idm_back.gate_logits == idm.gate_logits);
  for (const auto& t : train) {
    CHECK(infer_action(idm_back, t.s, t.s_next).distribution == infer_action(idm, t.s, t.s_next).distribution);
  }
  CHECK_THROWS_AS(parse_world_model("{\"schema\":\"wav-model/7\"}"), UnsupportedSchema);
  CHECK_THROWS_AS(parse_world_model("not json"), ParseError);
}

// ---------------------------------------------------------------------------

TEST_CASE("inverse model gradient matches finite differences") {
  const auto data = play_data(8, 9, 1);
  IdmHyper h;
  h.epochs = 0;
  auto p = train_idm(kLayout, data, 0.7, false, h, 1);
  Rng rng(2);
  for (double& w : p.weights) w = 0.3 * rng.normal();
  for (double& b : p.bias) b = 0.3 * rng.normal();
  for (double& g : p.gate_logits) g = rng.normal();
  IdmGradient grad;
  idm_loss_and_gradient(p, data, grad);
  IdmGradient scratch;
  auto loss = [&] { return idm_loss_and_gradient(p, data, scratch); };
  auto check = [&](double& param, double analytic) {
    const double keep = param, eps = 1e-6;
    param = keep + eps;
    const double up = loss();
    param = keep - eps;
    const double down = loss();
    param = keep;
    const double fd = (up - down) / (2 * eps);
    CHECK(std::abs(fd - analytic) <= 1e-4 * std::max(std::abs(fd), 1e-4));
  };
  for (int k = 0; k < 15; ++k) {
    const auto t = data[rng.index(data.size())];
    const auto active = p.features.active(t.s, t.s_next);
    const std::size_t in = active[rng.index(active.size())];
    const std::size_t row = rng.index(grid::kNumActions);
    const std::size_t wi = row * p.features.input_dim() + in;
    check(p.weights[wi], grad.weights[wi]);
    const std::size_t g = p.features.gate_of(in);
    check(p.gate_logits[g], grad.gate_logits[g]);
    check(p.bias[row], grad.bias[row]);
  }
  // A gate no input touches still feels the penalty.
  const std::size_t g = rng.index(p.gate_logits.size());
  check(p.gate_logits[g], grad.gate_logits[g]);
}

TEST_CASE("zero penalty with a frozen mask is the vanilla model") {
  const auto data = play_data(300, 10);
  IdmHyper h;
  h.epochs = 10;
  const auto a = train_idm(kLayout, data, 0.0, true, h, 3);
  const auto b = train_vanilla_idm(kLayout, data, h, 3);
  CHECK(a.loss_curve == b.loss_curve);
  CHECK(a.weights == b.weights);
  for (double m : a.mask()) CHECK(m == 1.0);
  CHECK(mask_sparsity(a) == 0.0);
}

TEST_CASE("learned mask stays inside (0, 1) and training is deterministic") {
  const auto data = play_data(400, 11);
  IdmHyper h;
  h.epochs = 20;
  const auto p = train_sparse_idm(kLayout, data, 10.0, h, 4);
  for (double m : p.mask()) {
    CHECK(m > 0.0);
    CHECK(m < 1.0);
  }
  const auto q = train_sparse_idm(kLayout, data, 10.0, h, 4);
  CHECK(p.weights == q.weights);
  CHECK(p.gate_logits == q.gate_logits);
}

TEST_CASE("sparsity 0.1 on 2000 transitions prunes half the gates at little cost") {
  const auto data = play_data(2000, 12);
  const IdmHyper h;
  const auto sparse = train_sparse_idm(kLayout, data, 0.1, h, 5);
  const auto vanilla = train_vanilla_idm(kLayout, data, h, 5);
  MESSAGE("sparsity " << mask_sparsity(sparse) << ", train accuracy " << action_accuracy(sparse, data) << " vs "
                      << action_accuracy(vanilla, data));
  CHECK(mask_sparsity(sparse) >= 0.5);
  CHECK(action_accuracy(sparse, data) >= action_accuracy(vanilla, data) - 0.02);
}

TEST_CASE("turn-only data concentrates the mask on agent pose") {
  auto data = play_data(3000, 13);
  std::erase_if(data, [](const LabeledTransition& t) { return t.a != Action::TurnLeft && t.a != Action::TurnRight; });
  REQUIRE(data.size() > 500);
  const auto p = train_sparse_idm(kLayout, data, 10.0, IdmHyper{}, 6);
  CHECK(action_accuracy(p, data) > 0.99);
  CHECK(agent_mask_mass(p, 10) >= 0.8);
}

TEST_CASE("inferred turn probability and tie-breaking") {
  const auto train = play_data(2000, 14);
  const auto idm = train_vanilla_idm(kLayout, train, IdmHyper{}, 7);
  Rng rng(15);
  int checked = 0;
  for (const auto& t : play_data(300, 16)) {
    if (t.a != Action::TurnLeft) continue;
    const auto inf = infer_action(idm, t.s, t.s_next);
    CHECK(inf.distribution[static_cast<std::size_t>(grid::action_index(Action::TurnLeft))] >= 0.9);
    ++checked;
  }
  CHECK(checked > 10);

  IdmParams untrained(kLayout, true, 0.0);
  const auto& t = train.front();
  const auto inf = infer_action(untrained, t.s, t.s);
  CHECK(inf.action == Action::TurnLeft);  // all tied, lowest index
  double sum = 0.0;
  for (double p : inf.distribution) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

// ---------------------------------------------------------------------------

TEST_CASE("subgoal generator on turn-only video") {
  auto data = play_data(2000, 17);
  std::vector<data::UnlabeledTransition> video;
  for (const auto& t : data)
    if (t.a == Action::TurnLeft) video.push_back(data::UnlabeledTransition::hide(t));
  const auto gen = fit_subgoal_generator(kLayout, video, 0.1);
  Rng rng(3);
  for (const auto& t : play_data(100, 18)) {
    for (const auto& g : sample_subgoals(gen, t.s, 3, rng)) {
      const auto d = extract_delta(kLayout, t.s, g);
      CHECK(d.rotation == 3);
      CHECK_FALSE(d.forward);
      CHECK(d.front_before == d.front_after);
      CHECK(d.carried_before == d.carried_after);
    }
  }
}

TEST_CASE("subgoals are valid states and unseen contexts back off") {
  const auto data = play_data(3000, 19, 2);
  std::vector<data::UnlabeledTransition> video;
  for (const auto& t : data) video.push_back(data::UnlabeledTransition::hide(t));
  auto gen = fit_subgoal_generator(kLayout, video, 0.0);
  Rng rng(5);
  for (const auto& t : play_data(200, 20, 2)) {
    for (const auto& g : sample_subgoals(gen, t.s, 8, rng)) {
      CHECK_NOTHROW(grid::validate(grid::decode(kLayout, g)));
    }
  }
  const auto s = data.front().s;
  const auto key = context_of(kLayout, s);
  gen.by_context.erase(key);
  const auto backoff = delta_distribution(gen, s);
  REQUIRE_FALSE(backoff.empty());
  double total = 0.0;
  for (const auto& [d, n] : gen.global)
    if (applicable(kLayout, d, s)) total += static_cast<double>(n);
  for (const auto& [d, w] : backoff) CHECK(w == doctest::Approx(static_cast<double>(gen.global.at(d)) / total));
}

TEST_CASE("single stored delta gives the unique successor") {
  const auto t = play_data(10, 21)[3];
  const auto gen = fit_subgoal_generator(kLayout, {data::UnlabeledTransition::hide(t)}, 0.0);
  Rng rng(1);
  const auto goals = sample_subgoals(gen, t.s, 1, rng);
  REQUIRE(goals.size() == 1);
  CHECK(goals[0] == t.s_next);
}

TEST_CASE("subgoal frequencies follow the stored deltas") {
  const auto data = play_data(4000, 22);
  std::vector<data::UnlabeledTransition> video;
  for (const auto& t : data) video.push_back(data::UnlabeledTransition::hide(t));
  const auto gen = fit_subgoal_generator(kLayout, video, 0.2);
  const auto s = data[7].s;
  const auto dist = delta_distribution(gen, s);
  REQUIRE(dist.size() >= 3);
  std::map<StateDelta, double> counts;
  Rng rng(23);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[extract_delta(kLayout, s, sample_subgoals(gen, s, 1, rng)[0])];
  double chi2 = 0.0;
  int cells = 0;
  double lumped_obs = 0.0, lumped_exp = 0.0;
  for (const auto& [d, p] : dist) {
    const double expected = p * draws;
    const double observed = counts.count(d) ? counts[d] : 0.0;
    if (expected < 5.0) {
      lumped_obs += observed;
      lumped_exp += expected;
      continue;
    }
    chi2 += (observed - expected) * (observed - expected) / expected;
    ++cells;
  }
  if (lumped_exp > 0.0) {
    chi2 += (lumped_obs - lumped_exp) * (lumped_obs - lumped_exp) / lumped_exp;
    ++cells;
  }
  REQUIRE(cells >= 2);
  const boost::math::chi_squared chi(cells - 1);
  CHECK(chi2 < boost::math::quantile(chi, 0.99));
}

// ---------------------------------------------------------------------------

TEST_CASE("ensemble disagreement") {
  const auto train = play_data(400, 24);
  TrainHyper h;
  h.epochs = 10;
  EnsembleConfig same;
  same.members = 3;
  same.bootstrap = false;
  same.distinct_seeds = false;
  const auto clones = train_ensemble(kLayout, train, same, h, 1);
  for (const auto& t : train) CHECK(disagreement(clones, t.s, t.a) == 0.0);
  same.members = 1;
  CHECK_THROWS_AS(train_ensemble(kLayout, train, same, h, 1), ConfigError);

  const auto ens = train_ensemble(kLayout, train, EnsembleConfig{}, h, 2);
  for (const auto& t : play_data(100, 25)) CHECK(disagreement(ens, t.s, t.a) >= 0.0);
}

TEST_CASE("ensemble disagrees more on held-out compositions") {
  const auto source = mixed_data(8000, 26);
  const auto f = data::apply_composition_filter(source, data::CompositionTable::standard());
  const std::vector<LabeledTransition> seed(f.train.begin(), f.train.begin() + 300);
  TrainHyper h;
  h.epochs = 30;
  const auto ens = train_ensemble(kLayout, seed, EnsembleConfig{}, h, 3);
  std::vector<double> seen, oos;
  for (const auto& t : seed) seen.push_back(disagreement(ens, t.s, t.a));
  for (const auto& t : f.oos_test) oos.push_back(disagreement(ens, t.s, t.a));
  CHECK(median(seen) < median(oos));
}
