#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>

#include "wav/datasets.hpp"
#include "wav/experiments.hpp"

using namespace wav;
using namespace wav::data;
namespace fs = std::filesystem;

namespace {

LabeledTransition with_meta(Action a, grid::ObjectKind k, grid::Color c) {
  LabeledTransition t;
  t.a = a;
  t.meta.front_object = CompositionKey{k, c};
  return t;
}

ExperimentSplit small_split(std::uint64_t seed) {
  exp::DataConfig dc;
  dc.source = {1500, 1500, 0.3};
  dc.split.seed_size = 100;
  dc.split.pool_size = 300;
  dc.split.test_size = 140;
  dc.split.video_size = 460;
  return exp::make_experiment_split(dc, seed);
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("wav_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("random play") {
  EnvConfig env;
  Rng rng(1);
  CHECK(collect_random_play(env, 0, rng).empty());

  Rng a(7), b(7);
  const auto d1 = collect_random_play(env, 1000, a);
  CHECK(d1 == collect_random_play(env, 1000, b));

  std::array<double, grid::kNumActions> counts{};
  for (const auto& t : d1) counts[static_cast<std::size_t>(grid::action_index(t.a))] += 1;
  const double expected = 1000.0 / grid::kNumActions;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(grid::kNumActions - 1);
  CHECK(chi2 < boost::math::quantile(dist, 0.99));
}

TEST_CASE("standard composition table") {
  const auto t = CompositionTable::standard();
  using grid::Color;
  using grid::ObjectKind;
  CHECK(t.classify(with_meta(Action::Pickup, ObjectKind::Key, Color::Blue)) == Coverage::Seen);
  CHECK(t.classify(with_meta(Action::Pickup, ObjectKind::Ball, Color::Blue)) == Coverage::OosOnly);
  CHECK(t.classify(with_meta(Action::Drop, ObjectKind::Key, Color::Red)) == Coverage::OosOnly);
  CHECK(t.classify(with_meta(Action::Toggle, ObjectKind::Box, Color::Red)) == Coverage::Seen);
  LabeledTransition turn;
  turn.a = Action::TurnLeft;
  CHECK(t.classify(turn) == Coverage::Seen);
}

TEST_CASE("composition filter partitions the data") {
  EnvConfig env;
  Rng rng(3);
  const auto data = collect_task_play(env, 3000, 0.3, rng);
  const auto all = apply_composition_filter(data, CompositionTable::all_seen());
  CHECK(all.train == data);
  CHECK(all.oos_test.empty());
  const auto f = apply_composition_filter(data, CompositionTable::standard());
  CHECK(f.train.size() + f.oos_test.size() + f.dropped == data.size());
  CHECK_FALSE(f.oos_test.empty());
}

TEST_CASE("split sizes, balance and disjointness") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto s = small_split(seed);
    CHECK(s.seed_labeled.size() == 100);
    CHECK(s.pool.size() == 300);
    CHECK(s.test.size() == 140);
    CHECK(s.video.size() == 460);
    std::array<int, grid::kNumActions> per_action{};
    for (const auto& t : s.test) ++per_action[static_cast<std::size_t>(grid::action_index(t.a))];
    for (int c : per_action) CHECK(std::abs(c - 20) <= 1);
    std::set<std::uint64_t> ids;
    std::size_t total = 0;
    for (const auto& t : s.seed_labeled) ids.insert(t.id), ++total;
    for (const auto& t : s.test) ids.insert(t.id), ++total;
    for (const auto& t : s.pool) ids.insert(t.id), ++total;
    for (const auto& t : s.video) ids.insert(t.id), ++total;
    CHECK(ids.size() == total);
    const auto table = CompositionTable::standard();
    for (const auto& t : s.seed_labeled) CHECK(table.classify(t) == Coverage::Seen);
  }
}

TEST_CASE("default split has 200 seed transitions") {
  exp::DataConfig dc;
  const auto s = exp::make_experiment_split(dc, 0);
  CHECK(s.seed_labeled.size() == 200);
  CHECK(s.test.size() == 700);
}

TEST_CASE("oversized split is a config error") {
  exp::DataConfig dc;
  dc.split.pool_size = 100000;
  CHECK_THROWS_AS(exp::validate(dc), ConfigError);
}

TEST_CASE("pool reveal ledger") {
  const auto s = small_split(4);
  ExplorationPool pool(s.pool);
  LabelOracle oracle;
  const auto expected = oracle.label(s.pool[5]);
  const auto t = pool.reveal(5);
  CHECK(t.a == expected);
  CHECK(t.s == s.pool[5].s);
  CHECK(pool.budget_used() == 1);
  CHECK_THROWS_AS(pool.reveal(5), BudgetError);
  pool.reveal(6);
  pool.reveal(7);
  CHECK(pool.budget_used() == 3);
  CHECK(pool.unrevealed_indices().size() == s.pool.size() - 3);
  CHECK(oracle.reads() == 1);
}

TEST_CASE("split persistence round trip") {
  const auto s = small_split(5);
  const auto dir = temp_dir("split");
  save_split(s, dir);
  const auto loaded = load_split(dir);
  CHECK(loaded == s);
  for (const char* part : {"seed", "pool", "test", "video"}) {
    CHECK(serialize_partition(loaded, part) == serialize_partition(s, part));
  }

  // Hidden labels survive the trip.
  LabelOracle o1, o2;
  for (std::size_t i = 0; i < s.pool.size(); ++i) CHECK(o1.label(s.pool[i]) == o2.label(loaded.pool[i]));

  SUBCASE("truncated file") {
    const auto path = dir / "pool.jsonl";
    std::ifstream in(path);
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    in.close();
    std::ofstream(path) << header << '\n' << first << '\n';
    CHECK_THROWS_AS(load_split(dir), ParseError);
  }
  SUBCASE("schema mismatch") {
    const auto path = dir / "test.jsonl";
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    in.close();
    std::string text = ss.str();
    text.replace(text.find(kSplitSchema), std::string(kSplitSchema).size(), "wav-split/9");
    std::ofstream(path) << text;
    CHECK_THROWS_AS(load_split(dir), UnsupportedSchema);
  }
  SUBCASE("garbage line") {
    std::ofstream(dir / "seed.jsonl", std::ios::app) << "{not json\n";
    try {
      load_split(dir);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() > 1);
    }
  }
  SUBCASE("missing partition") {
    fs::remove(dir / "video.jsonl");
    CHECK_THROWS_AS(load_split(dir), ParseError);
  }
}
