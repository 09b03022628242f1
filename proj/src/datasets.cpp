#include "wav/datasets.hpp"

#include <algorithm>
#include <numeric>

namespace wav::data {

using grid::Color;
using grid::ObjectKind;

std::string composition_name(const CompositionKey& k) {
  return std::string(grid::color_name(k.color)) + "_" + std::string(grid::kind_name(k.kind));
}

std::optional<CompositionKey> parse_composition(std::string_view name) {
  for (int kind = 0; kind < 3; ++kind) {
    for (int color = 0; color < 2; ++color) {
      CompositionKey k{static_cast<ObjectKind>(kind), static_cast<Color>(color)};
      if (composition_name(k) == name) return k;
    }
  }
  return std::nullopt;
}

UnlabeledTransition UnlabeledTransition::hide(const LabeledTransition& t) {
  UnlabeledTransition u;
  u.id = t.id;
  u.s = t.s;
  u.s_next = t.s_next;
  u.meta = t.meta;
  u.hidden_action_ = t.a;
  return u;
}

std::optional<CompositionKey> composition_object(const grid::GridTransition& t) {
  if (!grid::is_interaction(t.a) || !grid::differs_outside_floors(t.s, t.s_next)) return std::nullopt;
  const grid::GridObject* obj = nullptr;
  if (t.a == Action::Drop) {
    if (t.s.agent.carried) obj = &*t.s.agent.carried;
  } else if (const auto front = grid::front_index(t.s)) {
    const auto& cell = t.s.cells[static_cast<std::size_t>(*front)];
    if (cell) obj = &*cell;
  }
  if (!obj) return std::nullopt;
  return CompositionKey{obj->kind, obj->color};
}

LabeledTransition make_labeled(const FeatureLayout& layout, const grid::GridTransition& t, std::uint64_t id,
                               std::string task) {
  LabeledTransition out;
  out.id = id;
  out.s = grid::encode(layout, t.s);
  out.a = t.a;
  out.s_next = grid::encode(layout, t.s_next);
  out.meta.front_object = composition_object(t);
  out.meta.task = std::move(task);
  return out;
}

// ---------------------------------------------------------------------------

std::size_t CompositionTable::slot(Action a, ObjectKind k, Color c) {
  const int ai = grid::action_index(a) - grid::action_index(Action::Pickup);
  if (ai < 0) throw PreconditionError("composition table covers interaction actions only");
  return static_cast<std::size_t>(ai * 6 + static_cast<int>(k) * 2 + static_cast<int>(c));
}

CompositionTable CompositionTable::all_seen() {
  CompositionTable t;
  t.cells_.fill(Coverage::Seen);
  return t;
}

CompositionTable CompositionTable::standard() {
  CompositionTable t = all_seen();
  constexpr Coverage S = Coverage::Seen, O = Coverage::OosOnly, X = Coverage::Absent;
  // Columns: red key, blue key, red ball, blue ball.
  const std::array<std::pair<Action, std::array<Coverage, 4>>, 4> rows = {{
      {Action::Pickup, {X, S, X, O}},
      {Action::Drop, {O, X, S, X}},
      {Action::Toggle, {O, S, S, O}},
      {Action::Swap, {O, X, S, X}},
  }};
  for (const auto& [action, marks] : rows) {
    t.set(action, ObjectKind::Key, Color::Red, marks[0]);
    t.set(action, ObjectKind::Key, Color::Blue, marks[1]);
    t.set(action, ObjectKind::Ball, Color::Red, marks[2]);
    t.set(action, ObjectKind::Ball, Color::Blue, marks[3]);
  }
  return t;
}

Coverage CompositionTable::get(Action a, ObjectKind k, Color c) const { return cells_[slot(a, k, c)]; }
void CompositionTable::set(Action a, ObjectKind k, Color c, Coverage v) { cells_[slot(a, k, c)] = v; }

Coverage CompositionTable::classify(const LabeledTransition& t) const {
  if (!grid::is_interaction(t.a) || !t.meta.front_object) return Coverage::Seen;
  return get(t.a, t.meta.front_object->kind, t.meta.front_object->color);
}

FilterResult apply_composition_filter(const std::vector<LabeledTransition>& data, const CompositionTable& table) {
  FilterResult out;
  for (const auto& t : data) {
    switch (table.classify(t)) {
      case Coverage::Seen: out.train.push_back(t); break;
      case Coverage::OosOnly: out.oos_test.push_back(t); break;
      case Coverage::Absent: ++out.dropped; break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<LabeledTransition> collect_random_play(const EnvConfig& env, std::size_t n, Rng& rng,
                                                   std::uint64_t first_id) {
  if (env.horizon < 1) throw ConfigError("horizon must be positive");
  const FeatureLayout layout(env.shape);
  std::vector<LabeledTransition> out;
  out.reserve(n);
  while (out.size() < n) {
    const auto start = grid::generate_layout(env.shape, env.n_objects, env.n_noisy_floors, rng);
    const auto len = std::min<std::size_t>(static_cast<std::size_t>(env.horizon), n - out.size());
    for (const auto& t : grid::random_policy_rollout(start, static_cast<int>(len), rng)) {
      out.push_back(make_labeled(layout, t, first_id + out.size(), "random"));
    }
  }
  return out;
}

std::vector<LabeledTransition> collect_task_play(const EnvConfig& env, std::size_t n, double epsilon, Rng& rng,
                                                 std::uint64_t first_id) {
  if (env.horizon < 1) throw ConfigError("horizon must be positive");
  if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("epsilon must be in [0, 1]");
  const FeatureLayout layout(env.shape);
  std::vector<LabeledTransition> out;
  out.reserve(n);
  int episode = 0;
  while (out.size() < n) {
    const auto task = static_cast<grid::Task>(episode++ % grid::kNumTasks);
    const auto start = grid::generate_task_layout(env.shape, env.n_objects, env.n_noisy_floors, rng);
    const auto len = std::min<std::size_t>(static_cast<std::size_t>(env.horizon), n - out.size());
    auto steps = grid::scripted_episode(start, task, static_cast<int>(len), epsilon, rng);
    if (steps.empty()) continue;
    for (const auto& t : steps) {
      out.push_back(make_labeled(layout, t, first_id + out.size(), std::string(grid::task_name(task))));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

}  // namespace

ExperimentSplit build_split(const grid::GridShape& shape, const std::vector<LabeledTransition>& source,
                            const SplitConfig& config, Rng& rng) {
  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  std::vector<bool> used(source.size(), false);

  ExperimentSplit split;
  split.shape = shape;

  // Test: stratified by action.
  std::array<std::size_t, grid::kNumActions> quota{};
  for (int a = 0; a < grid::kNumActions; ++a) {
    quota[static_cast<std::size_t>(a)] =
        config.test_size / grid::kNumActions + (static_cast<std::size_t>(a) < config.test_size % grid::kNumActions ? 1 : 0);
  }
  for (auto i : order) {
    auto& q = quota[static_cast<std::size_t>(grid::action_index(source[i].a))];
    if (q == 0) continue;
    --q;
    used[i] = true;
    split.test.push_back(source[i]);
  }
  for (int a = 0; a < grid::kNumActions; ++a) {
    if (quota[static_cast<std::size_t>(a)] != 0) {
      throw ConfigError("insufficient source data for partition 'test': action " +
                        std::string(grid::action_name(static_cast<Action>(a))) + " is short by " +
                        std::to_string(quota[static_cast<std::size_t>(a)]));
    }
  }

  // Seed: Seen compositions only when a filter is configured.
  for (auto i : order) {
    if (split.seed_labeled.size() == config.seed_size) break;
    if (used[i]) continue;
    if (config.seed_filter && config.seed_filter->classify(source[i]) != Coverage::Seen) continue;
    used[i] = true;
    split.seed_labeled.push_back(source[i]);
  }
  if (split.seed_labeled.size() < config.seed_size) {
    throw ConfigError("insufficient source data for partition 'seed': need " + std::to_string(config.seed_size) +
                      ", found " + std::to_string(split.seed_labeled.size()));
  }

  auto fill = [&](std::vector<UnlabeledTransition>& dst, std::size_t want, const char* name) {
    for (auto i : order) {
      if (dst.size() == want) break;
      if (used[i]) continue;
      used[i] = true;
      dst.push_back(UnlabeledTransition::hide(source[i]));
    }
    if (dst.size() < want) {
      throw ConfigError(std::string("insufficient source data for partition '") + name + "': need " +
                        std::to_string(want) + ", found " + std::to_string(dst.size()));
    }
  };
  fill(split.pool, config.pool_size, "pool");
  fill(split.video, config.video_size, "video");
  return split;
}

// ---------------------------------------------------------------------------

ExplorationPool::ExplorationPool(const std::vector<UnlabeledTransition>& items)
    : items_(&items), revealed_(items.size(), false) {}

std::vector<std::size_t> ExplorationPool::unrevealed_indices() const {
  std::vector<std::size_t> out;
  out.reserve(remaining());
  for (std::size_t i = 0; i < size(); ++i) {
    if (!revealed_[i]) out.push_back(i);
  }
  return out;
}

LabeledTransition ExplorationPool::reveal(std::size_t i) {
  if (i >= size()) throw BudgetError("reveal: index " + std::to_string(i) + " out of range");
  if (revealed_[i]) throw BudgetError("reveal: item " + std::to_string(i) + " was already revealed");
  revealed_[i] = true;
  ++budget_used_;
  const auto& u = (*items_)[i];
  return {u.id, u.s, u.hidden_action_, u.s_next, u.meta};
}

}  // namespace wav::data
