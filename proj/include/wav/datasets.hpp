#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wav/gridworld.hpp"
#include "wav/tasks.hpp"

namespace wav::data {

using grid::Action;
using grid::FeatureLayout;
using grid::FeatureVector;

/// The object an effective interaction acts on (see composition_object).
struct CompositionKey {
  grid::ObjectKind kind;
  grid::Color color;
  bool operator==(const CompositionKey&) const = default;
};
std::string composition_name(const CompositionKey& k);
std::optional<CompositionKey> parse_composition(std::string_view name);

struct TransitionMeta {
  std::optional<CompositionKey> front_object;
  std::string task;  // task name or "random"
  bool operator==(const TransitionMeta&) const = default;
};

struct LabeledTransition {
  std::uint64_t id = 0;
  FeatureVector s;
  Action a = Action::TurnLeft;
  FeatureVector s_next;
  TransitionMeta meta;
  bool operator==(const LabeledTransition&) const = default;
};

class ExplorationPool;
class LabelOracle;
struct SplitIo;

/// Transition whose action is withheld. The label is reachable only through
/// ExplorationPool::reveal, a LabelOracle, or split persistence.
class UnlabeledTransition {
 public:
  UnlabeledTransition() = default;
  static UnlabeledTransition hide(const LabeledTransition& t);

  std::uint64_t id = 0;
  FeatureVector s;
  FeatureVector s_next;
  TransitionMeta meta;

  bool operator==(const UnlabeledTransition&) const = default;

 private:
  friend class ExplorationPool;
  friend class LabelOracle;
  friend struct SplitIo;
  Action hidden_action_ = Action::TurnLeft;
};

/// Composition object of a transition: Pickup/Toggle/Swap use the object in
/// front before the step, Drop uses the carried object. Only effective
/// interactions have one.
std::optional<CompositionKey> composition_object(const grid::GridTransition& t);

LabeledTransition make_labeled(const FeatureLayout& layout, const grid::GridTransition& t, std::uint64_t id,
                               std::string task);

// ---------------------------------------------------------------------------

enum class Coverage { Seen, OosOnly, Absent };

class CompositionTable {
 public:
  /// Every interaction x object x colour combination marked Seen.
  static CompositionTable all_seen();
  /// Key/ball markings for pick up, drop, toggle and swap; boxes always Seen.
  static CompositionTable standard();

  Coverage get(Action a, grid::ObjectKind k, grid::Color c) const;
  void set(Action a, grid::ObjectKind k, grid::Color c, Coverage v);
  /// Classification of a transition; non-interactions and no-ops are Seen.
  Coverage classify(const LabeledTransition& t) const;

 private:
  static std::size_t slot(Action a, grid::ObjectKind k, grid::Color c);
  std::array<Coverage, 4 * 3 * 2> cells_{};
};

struct FilterResult {
  std::vector<LabeledTransition> train;
  std::vector<LabeledTransition> oos_test;
  std::size_t dropped = 0;
};

FilterResult apply_composition_filter(const std::vector<LabeledTransition>& data, const CompositionTable& table);

// ---------------------------------------------------------------------------

struct EnvConfig {
  grid::GridShape shape;
  int n_objects = 6;
  int n_noisy_floors = 0;
  int horizon = 50;  // steps before the layout is re-rolled
};

/// Exactly n random-policy transitions, ids numbered from first_id.
std::vector<LabeledTransition> collect_random_play(const EnvConfig& env, std::size_t n, Rng& rng,
                                                   std::uint64_t first_id = 0);

/// Exactly n transitions from the scripted tasks (cycled), epsilon-greedy.
std::vector<LabeledTransition> collect_task_play(const EnvConfig& env, std::size_t n, double epsilon, Rng& rng,
                                                 std::uint64_t first_id = 0);

// ---------------------------------------------------------------------------

struct SplitConfig {
  std::size_t seed_size = 200;
  std::size_t pool_size = 2000;
  std::size_t test_size = 700;
  std::size_t video_size = 5000;
  /// Restrict the labelled seed to Seen compositions of this table.
  std::optional<CompositionTable> seed_filter = CompositionTable::standard();
};

struct ExperimentSplit {
  grid::GridShape shape;
  std::vector<LabeledTransition> seed_labeled;
  std::vector<UnlabeledTransition> pool;
  std::vector<LabeledTransition> test;
  std::vector<UnlabeledTransition> video;
  bool operator==(const ExperimentSplit&) const = default;
};

/// Disjoint split. The test set is stratified so every action gets
/// test_size/7 items (+1 for the first test_size%7 actions).
ExperimentSplit build_split(const grid::GridShape& shape, const std::vector<LabeledTransition>& source,
                            const SplitConfig& config, Rng& rng);

// ---------------------------------------------------------------------------

/// Reveal ledger over a pool. Single writer.
class ExplorationPool {
 public:
  explicit ExplorationPool(const std::vector<UnlabeledTransition>& items);

  std::size_t size() const { return items_->size(); }
  const UnlabeledTransition& operator[](std::size_t i) const { return (*items_)[i]; }
  bool revealed(std::size_t i) const { return revealed_[i]; }
  std::size_t budget_used() const { return budget_used_; }
  std::size_t remaining() const { return size() - budget_used_; }
  std::vector<std::size_t> unrevealed_indices() const;

  /// Marks i revealed and returns its labelled form; throws BudgetError on a second reveal.
  LabeledTransition reveal(std::size_t i);

 private:
  const std::vector<UnlabeledTransition>* items_;
  std::vector<bool> revealed_;
  std::size_t budget_used_ = 0;
};

/// Counted label access for oracle-family scoring and evaluation.
class LabelOracle {
 public:
  Action label(const UnlabeledTransition& t) {
    ++reads_;
    return t.hidden_action_;
  }
  std::size_t reads() const { return reads_; }

 private:
  std::size_t reads_ = 0;
};

// ---------------------------------------------------------------------------
// Persistence: one JSON-lines file per partition (seed, pool, test, video).

inline constexpr const char* kSplitSchema = "wav-split/1";

void save_split(const ExperimentSplit& split, const std::filesystem::path& dir);
ExperimentSplit load_split(const std::filesystem::path& dir);

/// Canonical serialisation of one partition file.
std::string serialize_partition(const ExperimentSplit& split, std::string_view part);

}  // namespace wav::data
