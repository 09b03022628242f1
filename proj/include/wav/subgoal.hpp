#pragma once

#include <compare>
#include <map>
#include <vector>

#include "wav/datasets.hpp"

namespace wav::model {

using grid::FeatureLayout;
using grid::FeatureVector;

/// Egocentric change between consecutive states: rotation, an optional step
/// forward, and the before/after classes of the faced cell and the carried
/// slot. The faced class uses cell_classes() for the wall.
struct StateDelta {
  int rotation = 0;
  bool forward = false;
  int front_before = 0;
  int front_after = 0;
  int carried_before = 0;
  int carried_after = 0;
  auto operator<=>(const StateDelta&) const = default;
};

StateDelta extract_delta(const FeatureLayout& layout, const FeatureVector& s, const FeatureVector& s_next);
/// The faced and carried classes of s match the delta's "before" side.
bool applicable(const FeatureLayout& layout, const StateDelta& d, const FeatureVector& s);
/// Applies an applicable delta; other groups (floors included) are copied from s.
FeatureVector apply_delta(const FeatureLayout& layout, const StateDelta& d, const FeatureVector& s);

/// Context key: agent direction and faced-cell class.
using ContextKey = std::pair<int, int>;
ContextKey context_of(const FeatureLayout& layout, const FeatureVector& s);

/// Nonparametric next-state prior fitted on action-free transitions.
struct SubgoalGenerator {
  FeatureLayout layout;
  double smoothing = 0.0;  // mixture weight of the global delta distribution
  std::map<ContextKey, std::map<StateDelta, std::size_t>> by_context;
  std::map<StateDelta, std::size_t> global;
};

SubgoalGenerator fit_subgoal_generator(const FeatureLayout& layout, const std::vector<data::UnlabeledTransition>& video,
                                       double smoothing);

/// Normalised sampling weights over the applicable deltas for s, in delta
/// order. Falls back to the global store when the context is unseen or has no
/// applicable delta; empty when nothing applies anywhere.
std::vector<std::pair<StateDelta, double>> delta_distribution(const SubgoalGenerator& gen, const FeatureVector& s);

/// K subgoals: distinct deltas drawn without replacement while any remain,
/// then with replacement. The identity delta is used if nothing applies.
std::vector<FeatureVector> sample_subgoals(const SubgoalGenerator& gen, const FeatureVector& s, std::size_t K, Rng& rng);

}  // namespace wav::model
