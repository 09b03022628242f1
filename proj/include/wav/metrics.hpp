#pragma once

#include <vector>

#include "wav/world_model.hpp"

namespace wav::metrics {

using grid::FeatureVector;

/// One evaluated transition: the prior state, the true successor and a prediction.
struct DynamicsItem {
  FeatureVector prior;
  FeatureVector truth;
  FeatureVector prediction;
};

/// Accuracy over the groups that change between prior and truth, pooled over
/// all items. Throws UndefinedMetric if no item has a changed group.
double dynamics_accuracy(const std::vector<DynamicsItem>& items);

/// Average (mid) ranks, 1-based, aligned with the input.
std::vector<double> average_ranks(const std::vector<double>& x);

/// 1 - 6 sum d^2 / (n (n^2 - 1)) over average ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// (Nc - Nd) / (n (n - 1) / 2); pairs tied in x or y count in neither.
/// O(n log n) merge count.
double kendall(const std::vector<double>& x, const std::vector<double>& y);

/// Mean per-group cross-entropy of the true successors.
double prediction_loss(const model::WorldModel& wm, const std::vector<data::LabeledTransition>& test);

}  // namespace wav::metrics
