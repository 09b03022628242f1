#pragma once

#include <cstdint>
#include <vector>

#include "wav/datasets.hpp"

namespace wav::model {

using data::LabeledTransition;
using grid::Action;
using grid::FeatureLayout;
using grid::FeatureVector;

struct TrainHyper {
  double lr = 10.0;  // the loss is a mean over groups, so per-group steps are lr / group_count
  std::size_t batch_size = 64;
  int epochs = 60;
  double init_scale = 0.0;  // stddev of the random initial weights
  double weight_decay = 0.0;
};

/// Forward model over the factored encoding.
///
/// Every output group has its own softmax head. Heads are linear in a fixed
/// relational recoding of (s, a): a cell is either the agent's cell, the
/// faced cell or any other cell, and cells of the same relation share
/// weights. One weight block per action.
///
///   cell g:    logits = W_own[r][class(g)] + W_carried[r][carried] + b[r]
///              + keep[r] at k = class(g) + put[r] at k = carried item
///   position:  logit(k) = U[r(k)][0] + U[r(k)][1 + class(k)]
///   direction: logit(k) = D[(k - dir) mod 4]
///   carried:   logits = P[carried] + Q[front class or wall] + c
///              + keep at k = carried + take at k = faced object
///
/// The keep/put/take terms are shared across object classes, so copying an
/// object between slots generalises to classes that were never moved in
/// the training data.
class WorldModel {
 public:
  WorldModel() = default;
  explicit WorldModel(const FeatureLayout& layout);

  const FeatureLayout& layout() const { return layout_; }
  std::size_t param_count() const { return theta_.size(); }
  std::vector<double>& params() { return theta_; }
  const std::vector<double>& params() const { return theta_; }

  /// Per-group softmax distributions for (s, a).
  std::vector<std::vector<double>> distributions(const FeatureVector& s, Action a) const;

  /// Mean per-group cross-entropy of s_next under the model.
  double loss(const FeatureVector& s, Action a, const FeatureVector& s_next) const;

  /// Adds scale * d(loss)/d(theta) into grad and returns the loss.
  double accumulate_gradient(const FeatureVector& s, Action a, const FeatureVector& s_next, double scale,
                             std::vector<double>& grad) const;

  // Training metadata.
  TrainHyper hyper;
  std::uint64_t seed = 0;
  std::vector<double> loss_curve;  // mean training loss per epoch

 private:
  struct Blocks {
    std::size_t cell_own, cell_carried, cell_bias, cell_copy, pos, dir, car_own, car_front, car_bias, car_copy, size;
  };
  Blocks blocks() const;
  int relation(const FeatureVector& s, int cell, int front) const;

  // Visits each group: fn(group, n_classes, term_fn) where term_fn(k, visit) calls
  // visit(param_index) for every weight in the logit of class k.
  template <class Fn>
  void for_each_group(const FeatureVector& s, Action a, Fn&& fn) const;

  FeatureLayout layout_;
  std::vector<double> theta_;
};

/// Mini-batch gradient descent on the mean per-group cross-entropy.
/// Throws PreconditionError on empty data and TrainingDiverged on a non-finite loss.
WorldModel train_world_model(const FeatureLayout& layout, const std::vector<LabeledTransition>& data,
                             const TrainHyper& hyper, std::uint64_t seed);

struct Prediction {
  FeatureVector next;                              // groupwise argmax, lowest index on ties
  std::vector<std::vector<double>> distributions;  // one per group
};

Prediction predict_next(const WorldModel& wm, const FeatureVector& s, Action a);

/// Persistence baseline: s' = s.
Prediction predict_persistence(const FeatureLayout& layout, const FeatureVector& s);

}  // namespace wav::model
