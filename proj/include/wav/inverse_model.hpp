#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wav/datasets.hpp"

namespace wav::model {

using data::LabeledTransition;
using grid::Action;
using grid::FeatureLayout;
using grid::FeatureVector;

/// Binary inputs of the inverse model.
///
/// Per state: agent position, direction, carried class, carried occupancy,
/// faced-cell class (wall included), faced-cell occupancy and every scene
/// cell's class. The same per-state block is built for s and s'. A short
/// block of change cues follows (direction delta, moved, carried changed,
/// faced cell changed) since a linear map over two absolute one-hots cannot
/// express "the direction decreased by one".
///
/// Gates are per feature: the s and s' copies of a state feature share one gate.
class IdmFeatures {
 public:
  enum class Family { Position, Direction, Carried, Front, Scene, DirDelta, Moved, CarriedChanged, FrontChanged };

  explicit IdmFeatures(const FeatureLayout& layout);

  const FeatureLayout& layout() const { return layout_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t cue_dim() const { return 10; }
  std::size_t input_dim() const { return 2 * state_dim_ + cue_dim(); }
  std::size_t gate_dim() const { return state_dim_ + cue_dim(); }

  /// Active input indices for (s, s'), ascending.
  std::vector<std::uint32_t> active(const FeatureVector& s, const FeatureVector& s_next) const;
  std::size_t gate_of(std::size_t input) const { return input < state_dim_ ? input : input - state_dim_; }

  Family family_of_gate(std::size_t gate) const;
  /// Agent pose features: position, direction and the direction/move cues.
  bool is_agent_gate(std::size_t gate) const;
  std::string gate_name(std::size_t gate) const;

 private:
  void state_block(const FeatureVector& s, std::size_t base, std::vector<std::uint32_t>& out) const;

  FeatureLayout layout_;
  std::size_t off_pos_, off_dir_, off_car_, off_car_occ_, off_front_, off_front_occ_, off_scene_, state_dim_;
};

struct IdmHyper {
  double lr = 1.0;                 // weights, plain mini-batch gradient descent
  std::size_t batch_size = 64;
  int epochs = 100;
  double gate_lr = 0.05;           // mask gate step size
  bool gate_adam = true;           // Adam on the gates (false: plain gradient descent)
  double gate_init = 2.0;          // initial gate logit
};

struct IdmParams {
  IdmParams() = default;
  IdmParams(const FeatureLayout& layout, bool frozen_mask, double gate_init);

  IdmFeatures features{FeatureLayout{}};
  bool frozen_mask = true;
  double sparsity_weight = 0.0;
  std::vector<double> gate_logits;  // gate_dim
  std::vector<double> weights;      // kNumActions x input_dim, row-major
  std::array<double, grid::kNumActions> bias{};

  IdmHyper hyper;
  std::uint64_t seed = 0;
  std::vector<double> loss_curve;

  double gate(std::size_t g) const;
  std::vector<double> mask() const;
};

struct IdmGradient {
  std::vector<double> weights;
  std::array<double, grid::kNumActions> bias{};
  std::vector<double> gate_logits;
};

/// Mean action cross-entropy over the batch plus sparsity_weight * mean(mask).
/// The gradient is written into grad (resized as needed).
double idm_loss_and_gradient(const IdmParams& p, const std::vector<LabeledTransition>& batch, IdmGradient& grad);

/// Sparse IDM when sparsity_weight > 0 or frozen_mask is false; the vanilla
/// IDM is frozen_mask = true with sparsity_weight = 0 (unit mask, no penalty).
IdmParams train_idm(const FeatureLayout& layout, const std::vector<LabeledTransition>& data, double sparsity_weight,
                    bool frozen_mask, const IdmHyper& hyper, std::uint64_t seed);

inline IdmParams train_vanilla_idm(const FeatureLayout& layout, const std::vector<LabeledTransition>& data,
                                   const IdmHyper& hyper, std::uint64_t seed) {
  return train_idm(layout, data, 0.0, true, hyper, seed);
}
inline IdmParams train_sparse_idm(const FeatureLayout& layout, const std::vector<LabeledTransition>& data,
                                  double sparsity_weight, const IdmHyper& hyper, std::uint64_t seed) {
  return train_idm(layout, data, sparsity_weight, false, hyper, seed);
}

struct ActionInference {
  Action action;  // argmax, lowest action index on ties
  std::array<double, grid::kNumActions> distribution;
};

ActionInference infer_action(const IdmParams& idm, const FeatureVector& s, const FeatureVector& s_next);

/// Fraction of gates whose value is below 0.05 (0 for a frozen mask).
double mask_sparsity(const IdmParams& idm);

/// Share of mask mass held by agent pose gates among the k largest gates.
double agent_mask_mass(const IdmParams& idm, std::size_t k);

/// Fraction of transitions whose argmax action equals the label.
double action_accuracy(const IdmParams& idm, const std::vector<LabeledTransition>& data);

}  // namespace wav::model
