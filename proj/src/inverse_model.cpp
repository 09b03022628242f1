#include "wav/inverse_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wav::model {

namespace {

constexpr std::size_t kA = grid::kNumActions;
constexpr std::size_t kCarriedClasses = 1 + grid::kObjectCodes;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void softmax(std::array<double, kA>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

}  // namespace

// ---------------------------------------------------------------------------

IdmFeatures::IdmFeatures(const FeatureLayout& layout) : layout_(layout) {
  const std::size_t n = static_cast<std::size_t>(layout.cell_count());
  const std::size_t c = static_cast<std::size_t>(layout.cell_classes());
  std::size_t at = 0;
  off_pos_ = at;
  at += n;
  off_dir_ = at;
  at += 4;
  off_car_ = at;
  at += kCarriedClasses;
  off_car_occ_ = at;
  at += 2;
  off_front_ = at;
  at += c + 1;
  off_front_occ_ = at;
  at += 3;
  off_scene_ = at;
  at += n * c;
  state_dim_ = at;
}

void IdmFeatures::state_block(const FeatureVector& s, std::size_t base, std::vector<std::uint32_t>& out) const {
  const auto& cls = s.classes;
  const std::size_t c = static_cast<std::size_t>(layout_.cell_classes());
  const std::size_t carried = cls[static_cast<std::size_t>(layout_.carried_group())];
  const int front = grid::front_cell_of(layout_, s);
  const std::size_t front_cls = front < 0 ? c : cls[static_cast<std::size_t>(front)];
  const std::size_t front_occ = front < 0 ? 2 : (front_cls >= 1 && front_cls <= grid::kObjectCodes ? 1 : 0);

  auto push = [&](std::size_t i) { out.push_back(static_cast<std::uint32_t>(base + i)); };
  push(off_pos_ + cls[static_cast<std::size_t>(layout_.pos_group())]);
  push(off_dir_ + cls[static_cast<std::size_t>(layout_.dir_group())]);
  push(off_car_ + carried);
  push(off_car_occ_ + (carried ? 1 : 0));
  push(off_front_ + front_cls);
  push(off_front_occ_ + front_occ);
  for (int g = 0; g < layout_.cell_count(); ++g) {
    push(off_scene_ + static_cast<std::size_t>(g) * c + cls[static_cast<std::size_t>(g)]);
  }
}

std::vector<std::uint32_t> IdmFeatures::active(const FeatureVector& s, const FeatureVector& s_next) const {
  std::vector<std::uint32_t> out;
  out.reserve(2 * (7 + static_cast<std::size_t>(layout_.cell_count())) + 4);
  state_block(s, 0, out);
  state_block(s_next, state_dim_, out);

  const std::size_t base = 2 * state_dim_;
  const auto dir = static_cast<int>(s.classes[static_cast<std::size_t>(layout_.dir_group())]);
  const auto dir2 = static_cast<int>(s_next.classes[static_cast<std::size_t>(layout_.dir_group())]);
  const auto pg = static_cast<std::size_t>(layout_.pos_group());
  const auto cg = static_cast<std::size_t>(layout_.carried_group());
  const int front = grid::front_cell_of(layout_, s);
  const bool front_changed =
      front >= 0 && s.classes[static_cast<std::size_t>(front)] != s_next.classes[static_cast<std::size_t>(front)];
  out.push_back(static_cast<std::uint32_t>(base + static_cast<std::size_t>((dir2 - dir + 4) % 4)));
  out.push_back(static_cast<std::uint32_t>(base + 4 + (s.classes[pg] != s_next.classes[pg] ? 1 : 0)));
  out.push_back(static_cast<std::uint32_t>(base + 6 + (s.classes[cg] != s_next.classes[cg] ? 1 : 0)));
  out.push_back(static_cast<std::uint32_t>(base + 8 + (front_changed ? 1 : 0)));
  return out;
}

IdmFeatures::Family IdmFeatures::family_of_gate(std::size_t g) const {
  if (g >= state_dim_) {
    const std::size_t cue = g - state_dim_;
    if (cue < 4) return Family::DirDelta;
    if (cue < 6) return Family::Moved;
    if (cue < 8) return Family::CarriedChanged;
    return Family::FrontChanged;
  }
  if (g < off_dir_) return Family::Position;
  if (g < off_car_) return Family::Direction;
  if (g < off_front_) return Family::Carried;
  if (g < off_scene_) return Family::Front;
  return Family::Scene;
}

bool IdmFeatures::is_agent_gate(std::size_t g) const {
  switch (family_of_gate(g)) {
    case Family::Position:
    case Family::Direction:
    case Family::DirDelta:
    case Family::Moved: return true;
    default: return false;
  }
}

std::string IdmFeatures::gate_name(std::size_t g) const {
  const std::size_t c = static_cast<std::size_t>(layout_.cell_classes());
  switch (family_of_gate(g)) {
    case Family::Position: return "pos[" + std::to_string(g - off_pos_) + "]";
    case Family::Direction: return "dir[" + std::to_string(g - off_dir_) + "]";
    case Family::Carried:
      return g < off_car_occ_ ? "carried[" + std::to_string(g - off_car_) + "]"
                              : "carried_occupied[" + std::to_string(g - off_car_occ_) + "]";
    case Family::Front:
      return g < off_front_occ_ ? "front[" + std::to_string(g - off_front_) + "]"
                                : "front_occupancy[" + std::to_string(g - off_front_occ_) + "]";
    case Family::Scene:
      return "cell" + std::to_string((g - off_scene_) / c) + "[" + std::to_string((g - off_scene_) % c) + "]";
    case Family::DirDelta: return "dir_delta[" + std::to_string(g - state_dim_) + "]";
    case Family::Moved: return "moved[" + std::to_string(g - state_dim_ - 4) + "]";
    case Family::CarriedChanged: return "carried_changed[" + std::to_string(g - state_dim_ - 6) + "]";
    case Family::FrontChanged: return "front_changed[" + std::to_string(g - state_dim_ - 8) + "]";
  }
  return "?";
}

// ---------------------------------------------------------------------------

IdmParams::IdmParams(const FeatureLayout& layout, bool frozen, double gate_init)
    : features(layout), frozen_mask(frozen) {
  gate_logits.assign(features.gate_dim(), gate_init);
  weights.assign(kA * features.input_dim(), 0.0);
}

double IdmParams::gate(std::size_t g) const { return frozen_mask ? 1.0 : sigmoid(gate_logits[g]); }

std::vector<double> IdmParams::mask() const {
  std::vector<double> m(gate_logits.size());
  for (std::size_t g = 0; g < m.size(); ++g) m[g] = gate(g);
  return m;
}

namespace {

// Logits for one input; `m` is the current mask.
std::array<double, kA> logits(const IdmParams& p, const std::vector<std::uint32_t>& x, const std::vector<double>& m) {
  std::array<double, kA> z = p.bias;
  const std::size_t D = p.features.input_dim();
  for (auto i : x) {
    const double v = m[p.features.gate_of(i)];
    for (std::size_t k = 0; k < kA; ++k) z[k] += p.weights[k * D + i] * v;
  }
  return z;
}

}  // namespace

double idm_loss_and_gradient(const IdmParams& p, const std::vector<LabeledTransition>& batch, IdmGradient& grad) {
  if (batch.empty()) throw PreconditionError("idm_loss_and_gradient: empty batch");
  const std::size_t D = p.features.input_dim();
  const std::size_t G = p.features.gate_dim();
  grad.weights.assign(kA * D, 0.0);
  grad.bias.fill(0.0);
  grad.gate_logits.assign(G, 0.0);
  const auto m = p.mask();
  std::vector<double> dmask(G, 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());

  double ce = 0.0;
  for (const auto& t : batch) {
    const auto x = p.features.active(t.s, t.s_next);
    auto z = logits(p, x, m);
    softmax(z);
    const auto y = static_cast<std::size_t>(grid::action_index(t.a));
    ce -= std::log(z[y]);
    for (std::size_t k = 0; k < kA; ++k) {
      const double dz = scale * (z[k] - (k == y ? 1.0 : 0.0));
      grad.bias[k] += dz;
      for (auto i : x) {
        const std::size_t g = p.features.gate_of(i);
        grad.weights[k * D + i] += dz * m[g];
        dmask[g] += dz * p.weights[k * D + i];
      }
    }
  }
  double loss = ce * scale;
  if (!p.frozen_mask) {
    double mean_mask = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      mean_mask += m[g];
      const double dsig = m[g] * (1.0 - m[g]);
      grad.gate_logits[g] = (dmask[g] + p.sparsity_weight / static_cast<double>(G)) * dsig;
    }
    loss += p.sparsity_weight * mean_mask / static_cast<double>(G);
  }
  return loss;
}

IdmParams train_idm(const FeatureLayout& layout, const std::vector<LabeledTransition>& data, double sparsity_weight,
                    bool frozen_mask, const IdmHyper& hyper, std::uint64_t seed) {
  if (data.empty()) throw PreconditionError("train_idm: empty training set");
  if (!(sparsity_weight >= 0.0)) throw ConfigError("train_idm: sparsity_weight must be >= 0");
  if (hyper.batch_size == 0 || hyper.epochs < 0 || !(hyper.lr > 0.0) || !(hyper.gate_lr > 0.0)) {
    throw ConfigError("train_idm: batch_size, epochs and step sizes must be positive");
  }
  IdmParams p(layout, frozen_mask, hyper.gate_init);
  p.sparsity_weight = frozen_mask ? 0.0 : sparsity_weight;
  p.hyper = hyper;
  p.seed = seed;
  Rng rng = Rng::derive(seed, {0x69646d});

  const std::size_t G = p.features.gate_dim();
  std::vector<double> adam_m(G, 0.0), adam_v(G, 0.0);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long step = 0;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<LabeledTransition> batch;
  IdmGradient grad;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      batch.clear();
      for (std::size_t j = start; j < end; ++j) batch.push_back(data[order[j]]);
      epoch_loss += idm_loss_and_gradient(p, batch, grad);
      ++batches;
      for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= hyper.lr * grad.weights[i];
      for (std::size_t k = 0; k < kA; ++k) p.bias[k] -= hyper.lr * grad.bias[k];
      if (!p.frozen_mask) {
        ++step;
        for (std::size_t g = 0; g < G; ++g) {
          const double dg = grad.gate_logits[g];
          if (!hyper.gate_adam) {
            p.gate_logits[g] -= hyper.gate_lr * dg;
            continue;
          }
          adam_m[g] = b1 * adam_m[g] + (1 - b1) * dg;
          adam_v[g] = b2 * adam_v[g] + (1 - b2) * dg * dg;
          const double mh = adam_m[g] / (1 - std::pow(b1, static_cast<double>(step)));
          const double vh = adam_v[g] / (1 - std::pow(b2, static_cast<double>(step)));
          p.gate_logits[g] -= hyper.gate_lr * mh / (std::sqrt(vh) + eps);
        }
      }
    }
    epoch_loss /= static_cast<double>(batches);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingDiverged("inverse model loss is not finite at epoch " + std::to_string(epoch) +
                             " (lr=" + std::to_string(hyper.lr) + ")");
    }
    p.loss_curve.push_back(epoch_loss);
  }
  return p;
}

ActionInference infer_action(const IdmParams& idm, const FeatureVector& s, const FeatureVector& s_next) {
  auto z = logits(idm, idm.features.active(s, s_next), idm.mask());
  softmax(z);
  ActionInference out{};
  out.distribution = z;
  out.action = static_cast<Action>(std::max_element(z.begin(), z.end()) - z.begin());
  return out;
}

double mask_sparsity(const IdmParams& idm) {
  if (idm.frozen_mask) return 0.0;
  const auto m = idm.mask();
  const auto low = std::count_if(m.begin(), m.end(), [](double v) { return v < 0.05; });
  return static_cast<double>(low) / static_cast<double>(m.size());
}

double agent_mask_mass(const IdmParams& idm, std::size_t k) {
  const auto m = idm.mask();
  std::vector<std::size_t> order(m.size());
  std::iota(order.begin(), order.end(), 0);
  k = std::min(k, m.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return m[a] != m[b] ? m[a] > m[b] : a < b; });
  double total = 0.0, agent = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    total += m[order[i]];
    if (idm.features.is_agent_gate(order[i])) agent += m[order[i]];
  }
  return total > 0.0 ? agent / total : 0.0;
}

double action_accuracy(const IdmParams& idm, const std::vector<LabeledTransition>& data) {
  if (data.empty()) throw PreconditionError("action_accuracy: empty data");
  std::size_t hit = 0;
  for (const auto& t : data) hit += infer_action(idm, t.s, t.s_next).action == t.a ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(data.size());
}

}  // namespace wav::model
