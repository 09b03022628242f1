#include "wav/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wav::model {

namespace {

constexpr int kCarriedClasses = 1 + grid::kObjectCodes;
constexpr int kRelations = 3;  // other, front, agent

void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

std::size_t argmax(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

WorldModel::WorldModel(const FeatureLayout& layout) : layout_(layout) {
  theta_.assign(blocks().size * grid::kNumActions, 0.0);
}

WorldModel::Blocks WorldModel::blocks() const {
  const std::size_t C = static_cast<std::size_t>(layout_.cell_classes());
  const std::size_t NC = kCarriedClasses;
  const std::size_t R = kRelations;
  Blocks b{};
  std::size_t at = 0;
  b.cell_own = at;
  at += R * C * C;
  b.cell_carried = at;
  at += R * NC * C;
  b.cell_bias = at;
  at += R * C;
  b.cell_copy = at;
  at += R * 2;
  b.pos = at;
  at += R * (C + 1);
  b.dir = at;
  at += 4;
  b.car_own = at;
  at += NC * NC;
  b.car_front = at;
  at += (C + 1) * NC;
  b.car_bias = at;
  at += NC;
  b.car_copy = at;
  at += 2;
  b.size = at;
  return b;
}

int WorldModel::relation(const FeatureVector& s, int cell, int front) const {
  if (cell == s.classes[static_cast<std::size_t>(layout_.pos_group())]) return 2;
  if (cell == front) return 1;
  return 0;
}

template <class Fn>
void WorldModel::for_each_group(const FeatureVector& s, Action a, Fn&& fn) const {
  const Blocks B = blocks();
  const std::size_t base = static_cast<std::size_t>(grid::action_index(a)) * B.size;
  const std::size_t C = static_cast<std::size_t>(layout_.cell_classes());
  const std::size_t NC = kCarriedClasses;
  const int front = grid::front_cell_of(layout_, s);
  const std::size_t carried = s.classes[static_cast<std::size_t>(layout_.carried_group())];

  for (int g = 0; g < layout_.cell_count(); ++g) {
    const auto r = static_cast<std::size_t>(relation(s, g, front));
    const std::size_t own = s.classes[static_cast<std::size_t>(g)];
    const std::size_t o1 = base + B.cell_own + (r * C + own) * C;
    const std::size_t o2 = base + B.cell_carried + (r * NC + carried) * C;
    const std::size_t o3 = base + B.cell_bias + r * C;
    const std::size_t o4 = base + B.cell_copy + r * 2;
    fn(g, static_cast<int>(C), [=](int k, auto&& visit) {
      const auto kk = static_cast<std::size_t>(k);
      visit(o1 + kk);
      visit(o2 + kk);
      visit(o3 + kk);
      if (kk == own) visit(o4);
      if (carried != 0 && kk == carried) visit(o4 + 1);  // object codes coincide with cell classes
    });
  }

  fn(layout_.pos_group(), layout_.cell_count(), [&](int k, auto&& visit) {
    const std::size_t o = base + B.pos + static_cast<std::size_t>(relation(s, k, front)) * (C + 1);
    visit(o);
    visit(o + 1 + s.classes[static_cast<std::size_t>(k)]);
  });

  const int dir = s.classes[static_cast<std::size_t>(layout_.dir_group())];
  fn(layout_.dir_group(), 4, [=](int k, auto&& visit) {
    visit(base + B.dir + static_cast<std::size_t>((k - dir + 4) % 4));
  });

  const std::size_t fc = front < 0 ? C : s.classes[static_cast<std::size_t>(front)];
  const std::size_t o1 = base + B.car_own + carried * NC;
  const std::size_t o2 = base + B.car_front + fc * NC;
  const std::size_t o3 = base + B.car_bias;
  const std::size_t o4 = base + B.car_copy;
  const bool front_object = fc >= 1 && fc <= static_cast<std::size_t>(grid::kObjectCodes);
  fn(layout_.carried_group(), static_cast<int>(NC), [=](int k, auto&& visit) {
    const auto kk = static_cast<std::size_t>(k);
    visit(o1 + kk);
    visit(o2 + kk);
    visit(o3 + kk);
    if (kk == carried) visit(o4);
    if (front_object && kk == fc) visit(o4 + 1);
  });
}

std::vector<std::vector<double>> WorldModel::distributions(const FeatureVector& s, Action a) const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(layout_.group_count()));
  for_each_group(s, a, [&](int g, int n, auto&& terms) {
    auto& z = out[static_cast<std::size_t>(g)];
    z.assign(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      terms(k, [&](std::size_t i) { acc += theta_[i]; });
      z[static_cast<std::size_t>(k)] = acc;
    }
    softmax_inplace(z);
  });
  return out;
}

double WorldModel::loss(const FeatureVector& s, Action a, const FeatureVector& s_next) const {
  const auto dist = distributions(s, a);
  double total = 0.0;
  for (std::size_t g = 0; g < dist.size(); ++g) total -= std::log(dist[g][s_next.classes[g]]);
  return total / static_cast<double>(dist.size());
}

double WorldModel::accumulate_gradient(const FeatureVector& s, Action a, const FeatureVector& s_next,
                                       double scale, std::vector<double>& grad) const {
  const double inv_groups = 1.0 / layout_.group_count();
  double total = 0.0;
  std::vector<double> z;
  for_each_group(s, a, [&](int g, int n, auto&& terms) {
    z.assign(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      terms(k, [&](std::size_t i) { acc += theta_[i]; });
      z[static_cast<std::size_t>(k)] = acc;
    }
    softmax_inplace(z);
    const int target = s_next.classes[static_cast<std::size_t>(g)];
    total -= std::log(z[static_cast<std::size_t>(target)]);
    for (int k = 0; k < n; ++k) {
      const double coef = scale * inv_groups * (z[static_cast<std::size_t>(k)] - (k == target ? 1.0 : 0.0));
      if (coef == 0.0) continue;
      terms(k, [&](std::size_t i) { grad[i] += coef; });
    }
  });
  return total * inv_groups;
}

WorldModel train_world_model(const FeatureLayout& layout, const std::vector<LabeledTransition>& data,
                             const TrainHyper& hyper, std::uint64_t seed) {
  if (data.empty()) throw PreconditionError("train_world_model: empty training set");
  if (hyper.batch_size == 0 || hyper.epochs < 0 || !(hyper.lr > 0.0) || !(hyper.weight_decay >= 0.0)) {
    throw ConfigError("train_world_model: batch_size, epochs and lr must be positive, weight_decay non-negative");
  }
  WorldModel wm(layout);
  wm.hyper = hyper;
  wm.seed = seed;
  Rng rng = Rng::derive(seed, {0x776d});
  if (hyper.init_scale > 0.0) {
    for (double& w : wm.params()) w = hyper.init_scale * rng.normal();
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(wm.param_count(), 0.0);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t j = start; j < end; ++j) {
        const auto& t = data[order[j]];
        epoch_loss += wm.accumulate_gradient(t.s, t.a, t.s_next, scale, grad);
      }
      auto& theta = wm.params();
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= hyper.lr * (grad[i] + hyper.weight_decay * theta[i]);
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) {
      throw TrainingDiverged("world model loss is not finite at epoch " + std::to_string(epoch) +
                             " (lr=" + std::to_string(hyper.lr) + ")");
    }
    wm.loss_curve.push_back(epoch_loss);
  }
  return wm;
}

Prediction predict_next(const WorldModel& wm, const FeatureVector& s, Action a) {
  Prediction p;
  p.distributions = wm.distributions(s, a);
  p.next.classes.resize(p.distributions.size());
  for (std::size_t g = 0; g < p.distributions.size(); ++g) {
    p.next.classes[g] = static_cast<std::uint16_t>(argmax(p.distributions[g]));
  }
  return p;
}

Prediction predict_persistence(const FeatureLayout& layout, const FeatureVector& s) {
  Prediction p;
  p.next = s;
  p.distributions.resize(static_cast<std::size_t>(layout.group_count()));
  for (int g = 0; g < layout.group_count(); ++g) {
    auto& d = p.distributions[static_cast<std::size_t>(g)];
    d.assign(static_cast<std::size_t>(layout.group_size(g)), 0.0);
    d[s.classes[static_cast<std::size_t>(g)]] = 1.0;
  }
  return p;
}

}  // namespace wav::model
