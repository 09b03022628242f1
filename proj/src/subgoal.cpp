#include "wav/subgoal.hpp"

namespace wav::model {

namespace {

int front_class(const FeatureLayout& layout, const FeatureVector& s, int front) {
  return front < 0 ? layout.cell_classes() : s.classes[static_cast<std::size_t>(front)];
}

}  // namespace

StateDelta extract_delta(const FeatureLayout& layout, const FeatureVector& s, const FeatureVector& s_next) {
  const auto dg = static_cast<std::size_t>(layout.dir_group());
  const auto pg = static_cast<std::size_t>(layout.pos_group());
  const auto cg = static_cast<std::size_t>(layout.carried_group());
  const int front = grid::front_cell_of(layout, s);
  StateDelta d;
  d.rotation = (s_next.classes[dg] - s.classes[dg] + 4) % 4;
  d.forward = s_next.classes[pg] != s.classes[pg];
  d.front_before = front_class(layout, s, front);
  d.front_after = front_class(layout, s_next, front);
  d.carried_before = s.classes[cg];
  d.carried_after = s_next.classes[cg];
  return d;
}

bool applicable(const FeatureLayout& layout, const StateDelta& d, const FeatureVector& s) {
  const int front = grid::front_cell_of(layout, s);
  if (d.forward && front < 0) return false;
  return front_class(layout, s, front) == d.front_before &&
         s.classes[static_cast<std::size_t>(layout.carried_group())] == d.carried_before;
}

FeatureVector apply_delta(const FeatureLayout& layout, const StateDelta& d, const FeatureVector& s) {
  if (!applicable(layout, d, s)) throw PreconditionError("apply_delta: delta does not apply to this state");
  FeatureVector out = s;
  const int front = grid::front_cell_of(layout, s);
  if (front >= 0) out.classes[static_cast<std::size_t>(front)] = static_cast<std::uint16_t>(d.front_after);
  if (d.forward) out.classes[static_cast<std::size_t>(layout.pos_group())] = static_cast<std::uint16_t>(front);
  auto& dir = out.classes[static_cast<std::size_t>(layout.dir_group())];
  dir = static_cast<std::uint16_t>((dir + d.rotation) % 4);
  out.classes[static_cast<std::size_t>(layout.carried_group())] = static_cast<std::uint16_t>(d.carried_after);
  return out;
}

ContextKey context_of(const FeatureLayout& layout, const FeatureVector& s) {
  return {s.classes[static_cast<std::size_t>(layout.dir_group())],
          front_class(layout, s, grid::front_cell_of(layout, s))};
}

SubgoalGenerator fit_subgoal_generator(const FeatureLayout& layout, const std::vector<data::UnlabeledTransition>& video,
                                       double smoothing) {
  if (video.empty()) throw PreconditionError("fit_subgoal_generator: empty video set");
  if (smoothing < 0.0 || smoothing > 1.0) throw ConfigError("fit_subgoal_generator: smoothing must be in [0, 1]");
  SubgoalGenerator gen;
  gen.layout = layout;
  gen.smoothing = smoothing;
  for (const auto& t : video) {
    const auto d = extract_delta(layout, t.s, t.s_next);
    ++gen.by_context[context_of(layout, t.s)][d];
    ++gen.global[d];
  }
  return gen;
}

std::vector<std::pair<StateDelta, double>> delta_distribution(const SubgoalGenerator& gen, const FeatureVector& s) {
  auto restrict = [&](const std::map<StateDelta, std::size_t>& store) {
    std::map<StateDelta, double> p;
    double total = 0.0;
    for (const auto& [d, n] : store) {
      if (!applicable(gen.layout, d, s)) continue;
      p[d] = static_cast<double>(n);
      total += static_cast<double>(n);
    }
    for (auto& [d, w] : p) w /= total;
    return p;
  };
  const auto global = restrict(gen.global);
  std::map<StateDelta, double> local;
  if (auto it = gen.by_context.find(context_of(gen.layout, s)); it != gen.by_context.end()) local = restrict(it->second);

  std::vector<std::pair<StateDelta, double>> out;
  if (local.empty()) {
    out.assign(global.begin(), global.end());
    return out;
  }
  std::map<StateDelta, double> mix;
  for (const auto& [d, w] : local) mix[d] += (1.0 - gen.smoothing) * w;
  if (gen.smoothing > 0.0) {
    for (const auto& [d, w] : global) mix[d] += gen.smoothing * w;
  }
  out.assign(mix.begin(), mix.end());
  return out;
}

std::vector<FeatureVector> sample_subgoals(const SubgoalGenerator& gen, const FeatureVector& s, std::size_t K,
                                           Rng& rng) {
  if (K < 1) throw PreconditionError("sample_subgoals: K must be at least 1");
  auto dist = delta_distribution(gen, s);
  std::vector<FeatureVector> out;
  out.reserve(K);
  if (dist.empty()) {
    out.assign(K, s);
    return out;
  }
  auto draw = [&](const std::vector<std::pair<StateDelta, double>>& items) {
    double total = 0.0;
    for (const auto& it : items) total += it.second;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < items.size(); ++i) {
      u -= items[i].second;
      if (u < 0.0) return i;
    }
    return items.size() - 1;
  };
  auto remaining = dist;
  while (out.size() < K && !remaining.empty()) {
    const auto i = draw(remaining);
    out.push_back(apply_delta(gen.layout, remaining[i].first, s));
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(i));
  }
  while (out.size() < K) out.push_back(apply_delta(gen.layout, dist[draw(dist)].first, s));
  return out;
}

}  // namespace wav::model
