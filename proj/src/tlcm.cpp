#include <algorithm>
#include <map>

#include "wav/theory.hpp"

namespace wav::theory {

namespace {

constexpr int V = TlcmSpec::kValues;
constexpr int kActions = TlcmSpec::kActions;

int s_effect(const TlcmSpec& spec, int action) { return spec.aliasing && action == 3 ? 2 : action; }

std::vector<std::pair<int, int>> scene_pairs(bool seed_support) {
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < V; ++a)
    for (int b = 0; b < V; ++b)
      if (tlcm_in_seed_support({0, 0, a, b}) == seed_support) out.emplace_back(a, b);
  return out;
}

struct Sample {
  TlcmState z, next;
  int action;
};

std::vector<Sample> draw(const TlcmSpec& spec, std::size_t n, bool seed_support, Rng& rng) {
  const auto pairs = scene_pairs(seed_support);
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [z2, z3] = pairs[rng.index(pairs.size())];
    TlcmState z{static_cast<int>(rng.index(V)), static_cast<int>(rng.index(V)), z2, z3};
    const int a = static_cast<int>(rng.index(kActions));
    out.push_back({z, tlcm_step(spec, z, a), a});
  }
  return out;
}

using Key = std::vector<int>;
using Counts = std::array<std::size_t, kActions>;

Key s_key(const Sample& x) { return {x.z[0], x.z[1], x.next[0], x.next[1]}; }
Key dense_key(const Sample& x) {
  Key k(x.z.begin(), x.z.end());
  k.insert(k.end(), x.next.begin(), x.next.end());
  return k;
}

int argmax(const Counts& c) { return static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin()); }

// Majority-vote lookup inverse model.
class LookupIdm {
 public:
  LookupIdm(const std::vector<Sample>& data, Key (*key)(const Sample&)) : key_(key) {
    Counts total{};
    for (const auto& x : data) {
      ++table_[key_(x)][static_cast<std::size_t>(x.action)];
      ++total[static_cast<std::size_t>(x.action)];
    }
    fallback_ = argmax(total);
  }
  int predict(const Sample& x) const {
    const auto it = table_.find(key_(x));
    return it == table_.end() ? fallback_ : argmax(it->second);
  }

 private:
  Key (*key_)(const Sample&);
  std::map<Key, Counts> table_;
  int fallback_ = 0;
};

}  // namespace

bool tlcm_in_seed_support(const TlcmState& z) { return (z[2] + z[3]) % V < 2; }

TlcmState tlcm_step(const TlcmSpec& spec, const TlcmState& z, int action) {
  if (action < 0 || action >= kActions) throw PreconditionError("tlcm_step: action out of range");
  TlcmState n;
  n[0] = (z[0] + s_effect(spec, action)) % V;
  n[1] = (z[1] + z[0]) % V;
  n[2] = (z[2] + action) % V;
  n[3] = (z[3] + z[2]) % V;
  if (spec.back_action && !tlcm_in_seed_support(z)) n[1] = (n[1] + 1) % V;
  return n;
}

TlcmAudit audit_tlcm(const TlcmSpec& spec) {
  TlcmAudit out{true, true};
  for (int z0 = 0; z0 < V; ++z0) {
    for (int z1 = 0; z1 < V; ++z1) {
      std::map<std::pair<int, int>, int> effect_to_action;
      for (int a = 0; a < kActions; ++a) {
        const auto ref = tlcm_step(spec, {z0, z1, 0, 0}, a);
        for (int z2 = 0; z2 < V; ++z2)
          for (int z3 = 0; z3 < V; ++z3) {
            const auto n = tlcm_step(spec, {z0, z1, z2, z3}, a);
            if (n[0] != ref[0] || n[1] != ref[1]) out.insulated = false;
          }
        if (!effect_to_action.emplace(std::pair{ref[0], ref[1]}, a).second) out.injective = false;
      }
    }
  }
  return out;
}

TlcmReport tlcm_demo(const TlcmSpec& spec, std::size_t seed_size, std::size_t oos_size, std::uint64_t seed) {
  if (seed_size == 0 || oos_size == 0) throw PreconditionError("tlcm_demo: seed and OOS sizes must be positive");
  Rng seed_rng = Rng::derive(seed, {1});
  Rng oos_rng = Rng::derive(seed, {2});
  const auto train = draw(spec, seed_size, true, seed_rng);
  const auto oos = draw(spec, oos_size, false, oos_rng);

  const LookupIdm s_idm(train, s_key);
  const LookupIdm dense_idm(train, dense_key);

  TlcmReport r;
  r.seed_size = seed_size;
  r.oos_size = oos_size;
  std::size_t s_hits = 0, dense_hits = 0, aliased = 0, aliased_hits = 0;
  std::map<Key, Counts> oos_counts;
  for (const auto& x : oos) {
    const bool s_ok = s_idm.predict(x) == x.action;
    s_hits += s_ok;
    dense_hits += dense_idm.predict(x) == x.action;
    ++oos_counts[s_key(x)][static_cast<std::size_t>(x.action)];
    if (x.action >= 2) {
      ++aliased;
      aliased_hits += s_ok;
    }
  }
  std::size_t best = 0, best_aliased = 0;
  for (const auto& [key, c] : oos_counts) {
    best += c[static_cast<std::size_t>(argmax(c))];
    best_aliased += std::max(c[2], c[3]);
  }
  const double n = static_cast<double>(oos_size);
  r.s_restricted_accuracy = static_cast<double>(s_hits) / n;
  r.dense_accuracy = static_cast<double>(dense_hits) / n;
  r.s_optimum = static_cast<double>(best) / n;
  if (aliased > 0) {
    r.aliased_pair_accuracy = static_cast<double>(aliased_hits) / static_cast<double>(aliased);
    r.aliased_pair_optimum = std::min(1.0, static_cast<double>(best_aliased) / static_cast<double>(aliased));
  }
  return r;
}

}  // namespace wav::theory
