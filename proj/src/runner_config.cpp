#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wav/runner.hpp"

namespace wav::runner {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads keys from one JSON object and rejects any it was not asked about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& dst) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    dst = convert<T>(*it, where(key));
  }

  template <class Fn>
  void with(const char* key, Fn&& fn) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it != j_.end()) fn(*it, where(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key '" + where(k.c_str()) + "'");
    }
  }

  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("'" + where + "' must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("'" + where + "' must be an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
        throw ConfigError("'" + where + "' must be non-negative");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("'" + where + "' must be a number");
      return v.get<T>();
    } else {
      if (!v.is_string()) throw ConfigError("'" + where + "' must be a string");
      return v.get<std::string>();
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_env(const json& j, const std::string& path, data::EnvConfig& env) {
  Section s(j, path);
  s.get("width", env.shape.width);
  s.get("height", env.shape.height);
  s.get("floor_palette", env.shape.floor_palette);
  s.get("n_objects", env.n_objects);
  s.get("n_noisy_floors", env.n_noisy_floors);
  s.get("horizon", env.horizon);
  s.finish();
  if (env.shape.width < 3 || env.shape.height < 3) throw ConfigError("'" + path + "': width and height must be >= 3");
  if (env.shape.floor_palette < 1) throw ConfigError("'" + path + ".floor_palette' must be positive");
  if (env.horizon < 1) throw ConfigError("'" + path + ".horizon' must be positive");
}

void read_source(const json& j, const std::string& path, exp::SourceConfig& src) {
  Section s(j, path);
  s.get("task_transitions", src.task_transitions);
  s.get("random_transitions", src.random_transitions);
  s.get("epsilon", src.epsilon);
  s.finish();
}

void read_split(const json& j, const std::string& path, data::SplitConfig& split) {
  Section s(j, path);
  s.get("seed_size", split.seed_size);
  s.get("pool_size", split.pool_size);
  s.get("test_size", split.test_size);
  s.get("video_size", split.video_size);
  s.with("seed_filter", [&](const json& v, const std::string& where) {
    const auto name = Section::convert<std::string>(v, where);
    if (name == "standard") {
      split.seed_filter = data::CompositionTable::standard();
    } else if (name == "none") {
      split.seed_filter.reset();
    } else {
      throw ConfigError("'" + where + "' must be \"standard\" or \"none\"");
    }
  });
  s.finish();
}

void read_wm(const json& j, const std::string& path, model::TrainHyper& h) {
  Section s(j, path);
  s.get("lr", h.lr);
  s.get("batch_size", h.batch_size);
  s.get("epochs", h.epochs);
  s.get("init_scale", h.init_scale);
  s.get("weight_decay", h.weight_decay);
  s.finish();
  if (!(h.lr > 0.0) || h.batch_size == 0 || h.epochs < 0 || h.init_scale < 0.0 || h.weight_decay < 0.0) {
    throw ConfigError("'" + path + "': lr and batch_size must be positive, epochs, init_scale, weight_decay >= 0");
  }
}

void read_idm(const json& j, const std::string& path, model::IdmHyper& h, double& sparsity_weight) {
  Section s(j, path);
  s.get("lr", h.lr);
  s.get("batch_size", h.batch_size);
  s.get("epochs", h.epochs);
  s.get("gate_lr", h.gate_lr);
  s.get("gate_adam", h.gate_adam);
  s.get("gate_init", h.gate_init);
  s.get("sparsity_weight", sparsity_weight);
  s.finish();
  if (!(h.lr > 0.0) || !(h.gate_lr > 0.0) || h.batch_size == 0 || h.epochs < 0 || sparsity_weight < 0.0) {
    throw ConfigError("'" + path + "': lr, gate_lr, batch_size must be positive, epochs, sparsity_weight >= 0");
  }
}

void read_ensemble(const json& j, const std::string& path, model::EnsembleConfig& e) {
  Section s(j, path);
  s.get("members", e.members);
  s.get("bootstrap", e.bootstrap);
  s.get("distinct_seeds", e.distinct_seeds);
  s.get("init_scale", e.init_scale);
  s.finish();
  if (e.members < 2) throw ConfigError("'" + path + ".members' must be at least 2");
}

void read_explore(const json& j, const std::string& path, ExploreSection& e) {
  Section s(j, path);
  s.with("strategies", [&](const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ConfigError("'" + where + "' must be a non-empty array");
    e.strategies.clear();
    for (const auto& item : v) {
      const auto name = Section::convert<std::string>(item, where);
      const auto st = verify::parse_strategy(name);
      if (!st) throw ConfigError("'" + where + "': unknown strategy '" + name + "'");
      e.strategies.push_back(*st);
    }
  });
  s.get("seeds", e.seeds);
  s.get("rounds", e.rounds);
  s.get("budget", e.budget);
  s.get("K", e.K);
  s.get("env_mode", e.env_mode);
  s.get("subgoal_smoothing", e.subgoal_smoothing);
  s.with("distance", [&](const json& v, const std::string& where) {
    const auto name = Section::convert<std::string>(v, where);
    const auto d = verify::parse_distance(name);
    if (!d) throw ConfigError("'" + where + "': unknown distance '" + name + "'");
    e.distance = *d;
  });
  s.get("checkpoint_every_round", e.checkpoint_every_round);
  s.finish();
  if (e.seeds < 1 || e.rounds < 0 || e.K < 1) throw ConfigError("'" + path + "': seeds and K must be positive, rounds >= 0");
  if (e.subgoal_smoothing < 0.0 || e.subgoal_smoothing > 1.0) {
    throw ConfigError("'" + path + ".subgoal_smoothing' must be in [0, 1]");
  }
  if (e.env_mode) {
    for (auto st : e.strategies) {
      if (!(verify::is_wav(st) || st == verify::Strategy::Random)) {
        throw ConfigError("'" + path + "': env_mode supports only random, wav_sparse and wav_vanilla");
      }
    }
  }
}

void read_theory(const json& j, const std::string& path, TheorySection& t) {
  Section s(j, path);
  s.get("trials", t.trials);
  s.with("lemma_grid", [&](const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError("'" + where + "' must be an array");
    t.lemma_grid.clear();
    for (const auto& cell : v) {
      Section c(cell, where + "[]");
      int D = 0, n = 0;
      double nu = 1.0;
      c.get("D", D);
      c.get("n", n);
      c.get("nu", nu);
      c.finish();
      if (D < 1 || n <= D + 1 || nu < 0.0) throw ConfigError("'" + where + "': each cell needs D >= 1, n > D + 1, nu >= 0");
      t.lemma_grid.emplace_back(D, n, nu);
    }
  });
  s.with("gap_specs", [&](const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError("'" + where + "' must be an array");
    t.gap_specs.clear();
    for (const auto& cell : v) {
      Section c(cell, where + "[]");
      GapSpecConfig g;
      c.get("d_s", g.d_s);
      c.get("d_a", g.d_a);
      c.get("d_z", g.d_z);
      c.get("sigma_s", g.sigma_s);
      c.get("sigma_a", g.sigma_a);
      c.get("lambda", g.lambda);
      c.finish();
      if (g.d_s < 1 || g.d_a < 1 || g.d_z < 1 || g.d_z > g.d_s || g.d_a > g.d_s) {
        throw ConfigError("'" + where + "': need 1 <= d_z <= d_s and 1 <= d_a <= d_s");
      }
      if (!(g.sigma_s > 0.0) || !(g.sigma_a > 0.0) || !(g.lambda > 0.0)) {
        throw ConfigError("'" + where + "': sigma_s, sigma_a and lambda must be positive");
      }
      t.gap_specs.push_back(g);
    }
  });
  s.with("n_grid", [&](const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError("'" + where + "' must be an array");
    t.n_grid.clear();
    for (const auto& n : v) t.n_grid.push_back(Section::convert<int>(n, where));
  });
  s.get("matrix_seed", t.matrix_seed);
  s.finish();
  if (t.trials < 1) throw ConfigError("'" + path + ".trials' must be positive");
  for (const auto& g : t.gap_specs) {
    for (int n : t.n_grid) {
      if (n <= g.d_s + g.d_a + 1 || n <= 2 * g.d_z + 1) {
        throw ConfigError("'" + path + "': n = " + std::to_string(n) + " is too small for d_s = " +
                          std::to_string(g.d_s) + ", d_a = " + std::to_string(g.d_a) + ", d_z = " +
                          std::to_string(g.d_z) + " (needs n > d_s + d_a + 1 and n > 2 d_z + 1)");
      }
    }
  }
}

void read_tlcm(const json& j, const std::string& path, TlcmSection& t) {
  Section s(j, path);
  s.get("seed_size", t.seed_size);
  s.get("oos_size", t.oos_size);
  s.finish();
  if (t.seed_size == 0 || t.oos_size == 0) throw ConfigError("'" + path + "': sizes must be positive");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section s(j, "");
  s.get("seed", c.seed);
  s.with("data_dir", [&](const json& v, const std::string& where) {
    c.data_dir = std::filesystem::path(Section::convert<std::string>(v, where));
  });
  s.with("env", [&](const json& v, const std::string& w) { read_env(v, w, c.data.env); });
  s.with("source", [&](const json& v, const std::string& w) { read_source(v, w, c.data.source); });
  s.with("split", [&](const json& v, const std::string& w) { read_split(v, w, c.data.split); });
  s.with("world_model", [&](const json& v, const std::string& w) { read_wm(v, w, c.world_model); });
  s.with("idm", [&](const json& v, const std::string& w) { read_idm(v, w, c.idm, c.sparsity_weight); });
  s.with("ensemble", [&](const json& v, const std::string& w) { read_ensemble(v, w, c.ensemble); });
  s.with("explore", [&](const json& v, const std::string& w) { read_explore(v, w, c.explore); });
  s.with("theory", [&](const json& v, const std::string& w) { read_theory(v, w, c.theory); });
  s.with("tlcm", [&](const json& v, const std::string& w) { read_tlcm(v, w, c.tlcm); });
  s.finish();
  if (!c.data_dir) exp::validate(c.data);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  if (c.data_dir) j["data_dir"] = c.data_dir->generic_string();
  const auto& env = c.data.env;
  j["env"] = {{"width", env.shape.width},     {"height", env.shape.height},
              {"floor_palette", env.shape.floor_palette}, {"n_objects", env.n_objects},
              {"n_noisy_floors", env.n_noisy_floors},     {"horizon", env.horizon}};
  j["source"] = {{"task_transitions", c.data.source.task_transitions},
                 {"random_transitions", c.data.source.random_transitions},
                 {"epsilon", c.data.source.epsilon}};
  const auto& sp = c.data.split;
  j["split"] = {{"seed_size", sp.seed_size},
                {"pool_size", sp.pool_size},
                {"test_size", sp.test_size},
                {"video_size", sp.video_size},
                {"seed_filter", sp.seed_filter ? "standard" : "none"}};
  const auto& wm = c.world_model;
  j["world_model"] = {{"lr", wm.lr},
                      {"batch_size", wm.batch_size},
                      {"epochs", wm.epochs},
                      {"init_scale", wm.init_scale},
                      {"weight_decay", wm.weight_decay}};
  const auto& idm = c.idm;
  j["idm"] = {{"lr", idm.lr},           {"batch_size", idm.batch_size}, {"epochs", idm.epochs},
              {"gate_lr", idm.gate_lr}, {"gate_adam", idm.gate_adam},   {"gate_init", idm.gate_init},
              {"sparsity_weight", c.sparsity_weight}};
  j["ensemble"] = {{"members", c.ensemble.members},
                   {"bootstrap", c.ensemble.bootstrap},
                   {"distinct_seeds", c.ensemble.distinct_seeds},
                   {"init_scale", c.ensemble.init_scale}};
  const auto& e = c.explore;
  ordered_json strategies = ordered_json::array();
  for (auto s : e.strategies) strategies.push_back(std::string(verify::strategy_name(s)));
  j["explore"] = {{"strategies", strategies},
                  {"seeds", e.seeds},
                  {"rounds", e.rounds},
                  {"budget", e.budget},
                  {"K", e.K},
                  {"env_mode", e.env_mode},
                  {"subgoal_smoothing", e.subgoal_smoothing},
                  {"distance", std::string(verify::distance_name(e.distance))},
                  {"checkpoint_every_round", e.checkpoint_every_round}};
  ordered_json lemma = ordered_json::array();
  for (const auto& [D, n, nu] : c.theory.lemma_grid) lemma.push_back({{"D", D}, {"n", n}, {"nu", nu}});
  ordered_json gaps = ordered_json::array();
  for (const auto& g : c.theory.gap_specs) {
    gaps.push_back({{"d_s", g.d_s},
                    {"d_a", g.d_a},
                    {"d_z", g.d_z},
                    {"sigma_s", g.sigma_s},
                    {"sigma_a", g.sigma_a},
                    {"lambda", g.lambda}});
  }
  j["theory"] = {{"trials", c.theory.trials},
                 {"lemma_grid", lemma},
                 {"gap_specs", gaps},
                 {"n_grid", c.theory.n_grid},
                 {"matrix_seed", c.theory.matrix_seed}};
  j["tlcm"] = {{"seed_size", c.tlcm.seed_size}, {"oos_size", c.tlcm.oos_size}};
  return j.dump(2);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return s;
}

std::string run_id(const ExperimentConfig& config) { return hex64(fnv1a(to_json(config))); }

verify::ExplorationConfig exploration_config(const ExperimentConfig& c) {
  verify::ExplorationConfig e;
  e.rounds = c.explore.rounds;
  e.budget = c.explore.budget;
  e.K = c.explore.K;
  e.env_mode = c.explore.env_mode;
  e.env = c.data.env;
  e.wm_hyper = c.world_model;
  e.idm_hyper = c.idm;
  e.sparsity_weight = c.sparsity_weight;
  e.ensemble = c.ensemble;
  e.subgoal_smoothing = c.explore.subgoal_smoothing;
  e.distance = c.explore.distance;
  return e;
}

}  // namespace wav::runner
