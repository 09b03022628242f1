#include "wav/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace wav::model {

using nlohmann::json;

namespace {

json shape_json(const grid::GridShape& s) {
  return {{"width", s.width}, {"height", s.height}, {"floor_palette", s.floor_palette}};
}

grid::GridShape shape_from(const json& j) {
  grid::GridShape s{j.at("width").get<int>(), j.at("height").get<int>(), j.at("floor_palette").get<int>()};
  s.validate();
  return s;
}

json wm_json(const WorldModel& wm) {
  return {{"kind", "world_model"},
          {"shape", shape_json(wm.layout().shape())},
          {"hyper",
           {{"lr", wm.hyper.lr},
            {"batch_size", wm.hyper.batch_size},
            {"epochs", wm.hyper.epochs},
            {"init_scale", wm.hyper.init_scale},
            {"weight_decay", wm.hyper.weight_decay}}},
          {"seed", wm.seed},
          {"loss_curve", wm.loss_curve},
          {"params", wm.params()}};
}

WorldModel wm_from(const json& j) {
  if (j.at("kind") != "world_model") throw std::runtime_error("not a world model checkpoint");
  WorldModel wm(grid::FeatureLayout(shape_from(j.at("shape"))));
  const json& h = j.at("hyper");
  wm.hyper.lr = h.at("lr").get<double>();
  wm.hyper.batch_size = h.at("batch_size").get<std::size_t>();
  wm.hyper.epochs = h.at("epochs").get<int>();
  wm.hyper.init_scale = h.at("init_scale").get<double>();
  wm.hyper.weight_decay = h.at("weight_decay").get<double>();
  wm.seed = j.at("seed").get<std::uint64_t>();
  wm.loss_curve = j.at("loss_curve").get<std::vector<double>>();
  auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != wm.param_count()) throw std::runtime_error("parameter count does not match the grid shape");
  wm.params() = std::move(params);
  return wm;
}

template <class Fn>
auto parse_checked(const std::string& text, const std::string& origin, Fn&& fn) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(origin, 1, std::string("malformed checkpoint: ") + e.what());
  }
  const auto schema = j.value("schema", std::string());
  if (schema != kModelSchema) {
    throw UnsupportedSchema(origin, 1, "unsupported checkpoint schema '" + schema + "' (expected " + kModelSchema + ")");
  }
  try {
    return fn(j);
  } catch (const json::exception& e) {
    throw ParseError(origin, 1, std::string("bad checkpoint field: ") + e.what());
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const ParseError*>(&e)) throw;
    throw ParseError(origin, 1, e.what());
  }
}

}  // namespace

std::string serialize(const WorldModel& wm) {
  json j = wm_json(wm);
  j["schema"] = kModelSchema;
  return j.dump() + "\n";
}

std::string serialize(const IdmParams& idm) {
  json j = {{"schema", kModelSchema},
            {"kind", "inverse_model"},
            {"shape", shape_json(idm.features.layout().shape())},
            {"frozen_mask", idm.frozen_mask},
            {"sparsity_weight", idm.sparsity_weight},
            {"hyper",
             {{"lr", idm.hyper.lr},
              {"batch_size", idm.hyper.batch_size},
              {"epochs", idm.hyper.epochs},
              {"gate_lr", idm.hyper.gate_lr},
              {"gate_adam", idm.hyper.gate_adam},
              {"gate_init", idm.hyper.gate_init}}},
            {"seed", idm.seed},
            {"loss_curve", idm.loss_curve},
            {"gate_logits", idm.gate_logits},
            {"weights", idm.weights},
            {"bias", idm.bias}};
  return j.dump() + "\n";
}

std::string serialize(const Ensemble& ens) {
  json members = json::array();
  for (const auto& m : ens.members) members.push_back(wm_json(m));
  json j = {{"schema", kModelSchema}, {"kind", "ensemble"}, {"members", members}};
  return j.dump() + "\n";
}

WorldModel parse_world_model(const std::string& text, const std::string& origin) {
  return parse_checked(text, origin, [](const json& j) { return wm_from(j); });
}

IdmParams parse_idm(const std::string& text, const std::string& origin) {
  return parse_checked(text, origin, [](const json& j) {
    if (j.at("kind") != "inverse_model") throw std::runtime_error("not an inverse model checkpoint");
    const json& h = j.at("hyper");
    IdmParams p(grid::FeatureLayout(shape_from(j.at("shape"))), j.at("frozen_mask").get<bool>(),
                h.at("gate_init").get<double>());
    p.sparsity_weight = j.at("sparsity_weight").get<double>();
    p.hyper.lr = h.at("lr").get<double>();
    p.hyper.batch_size = h.at("batch_size").get<std::size_t>();
    p.hyper.epochs = h.at("epochs").get<int>();
    p.hyper.gate_lr = h.at("gate_lr").get<double>();
    p.hyper.gate_adam = h.at("gate_adam").get<bool>();
    p.hyper.gate_init = h.at("gate_init").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.loss_curve = j.at("loss_curve").get<std::vector<double>>();
    auto gates = j.at("gate_logits").get<std::vector<double>>();
    auto weights = j.at("weights").get<std::vector<double>>();
    if (gates.size() != p.gate_logits.size() || weights.size() != p.weights.size()) {
      throw std::runtime_error("inverse model dimensions do not match the grid shape");
    }
    p.gate_logits = std::move(gates);
    p.weights = std::move(weights);
    p.bias = j.at("bias").get<std::array<double, grid::kNumActions>>();
    return p;
  });
}

Ensemble parse_ensemble(const std::string& text, const std::string& origin) {
  return parse_checked(text, origin, [](const json& j) {
    if (j.at("kind") != "ensemble") throw std::runtime_error("not an ensemble checkpoint");
    Ensemble ens;
    for (const auto& m : j.at("members")) ens.members.push_back(wm_from(m));
    if (ens.members.size() < 2) throw std::runtime_error("ensemble checkpoint has fewer than 2 members");
    return ens;
  });
}

void save_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string load_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace wav::model
