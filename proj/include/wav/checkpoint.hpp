#pragma once

#include <filesystem>
#include <string>

#include "wav/ensemble.hpp"
#include "wav/inverse_model.hpp"

namespace wav::model {

inline constexpr const char* kModelSchema = "wav-model/1";

// JSON checkpoints. Weights are written with shortest round-trip decimal
// formatting, so load(save(m)) predicts bit-identically.

std::string serialize(const WorldModel& wm);
std::string serialize(const IdmParams& idm);
std::string serialize(const Ensemble& ens);

WorldModel parse_world_model(const std::string& text, const std::string& origin = "<memory>");
IdmParams parse_idm(const std::string& text, const std::string& origin = "<memory>");
Ensemble parse_ensemble(const std::string& text, const std::string& origin = "<memory>");

void save_text(const std::filesystem::path& path, const std::string& text);
std::string load_text(const std::filesystem::path& path);

}  // namespace wav::model
