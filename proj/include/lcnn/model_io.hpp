#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "lcnn/network.hpp"
#include "lcnn/training.hpp"

namespace lcnn {

/// A network plus the scaler it was trained with.
struct StoredModel {
  Network net;
  std::optional<ScalerParams> scaler;
};

inline constexpr const char* kModelFormat = "lcnn-model";
inline constexpr int kModelVersion = 1;

/// JSON text with a format/version header, one object per layer (kind, dims,
/// row-major weights, bias) and the optional scaler. Doubles are written in
/// shortest round-trip form, so save/load is bit-exact.
std::string model_to_json(const StoredModel& m);
StoredModel model_from_json(const std::string& text);

void save_model(const std::filesystem::path& path, const StoredModel& m);
StoredModel load_model(const std::filesystem::path& path);

}  // namespace lcnn
