#include "lcnn/model_io.hpp"

#include <json.hpp>

#include "lcnn/io.hpp"

namespace lcnn {

using nlohmann::json;

std::string model_to_json(const StoredModel& m) {
  m.net.validate();
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["clip"] = m.net.clip;
  json layers = json::array();
  for (const Layer& l : m.net.layers) {
    layers.push_back({{"kind", std::string(to_string(l.kind))},
                      {"in_dim", l.weight.cols()},
                      {"out_dim", l.weight.rows()},
                      {"weight", l.weight.data()},
                      {"bias", l.bias}});
  }
  j["layers"] = std::move(layers);
  if (m.scaler) {
    j["scaler"] = {{"in_mean", m.scaler->in_mean},
                   {"in_std", m.scaler->in_std},
                   {"out_mean", m.scaler->out_mean},
                   {"out_std", m.scaler->out_std}};
  }
  return j.dump(1) + "\n";
}

StoredModel model_from_json(const std::string& text) {
  StoredModel m;
  try {
    const json j = json::parse(text);
    if (j.value("format", std::string()) != kModelFormat)
      throw ValidationError("model file: not an lcnn-model document");
    const int version = j.value("version", 0);
    if (version != kModelVersion)
      throw ValidationError("model file: unsupported version " + std::to_string(version));
    m.net.clip = j.value("clip", 1.0);
    for (const json& l : j.at("layers")) {
      const auto in = l.at("in_dim").get<std::size_t>();
      const auto out = l.at("out_dim").get<std::size_t>();
      auto w = l.at("weight").get<std::vector<double>>();
      if (w.size() != in * out)
        throw ValidationError("model file: weight size does not match its dimensions");
      m.net.layers.push_back({layer_kind_from_string(l.at("kind").get<std::string>()),
                              Matrix(out, in, std::move(w)),
                              l.at("bias").get<std::vector<double>>()});
    }
    if (j.contains("scaler")) {
      const json& s = j["scaler"];
      m.scaler = ScalerParams{s.at("in_mean").get<Vector>(), s.at("in_std").get<Vector>(),
                              s.at("out_mean").get<Vector>(), s.at("out_std").get<Vector>()};
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model file: ") + e.what());
  }
  m.net.validate();
  if (m.scaler && (m.scaler->in_mean.size() != m.net.input_dim() ||
                   m.scaler->out_mean.size() != m.net.output_dim()))
    throw ValidationError("model file: scaler dimensions do not match the network");
  return m;
}

void save_model(const std::filesystem::path& path, const StoredModel& m) {
  io::write_file_atomic(path, model_to_json(m));
}

StoredModel load_model(const std::filesystem::path& path) {
  return model_from_json(io::read_file(path));
}

}  // namespace lcnn
