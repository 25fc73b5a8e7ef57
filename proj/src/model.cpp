#include "spe/model.hpp"

#include "spe/errors.hpp"

namespace spe {

std::string to_string(ModelKind kind) { return kind == ModelKind::kSpe ? "spe" : "pn"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "spe") return ModelKind::kSpe;
  if (text == "pn") return ModelKind::kPn;
  throw ConfigError("unknown model kind '" + text + "' (expected spe or pn)");
}

void save_model(const std::filesystem::path& dir, const Model& model, const Manifest& extra) {
  if (model.transform.input_dim() != model.encoder.config.input_dim) {
    throw DimensionError("save_model: input transform and encoder disagree on input size");
  }
  Manifest m;
  m.set("model_kind", to_string(model.kind));
  model.transform.write(m);
  for (const auto& [k, v] : extra.entries()) m.set(k, v);
  save_encoder(dir, model.encoder, m);
}

Model load_model(const std::filesystem::path& dir) {
  auto loaded = load_encoder(dir);
  Model model;
  model.encoder = std::move(loaded.model);
  try {
    model.kind = parse_model_kind(loaded.manifest.get("model_kind"));
  } catch (const ConfigError& e) {
    throw IoError(std::string("model manifest: ") + e.what());
  }
  model.transform = InputTransform::read(loaded.manifest);
  if (model.transform.input_dim() != model.encoder.config.input_dim) {
    throw IoError("model manifest: input transform does not produce input_dim values");
  }
  return model;
}

}  // namespace spe
