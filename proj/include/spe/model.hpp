#pragma once

// A trained model: the encoder, the input transform it was trained with, and
// whether it classifies as an SPE or as a PN.

#include <filesystem>
#include <string>

#include "spe/dataset.hpp"
#include "spe/encoder.hpp"
#include "spe/manifest.hpp"

namespace spe {

enum class ModelKind { kSpe, kPn };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct Model {
  EncoderModel encoder;
  InputTransform transform;
  ModelKind kind = ModelKind::kSpe;
};

/// save_encoder plus model_kind and input.* keys (and any extra entries).
void save_model(const std::filesystem::path& dir, const Model& model, const Manifest& extra = {});
Model load_model(const std::filesystem::path& dir);

}  // namespace spe
