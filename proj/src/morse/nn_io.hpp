#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "morse/nn_model.hpp"

namespace morse::nn {

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[] = "MRSE1\n";  // 6 bytes on disk, no terminator

/// Layout: magic, u32 little-endian header length, UTF-8 JSON header, then
/// every layer's float32 weights followed by its float32 biases, in layer
/// order. Conv weights are [c_out][c_in][kh][kw], dense [n_out][n_in].
void write_model(std::ostream& os, const Model& model);
void save_model(const std::filesystem::path& path, const Model& model);

/// Throws Format/BadMagic, Format/UnsupportedVersion, Format/ParseError or
/// Format/SchemaMismatch.
Model read_model(std::istream& is);
Model load_model(const std::filesystem::path& path);

/// True when the file starts with the model magic.
bool is_model_file(const std::filesystem::path& path);

nlohmann::json layer_to_json(const LayerSpec& l, const Shape& output);
LayerSpec layer_from_json(const nlohmann::json& j);

}  // namespace morse::nn
