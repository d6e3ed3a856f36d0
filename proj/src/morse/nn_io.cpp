#include "morse/nn_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "morse/error.hpp"

namespace morse::nn {

namespace {

constexpr std::size_t kMagicSize = 6;

[[noreturn]] void format_error(const std::string& code, const std::string& what) {
  throw Error(ErrorKind::Format, code, what);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) format_error("ParseError", "truncated model file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string_view pool_mode_name(GlobalPoolMode m) {
  return m == GlobalPoolMode::Average ? "avg" : "max";
}

}  // namespace

nlohmann::json layer_to_json(const LayerSpec& l, const Shape& out) {
  nlohmann::ordered_json j;
  j["type"] = layer_name(l);
  if (const auto* c = std::get_if<Conv2DSpec>(&l)) {
    j["kh"] = c->kh;
    j["kw"] = c->kw;
    j["c_in"] = c->c_in;
    j["c_out"] = c->c_out;
  } else if (const auto* p = std::get_if<MaxPoolSpec>(&l)) {
    j["ph"] = p->ph;
    j["pw"] = p->pw;
  } else if (const auto* lp = std::get_if<LatentPoolSpec>(&l)) {
    j["ph"] = lp->ph;
    j["pw"] = lp->pw;
    j["channels"] = lp->channels;
  } else if (const auto* g = std::get_if<GlobalPoolSpec>(&l)) {
    j["mode"] = pool_mode_name(g->mode);
  } else if (const auto* d = std::get_if<DenseSpec>(&l)) {
    j["n_in"] = d->n_in;
    j["n_out"] = d->n_out;
  } else if (const auto* dr = std::get_if<DropoutSpec>(&l)) {
    j["p"] = dr->p;
  }
  j["output_shape"] = {out.c, out.h, out.w};
  j["params"] = layer_param_count(l);
  return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  auto sz = [&](const char* key) { return j.at(key).get<std::size_t>(); };
  if (type == "conv2d") return Conv2DSpec{sz("kh"), sz("kw"), sz("c_in"), sz("c_out")};
  if (type == "maxpool") return MaxPoolSpec{sz("ph"), sz("pw")};
  if (type == "latentpool") return LatentPoolSpec{sz("ph"), sz("pw"), sz("channels")};
  if (type == "globalpool") {
    const std::string mode = j.value("mode", std::string("avg"));
    if (mode != "avg" && mode != "max") format_error("SchemaMismatch", "unknown pool mode " + mode);
    return GlobalPoolSpec{mode == "avg" ? GlobalPoolMode::Average : GlobalPoolMode::Max};
  }
  if (type == "dense") return DenseSpec{sz("n_in"), sz("n_out")};
  if (type == "dropout") return DropoutSpec{j.at("p").get<double>()};
  if (type == "relu") return ReluSpec{};
  if (type == "softmax") return SoftmaxSpec{};
  format_error("SchemaMismatch", "unknown layer type '" + type + "'");
}

void write_model(std::ostream& os, const Model& model) {
  const Network& net = model.network();
  nlohmann::ordered_json header;
  header["format_version"] = kModelFormatVersion;
  header["variant"] = to_string(net.spec().variant);
  header["input_shape"] = {net.spec().input.c, net.spec().input.h, net.spec().input.w};
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < net.spec().layers.size(); ++i) {
    layers.push_back(layer_to_json(net.spec().layers[i], net.shapes()[i]));
  }
  header["layers"] = layers;
  nlohmann::json labels = nlohmann::json::array();
  for (GestureLabel g : kAllGestures) labels.push_back(to_string(g));
  header["label_map"] = labels;
  header["norm_stats"] = {{"mean", model.norm().mean}, {"std", model.norm().std}};
  header["init_seed"] = model.init_seed();
  header["param_count"] = net.param_count();
  header["training_summary"] = model.training_summary();

  const std::string json = header.dump();
  os.write(kModelMagic, kMagicSize);
  put_u32(os, static_cast<std::uint32_t>(json.size()));
  os.write(json.data(), static_cast<std::streamsize>(json.size()));
  for (double v : net.params().values()) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "IoError", "cannot open " + path.string() + " for writing");
  write_model(os, model);
  if (!os) throw Error(ErrorKind::Io, "IoError", "write failed: " + path.string());
}

Model read_model(std::istream& is) {
  char magic[kMagicSize];
  if (!is.read(magic, kMagicSize) || std::memcmp(magic, kModelMagic, kMagicSize) != 0) {
    format_error("BadMagic", "not a model file");
  }
  const std::uint32_t len = get_u32(is);
  std::string json(len, '\0');
  if (!is.read(json.data(), len)) format_error("ParseError", "truncated model header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    format_error("ParseError", std::string("model header: ") + e.what());
  }
  try {
    const auto version = header.at("format_version").get<std::uint32_t>();
    if (version != kModelFormatVersion) {
      format_error("UnsupportedVersion", "unsupported model format_version " + std::to_string(version));
    }
    ModelSpec spec;
    spec.variant = parse_variant(header.at("variant").get<std::string>());
    const auto in = header.at("input_shape").get<std::vector<std::size_t>>();
    if (in.size() != 3) format_error("SchemaMismatch", "input_shape needs 3 entries");
    spec.input = {in[0], 1, in[1], in[2]};
    for (const auto& l : header.at("layers")) spec.layers.push_back(layer_from_json(l));

    const auto labels = header.at("label_map").get<std::vector<std::string>>();
    if (labels.size() != kNumClasses) format_error("SchemaMismatch", "label_map size");
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      if (labels[i] != to_string(kAllGestures[i])) format_error("SchemaMismatch", "label_map order");
    }
    NormStats norm;
    norm.mean = header.at("norm_stats").at("mean").get<std::array<double, kChannels>>();
    norm.std = header.at("norm_stats").at("std").get<std::array<double, kChannels>>();

    Model model(std::move(spec), norm, header.at("init_seed").get<std::uint64_t>());
    if (header.contains("training_summary")) model.training_summary() = header["training_summary"];
    auto values = model.network().params().values();
    if (header.at("param_count").get<std::size_t>() != values.size()) {
      format_error("SchemaMismatch", "param_count does not match the layer list");
    }
    for (double& v : values) v = static_cast<double>(std::bit_cast<float>(get_u32(is)));
    if (is.peek() != std::char_traits<char>::eof()) {
      format_error("SchemaMismatch", "trailing bytes after parameter block");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    format_error("SchemaMismatch", std::string("model header: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) throw;
    format_error("SchemaMismatch", e.what());
  }
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "IoError", "cannot open " + path.string());
  return read_model(is);
}

bool is_model_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  char magic[kMagicSize];
  return is.read(magic, kMagicSize) && std::memcmp(magic, kModelMagic, kMagicSize) == 0;
}

}  // namespace morse::nn
