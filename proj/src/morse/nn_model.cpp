#include "morse/nn_model.hpp"

#include <cmath>
#include <fstream>

#include "morse/error.hpp"
#include "morse/text.hpp"

namespace morse::nn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void shape_error(const std::string& what) {
  throw Error(ErrorKind::Validation, "ShapeMismatch", what);
}

std::optional<ConvGeometry> conv_geometry(const LayerSpec& l) {
  if (const auto* c = std::get_if<Conv2DSpec>(&l)) {
    return ConvGeometry{c->kh, c->kw, 1, 1, c->c_in, c->c_out};
  }
  if (const auto* p = std::get_if<LatentPoolSpec>(&l)) {
    return ConvGeometry{p->ph, p->pw, p->ph, p->pw, p->channels, p->channels};
  }
  return std::nullopt;
}

std::size_t fan_in(const LayerSpec& l) {
  if (auto g = conv_geometry(l)) return g->c_in * g->kh * g->kw;
  if (const auto* d = std::get_if<DenseSpec>(&l)) return d->n_in;
  return 0;
}

}  // namespace

std::string_view layer_name(const LayerSpec& l) {
  return std::visit(overloaded{[](const Conv2DSpec&) { return std::string_view("conv2d"); },
                               [](const MaxPoolSpec&) { return std::string_view("maxpool"); },
                               [](const LatentPoolSpec&) { return std::string_view("latentpool"); },
                               [](const GlobalPoolSpec&) { return std::string_view("globalpool"); },
                               [](const DenseSpec&) { return std::string_view("dense"); },
                               [](const DropoutSpec&) { return std::string_view("dropout"); },
                               [](const ReluSpec&) { return std::string_view("relu"); },
                               [](const SoftmaxSpec&) { return std::string_view("softmax"); }},
                    l);
}

std::size_t layer_weight_count(const LayerSpec& l) {
  if (auto g = conv_geometry(l)) return g->weight_count();
  if (const auto* d = std::get_if<DenseSpec>(&l)) return d->n_in * d->n_out;
  return 0;
}

std::size_t layer_bias_count(const LayerSpec& l) {
  if (auto g = conv_geometry(l)) return g->c_out;
  if (const auto* d = std::get_if<DenseSpec>(&l)) return d->n_out;
  return 0;
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::CnnMax: return "cnn-max";
    case Variant::CnnLp: return "cnn-lp";
    case Variant::Custom: return "custom";
  }
  return "custom";
}

Variant parse_variant(std::string_view s) {
  if (s == "cnn-max") return Variant::CnnMax;
  if (s == "cnn-lp") return Variant::CnnLp;
  if (s == "custom") return Variant::Custom;
  throw Error(ErrorKind::Usage, "UnknownModel", "unknown network variant '" + std::string(s) + "'");
}

ModelSpec make_spec(Variant v, GlobalPoolMode global_pool) {
  if (v == Variant::Custom) {
    throw Error(ErrorKind::Usage, "UnknownModel", "custom networks have no canonical layout");
  }
  const bool latent = v == Variant::CnnLp;
  auto pool = [latent](std::size_t pw, std::size_t channels) -> LayerSpec {
    if (latent) return LatentPoolSpec{1, pw, channels};
    return MaxPoolSpec{1, pw};
  };
  ModelSpec spec;
  spec.variant = v;
  spec.layers = {
      Conv2DSpec{1, 11, 1, 12}, ReluSpec{}, pool(4, 12), DropoutSpec{0.5},
      Conv2DSpec{1, 11, 12, 24}, ReluSpec{}, pool(2, 24), DropoutSpec{0.5},
      Conv2DSpec{kChannels, 11, 24, 32}, ReluSpec{}, GlobalPoolSpec{global_pool}, DropoutSpec{0.5},
      DenseSpec{32, kNumClasses}, SoftmaxSpec{},
  };
  return spec;
}

std::vector<Shape> shape_chain(const ModelSpec& spec) {
  std::vector<Shape> out;
  Shape cur = spec.input;
  cur.n = 1;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(layer_name(l)) + "): ";
    if (auto g = conv_geometry(l)) {
      if (g->kh == 0 || g->kw == 0 || g->c_out == 0) shape_error(where + "empty kernel");
      if (cur.c != g->c_in) {
        shape_error(where + "input has " + std::to_string(cur.c) + " channels, expected " +
                    std::to_string(g->c_in));
      }
      if (cur.h < g->kh || cur.w < g->kw) shape_error(where + "kernel larger than input");
      cur = g->output_shape(cur);
    } else if (const auto* p = std::get_if<MaxPoolSpec>(&l)) {
      if (p->ph == 0 || p->pw == 0 || cur.h < p->ph || cur.w < p->pw) {
        shape_error(where + "pool window larger than input");
      }
      cur = {cur.c, 1, cur.h / p->ph, cur.w / p->pw};
    } else if (std::holds_alternative<GlobalPoolSpec>(l)) {
      cur = {cur.c, 1, 1, 1};
    } else if (const auto* d = std::get_if<DenseSpec>(&l)) {
      if (cur.h != 1 || cur.w != 1 || cur.c != d->n_in) {
        shape_error(where + "expects " + std::to_string(d->n_in) + " flat inputs");
      }
      cur = {d->n_out, 1, 1, 1};
    } else if (const auto* dr = std::get_if<DropoutSpec>(&l)) {
      if (!(dr->p >= 0.0 && dr->p < 1.0)) shape_error(where + "dropout p must be in [0,1)");
    } else if (std::holds_alternative<SoftmaxSpec>(l)) {
      if (cur.h != 1 || cur.w != 1) shape_error(where + "softmax needs flat input");
    }
    out.push_back(cur);
  }
  return out;
}

ParamStore::ParamStore(const ModelSpec& spec) {
  std::size_t offset = 0;
  for (const auto& l : spec.layers) {
    ParamSlot s{offset, layer_weight_count(l), layer_bias_count(l)};
    offset += s.weights + s.biases;
    slots_.push_back(s);
  }
  values_.assign(offset, 0.0);
  grads_.assign(offset, 0.0);
}

Network::Network(ModelSpec spec)
    : spec_(std::move(spec)), shapes_(shape_chain(spec_)), params_(spec_) {}

void Network::init_he_uniform(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const std::size_t fan = fan_in(spec_.layers[i]);
    if (fan == 0) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan));
    for (double& w : params_.weights(i)) w = rng.uniform(-limit, limit);
    for (double& b : params_.biases(i)) b = 0.0;
  }
}

const Tensor& Network::forward(const Tensor& input, Workspace& ws, bool training, Rng* rng) const {
  const std::size_t n_layers = spec_.layers.size();
  Shape expect = spec_.input;
  expect.n = input.shape().n;
  if (input.shape() != expect) shape_error("network input shape mismatch");
  ws.acts.resize(n_layers + 1);
  ws.cols.resize(n_layers);
  ws.argmax.resize(n_layers);
  ws.masks.resize(n_layers);
  ws.acts[0] = input;
  auto values = params_.values();
  for (std::size_t i = 0; i < n_layers; ++i) {
    const LayerSpec& l = spec_.layers[i];
    const Tensor& x = ws.acts[i];
    Tensor& y = ws.acts[i + 1];
    const ParamSlot& slot = params_.slot(i);
    auto w = values.subspan(slot.offset, slot.weights);
    auto b = values.subspan(slot.offset + slot.weights, slot.biases);
    if (auto g = conv_geometry(l)) {
      conv2d_forward(x, w, b, *g, y, ws.cols[i]);
    } else if (const auto* p = std::get_if<MaxPoolSpec>(&l)) {
      maxpool_forward(x, p->ph, p->pw, y, ws.argmax[i]);
    } else if (const auto* gp = std::get_if<GlobalPoolSpec>(&l)) {
      global_pool_forward(x, gp->mode, y, ws.argmax[i]);
    } else if (const auto* d = std::get_if<DenseSpec>(&l)) {
      dense_forward(x, w, b, d->n_in, d->n_out, y);
    } else if (const auto* dr = std::get_if<DropoutSpec>(&l)) {
      dropout_forward(x, dr->p, training, rng, y, ws.masks[i]);
    } else if (std::holds_alternative<ReluSpec>(l)) {
      relu_forward(x, y);
    } else {
      softmax_forward(x, y);
    }
  }
  return ws.acts.back();
}

void Network::backward(Workspace& ws, const Tensor& grad, std::size_t from,
                       std::span<double> param_grads, Tensor* input_grad) const {
  if (from >= spec_.layers.size() || ws.acts.size() != spec_.layers.size() + 1) {
    shape_error("backward called without a matching forward pass");
  }
  if (param_grads.size() != params_.size()) shape_error("gradient buffer size");
  Tensor* g = &ws.grad_a;
  Tensor* next = &ws.grad_b;
  *g = grad;
  auto values = params_.values();
  for (std::size_t i = from + 1; i-- > 0;) {
    const LayerSpec& l = spec_.layers[i];
    const Tensor& x = ws.acts[i];
    const bool need_dx = i > 0 || input_grad != nullptr;
    const ParamSlot& slot = params_.slot(i);
    auto w = values.subspan(slot.offset, slot.weights);
    auto dw = param_grads.subspan(slot.offset, slot.weights);
    auto db = param_grads.subspan(slot.offset + slot.weights, slot.biases);
    if (auto geo = conv_geometry(l)) {
      conv2d_backward(x, w, *geo, *g, ws.cols[i], dw, db, need_dx ? next : nullptr);
    } else if (!need_dx) {
      if (const auto* d = std::get_if<DenseSpec>(&l)) {
        dense_backward(x, w, d->n_in, d->n_out, *g, dw, db, nullptr);
      }
      continue;
    } else if (std::holds_alternative<MaxPoolSpec>(l)) {
      maxpool_backward(*g, ws.argmax[i], x.shape(), *next);
    } else if (const auto* gp = std::get_if<GlobalPoolSpec>(&l)) {
      global_pool_backward(*g, gp->mode, x.shape(), ws.argmax[i], *next);
    } else if (const auto* d = std::get_if<DenseSpec>(&l)) {
      dense_backward(x, w, d->n_in, d->n_out, *g, dw, db, next);
    } else if (std::holds_alternative<DropoutSpec>(l)) {
      dropout_backward(*g, ws.masks[i], *next);
    } else if (std::holds_alternative<ReluSpec>(l)) {
      relu_backward(x, *g, *next);
    } else {
      softmax_backward(ws.acts[i + 1], *g, *next);
    }
    if (need_dx) std::swap(g, next);
  }
  if (input_grad != nullptr) *input_grad = *g;
}

Model::Model(ModelSpec spec, NormStats norm, std::uint64_t init_seed)
    : net_(std::move(spec)), norm_(norm), init_seed_(init_seed) {
  const auto& layers = net_.spec().layers;
  if (layers.empty() || !std::holds_alternative<SoftmaxSpec>(layers.back()) ||
      net_.shapes().back().c != kNumClasses) {
    shape_error("a classifier must end in a softmax over " + std::to_string(kNumClasses) +
                " classes");
  }
  net_.init_he_uniform(init_seed_);
}

Tensor pack_windows(std::span<const ImuWindow* const> windows) {
  Tensor t({1, windows.size(), kChannels, kWindowLength});
  auto d = t.data();
  for (std::size_t n = 0; n < windows.size(); ++n) {
    auto v = windows[n]->values();
    std::copy(v.begin(), v.end(), d.begin() + static_cast<std::ptrdiff_t>(n * kWindowValues));
  }
  return t;
}

std::array<double, kNumClasses> Model::probabilities(const ImuWindow& raw) const {
  return probabilities(std::span(&raw, 1), 1).front();
}

std::vector<std::array<double, kNumClasses>> Model::probabilities(std::span<const ImuWindow> raw,
                                                                  std::size_t batch_size) const {
  std::vector<std::array<double, kNumClasses>> out(raw.size());
  Workspace ws;
  std::vector<ImuWindow> normed;
  std::vector<const ImuWindow*> ptrs;
  for (std::size_t start = 0; start < raw.size(); start += batch_size) {
    const std::size_t end = std::min(raw.size(), start + batch_size);
    normed.clear();
    ptrs.clear();
    for (std::size_t i = start; i < end; ++i) normed.push_back(normalize(raw[i], norm_));
    for (const auto& w : normed) ptrs.push_back(&w);
    const Tensor& probs = net_.forward(pack_windows(ptrs), ws, false, nullptr);
    for (std::size_t i = start; i < end; ++i)
      for (std::size_t c = 0; c < kNumClasses; ++c) out[i][c] = probs.at(c, i - start, 0, 0);
  }
  return out;
}

void Model::round_to_storage_precision() {
  for (double& v : net_.params().values()) v = static_cast<double>(static_cast<float>(v));
}

Prediction decide(std::span<const double> probs, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw Error(ErrorKind::Usage, "InvalidThreshold", "threshold must be in [0,1)");
  }
  if (probs.size() != kNumClasses) shape_error("expected one probability per class");
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c)
    if (probs[c] > probs[best]) best = c;
  Prediction p{label_from_code(static_cast<int>(best)), probs[best]};
  if (p.label != GestureLabel::Random && p.confidence < threshold) p.label = GestureLabel::Random;
  return p;
}

Prediction predict(const Model& model, const ImuWindow& raw, double threshold) {
  const auto probs = model.probabilities(raw);
  return decide(probs, threshold);
}

ActivationDump dump_activations(const Model& model, const ImuWindow& raw, std::size_t layer,
                                std::size_t row) {
  const auto& net = model.network();
  if (layer >= net.spec().layers.size()) {
    throw Error(ErrorKind::Validation, "InvalidLayer",
                "layer index " + std::to_string(layer) + " out of range");
  }
  const ImuWindow normed = normalize(raw, model.norm());
  const ImuWindow* ptr = &normed;
  Workspace ws;
  net.forward(pack_windows(std::span(&ptr, 1)), ws, false, nullptr);
  const Tensor& act = ws.acts[layer + 1];
  const Shape s = act.shape();
  if (row >= s.h) {
    throw Error(ErrorKind::Validation, "InvalidLayer",
                "row " + std::to_string(row) + " out of range for layer height " +
                    std::to_string(s.h));
  }
  ActivationDump dump;
  dump.layer = layer;
  dump.layer_name = std::string(layer_name(net.spec().layers[layer]));
  dump.shape = {s.c, 1, s.h, s.w};
  dump.row = row;
  for (std::size_t c = 0; c < s.c; ++c) {
    std::vector<double> series(s.w);
    for (std::size_t t = 0; t < s.w; ++t) series[t] = act.at(c, 0, row, t);
    dump.series.push_back(std::move(series));
  }
  return dump;
}

void save_activation_csv(const std::filesystem::path& path, const ActivationDump& dump) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "IoError", "cannot open " + path.string() + " for writing");
  os << "channel";
  char buf[16];
  for (std::size_t t = 0; t < dump.shape.w; ++t) {
    std::snprintf(buf, sizeof buf, ",t%03zu", t);
    os << buf;
  }
  os << '\n';
  for (std::size_t c = 0; c < dump.series.size(); ++c) {
    os << c;
    for (double v : dump.series[c]) os << ',' << text::format_double(v);
    os << '\n';
  }
  if (!os) throw Error(ErrorKind::Io, "IoError", "write failed: " + path.string());
}

}  // namespace morse::nn
