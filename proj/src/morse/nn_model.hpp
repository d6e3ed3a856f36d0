#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "morse/core.hpp"
#include "morse/nn_ops.hpp"

namespace morse::nn {

struct Conv2DSpec {
  std::size_t kh, kw, c_in, c_out;
};
struct MaxPoolSpec {
  std::size_t ph, pw;
};
/// Learned pooling: a strided convolution whose kernel and stride both equal
/// the pool window, mapping `channels` to `channels`, with bias.
struct LatentPoolSpec {
  std::size_t ph, pw, channels;
};
struct GlobalPoolSpec {
  GlobalPoolMode mode = GlobalPoolMode::Average;
};
struct DenseSpec {
  std::size_t n_in, n_out;
};
struct DropoutSpec {
  double p;
};
struct ReluSpec {};
struct SoftmaxSpec {};

using LayerSpec = std::variant<Conv2DSpec, MaxPoolSpec, LatentPoolSpec, GlobalPoolSpec, DenseSpec,
                               DropoutSpec, ReluSpec, SoftmaxSpec>;

std::string_view layer_name(const LayerSpec& l);
std::size_t layer_weight_count(const LayerSpec& l);
std::size_t layer_bias_count(const LayerSpec& l);
inline std::size_t layer_param_count(const LayerSpec& l) {
  return layer_weight_count(l) + layer_bias_count(l);
}

enum class Variant { CnnMax, CnnLp, Custom };
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

struct ModelSpec {
  Shape input{1, 1, kChannels, kWindowLength};  // one sample; n is ignored
  std::vector<LayerSpec> layers;
  Variant variant = Variant::Custom;
};

/// Three conv blocks and a dense softmax head; the cnn-lp variant swaps both
/// max pools for latent pools.
ModelSpec make_spec(Variant v, GlobalPoolMode global_pool = GlobalPoolMode::Average);

/// Per-sample output shape of every layer. Throws Validation/ShapeMismatch.
std::vector<Shape> shape_chain(const ModelSpec& spec);

struct ParamSlot {
  std::size_t offset = 0;
  std::size_t weights = 0;
  std::size_t biases = 0;
};

/// Flat parameter and gradient arrays. Each layer owns one contiguous slot:
/// weights ([c_out][c_in][kh][kw] or [n_out][n_in]) followed by biases.
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(const ModelSpec& spec);

  std::size_t size() const { return values_.size(); }
  const ParamSlot& slot(std::size_t layer) const { return slots_.at(layer); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> grads() { return grads_; }
  std::span<const double> grads() const { return grads_; }

  std::span<double> weights(std::size_t layer) {
    return values().subspan(slots_[layer].offset, slots_[layer].weights);
  }
  std::span<double> biases(std::size_t layer) {
    return values().subspan(slots_[layer].offset + slots_[layer].weights, slots_[layer].biases);
  }

  void zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

 private:
  std::vector<ParamSlot> slots_;
  std::vector<double> values_;
  std::vector<double> grads_;
};

/// Scratch buffers of one forward/backward pass. acts[0] is the input and
/// acts[i + 1] the output of layer i.
struct Workspace {
  std::vector<Tensor> acts;
  std::vector<std::vector<double>> cols;
  std::vector<std::vector<std::size_t>> argmax;
  std::vector<std::vector<double>> masks;
  Tensor grad_a;
  Tensor grad_b;
};

class Network {
 public:
  explicit Network(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<Shape>& shapes() const { return shapes_; }
  std::size_t param_count() const { return params_.size(); }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// He-uniform weights, U(-sqrt(6/fan_in), +sqrt(6/fan_in)); zero biases.
  void init_he_uniform(std::uint64_t seed);

  /// `input` has shape (c, batch, h, w). Returns the last activation.
  /// Evaluation mode is read-only on the network and deterministic.
  const Tensor& forward(const Tensor& input, Workspace& ws, bool training, Rng* rng) const;

  /// Back-propagates `grad` (d loss / d output of layer `from`) through
  /// layers from..0, accumulating into `param_grads` (full flat size). Uses
  /// the activations left in `ws` by forward.
  void backward(Workspace& ws, const Tensor& grad, std::size_t from,
                std::span<double> param_grads, Tensor* input_grad = nullptr) const;

 private:
  ModelSpec spec_;
  std::vector<Shape> shapes_;
  ParamStore params_;
};

/// A network plus everything needed to run it on raw sensor windows.
class Model {
 public:
  Model(ModelSpec spec, NormStats norm, std::uint64_t init_seed);

  Network& network() { return net_; }
  const Network& network() const { return net_; }
  const NormStats& norm() const { return norm_; }
  void set_norm(const NormStats& n) { norm_ = n; }
  std::uint64_t init_seed() const { return init_seed_; }
  std::size_t param_count() const { return net_.param_count(); }

  nlohmann::json& training_summary() { return summary_; }
  const nlohmann::json& training_summary() const { return summary_; }

  /// Normalizes with the stored statistics, then runs eval-mode forward.
  std::array<double, kNumClasses> probabilities(const ImuWindow& raw) const;
  std::vector<std::array<double, kNumClasses>> probabilities(
      std::span<const ImuWindow> raw, std::size_t batch_size = 64) const;

  /// Rounds every parameter to the nearest float so the in-memory model is
  /// exactly what the 32-bit model file stores.
  void round_to_storage_precision();

 private:
  Network net_;
  NormStats norm_;
  std::uint64_t init_seed_;
  nlohmann::json summary_ = nlohmann::json::object();
};

/// Packs already-normalized windows into a (1, batch, 6, 250) tensor.
Tensor pack_windows(std::span<const ImuWindow* const> windows);

struct Prediction {
  GestureLabel label = GestureLabel::Random;
  double confidence = 0.0;
};

/// Argmax with ties to the smallest label code. A non-Random winner whose
/// confidence is below `threshold` falls back to Random.
Prediction decide(std::span<const double> probs, double threshold = 0.0);
Prediction predict(const Model& model, const ImuWindow& raw, double threshold = 0.0);

struct ActivationDump {
  std::size_t layer = 0;
  std::string layer_name;
  Shape shape;                              // per-sample output shape
  std::size_t row = 0;                      // selected height index
  std::vector<std::vector<double>> series;  // one per output channel
};

/// Output of `layer` for one window, restricted to height index `row`
/// (0 = accelerometer x while the sensor axis is still separate).
ActivationDump dump_activations(const Model& model, const ImuWindow& raw, std::size_t layer,
                                std::size_t row = 0);
/// channel,t000,t001,... one row per output channel.
void save_activation_csv(const std::filesystem::path& path, const ActivationDump& dump);

}  // namespace morse::nn
