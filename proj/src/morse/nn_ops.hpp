#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "morse/rng.hpp"

namespace morse::nn {

/// Row-major 4-D shape laid out as (channels, batch, height, width). Keeping
/// channels outermost lets every convolution run as one GEMM over the batch.
struct Shape {
  std::size_t c = 1, n = 1, h = 1, w = 1;
  std::size_t size() const { return c * n * h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}

  const Shape& shape() const { return shape_; }
  /// Reuses the allocation when possible; contents are unspecified.
  void reshape(Shape s) {
    shape_ = s;
    data_.resize(s.size());
  }
  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  double& at(std::size_t c, std::size_t n, std::size_t h, std::size_t w) {
    return data_[((c * shape_.n + n) * shape_.h + h) * shape_.w + w];
  }
  double at(std::size_t c, std::size_t n, std::size_t h, std::size_t w) const {
    return data_[((c * shape_.n + n) * shape_.h + h) * shape_.w + w];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::size_t size() const { return data_.size(); }

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct ConvGeometry {
  std::size_t kh = 1, kw = 1;
  std::size_t sh = 1, sw = 1;
  std::size_t c_in = 1, c_out = 1;

  Shape output_shape(const Shape& in) const;  // throws ShapeMismatch
  std::size_t weight_count() const { return c_out * c_in * kh * kw; }
};

/// y[o][i][j] = b[o] + sum_c sum_u sum_v x[c][i*sh+u][j*sw+v] * W[o][c][u][v]
/// (valid padding, tail rows/columns that do not fill a stride are dropped).
/// The batch is processed in sample chunks; `cols` is im2col scratch space.
void conv2d_forward(const Tensor& x, std::span<const double> weights, std::span<const double> bias,
                    const ConvGeometry& g, Tensor& y, std::vector<double>& cols);

/// Accumulates dW and db; writes dx when non-null. Rebuilds the im2col
/// chunks in `cols` rather than keeping the whole batch from the forward pass.
void conv2d_backward(const Tensor& x, std::span<const double> weights, const ConvGeometry& g,
                     const Tensor& dy, std::vector<double>& cols, std::span<double> dweights,
                     std::span<double> dbias, Tensor* dx);

/// Non-overlapping max over (ph, pw) windows; ties go to the first element in
/// row-major order. `argmax` stores the flat input index of each output.
void maxpool_forward(const Tensor& x, std::size_t ph, std::size_t pw, Tensor& y,
                     std::vector<std::size_t>& argmax);
void maxpool_backward(const Tensor& dy, const std::vector<std::size_t>& argmax, const Shape& in,
                      Tensor& dx);

enum class GlobalPoolMode { Average, Max };

void global_pool_forward(const Tensor& x, GlobalPoolMode mode, Tensor& y,
                         std::vector<std::size_t>& argmax);
void global_pool_backward(const Tensor& dy, GlobalPoolMode mode, const Shape& in,
                          const std::vector<std::size_t>& argmax, Tensor& dx);

/// x viewed as (n_in x batch); weights [n_out][n_in].
void dense_forward(const Tensor& x, std::span<const double> weights, std::span<const double> bias,
                   std::size_t n_in, std::size_t n_out, Tensor& y);
void dense_backward(const Tensor& x, std::span<const double> weights, std::size_t n_in,
                    std::size_t n_out, const Tensor& dy, std::span<double> dweights,
                    std::span<double> dbias, Tensor* dx);

void relu_forward(const Tensor& x, Tensor& y);
void relu_backward(const Tensor& x, const Tensor& dy, Tensor& dx);

/// Inverted dropout: in training, surviving units are scaled by 1/(1-p).
/// In evaluation it is the identity and `mask` is cleared.
void dropout_forward(const Tensor& x, double p, bool training, Rng* rng, Tensor& y,
                     std::vector<double>& mask);
void dropout_backward(const Tensor& dy, const std::vector<double>& mask, Tensor& dx);

/// Softmax over the channel axis for every batch column (h = w = 1).
void softmax_forward(const Tensor& x, Tensor& y);
void softmax_backward(const Tensor& y, const Tensor& dy, Tensor& dx);

/// Mean cross-entropy of softmax(logits) against integer labels. Writes the
/// probabilities and d(loss)/d(logits) = (p - onehot) / batch.
double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor& probs,
                             Tensor& dlogits);

}  // namespace morse::nn
