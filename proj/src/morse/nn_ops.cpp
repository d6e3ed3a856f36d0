#include "morse/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "morse/error.hpp"

namespace morse::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

[[noreturn]] void shape_error(const std::string& what) {
  throw Error(ErrorKind::Validation, "ShapeMismatch", what);
}

void require(bool cond, const char* what) {
  if (!cond) shape_error(what);
}

// y (+)= a * b. Eigen evaluates tiny products (and inner products) with a
// vectorized loop whose scalar peel depends on pointer alignment, so the last
// bit would vary with heap placement. Those sizes get a fixed-order loop; the
// blocked GEMM/GEMV kernels used otherwise do not depend on alignment.
template <typename Dst, typename A, typename B>
void multiply(Dst&& y, const A& a, const B& b, bool accumulate) {
  const Eigen::Index depth = a.cols();
  if (depth + y.rows() + y.cols() < EIGEN_GEMM_TO_COEFFBASED_THRESHOLD ||
      (y.rows() == 1 && y.cols() == 1)) {
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < depth; ++k) acc += a(i, k) * b(k, j);
        y(i, j) = accumulate ? y(i, j) + acc : acc;
      }
  } else if (accumulate) {
    y.noalias() += a * b;
  } else {
    y.noalias() = a * b;
  }
}

template <typename Row>
double row_sum(const Row& r) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < r.size(); ++j) acc += r(j);
  return acc;
}

}  // namespace

Shape ConvGeometry::output_shape(const Shape& in) const {
  if (in.c != c_in) shape_error("conv input has " + std::to_string(in.c) + " channels, expected " +
                                std::to_string(c_in));
  if (in.h < kh || in.w < kw) shape_error("conv kernel larger than input");
  return {c_out, in.n, (in.h - kh) / sh + 1, (in.w - kw) / sw + 1};
}

namespace {

// Columns of one sample chunk: k_rows x (count * plane).
void im2col(const Tensor& x, const ConvGeometry& g, const Shape& out, std::size_t n0,
            std::size_t count, double* cols) {
  const Shape in = x.shape();
  const std::size_t plane = out.h * out.w;
  const std::size_t n_cols = count * plane;
  const double* src = x.data().data();
  std::size_t k = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t u = 0; u < g.kh; ++u) {
      for (std::size_t v = 0; v < g.kw; ++v, ++k) {
        double* row = cols + k * n_cols;
        for (std::size_t n = 0; n < count; ++n) {
          for (std::size_t i = 0; i < out.h; ++i) {
            const double* s = src + ((c * in.n + n0 + n) * in.h + i * g.sh + u) * in.w + v;
            double* d = row + n * plane + i * out.w;
            if (g.sw == 1) {
              std::copy(s, s + out.w, d);
            } else {
              for (std::size_t j = 0; j < out.w; ++j) d[j] = s[j * g.sw];
            }
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, const Shape& in, const Shape& out,
                std::size_t n0, std::size_t count, Tensor& dx) {
  const std::size_t plane = out.h * out.w;
  const std::size_t n_cols = count * plane;
  double* dst = dx.data().data();
  std::size_t k = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t u = 0; u < g.kh; ++u) {
      for (std::size_t v = 0; v < g.kw; ++v, ++k) {
        const double* row = cols + k * n_cols;
        for (std::size_t n = 0; n < count; ++n) {
          for (std::size_t i = 0; i < out.h; ++i) {
            double* d = dst + ((c * in.n + n0 + n) * in.h + i * g.sh + u) * in.w + v;
            const double* s = row + n * plane + i * out.w;
            for (std::size_t j = 0; j < out.w; ++j) d[j * g.sw] += s[j];
          }
        }
      }
    }
  }
}

// Samples per im2col chunk, sized so the column buffer stays cache resident.
std::size_t chunk_samples(std::size_t k_rows, std::size_t plane, std::size_t batch) {
  constexpr std::size_t kTargetValues = std::size_t{1} << 16;
  const std::size_t per_sample = std::max<std::size_t>(1, k_rows * plane);
  return std::clamp<std::size_t>(kTargetValues / per_sample, 1, std::max<std::size_t>(1, batch));
}

using Stride = Eigen::OuterStride<Eigen::Dynamic>;
using StridedMap = Eigen::Map<RowMatrix, Eigen::Unaligned, Stride>;
using ConstStridedMap = Eigen::Map<const RowMatrix, Eigen::Unaligned, Stride>;

}  // namespace

void conv2d_forward(const Tensor& x, std::span<const double> weights, std::span<const double> bias,
                    const ConvGeometry& g, Tensor& y, std::vector<double>& cols) {
  const Shape in = x.shape();
  const Shape out = g.output_shape(in);
  require(weights.size() == g.weight_count(), "conv weight count");
  require(bias.size() == g.c_out, "conv bias count");
  const std::size_t k_rows = g.c_in * g.kh * g.kw;
  const std::size_t plane = out.h * out.w;
  const std::size_t total_cols = in.n * plane;
  const std::size_t chunk = chunk_samples(k_rows, plane, in.n);
  cols.resize(k_rows * chunk * plane);

  y.reshape(out);
  ConstMapMatrix w(weights.data(), g.c_out, k_rows);
  for (std::size_t n0 = 0; n0 < in.n; n0 += chunk) {
    const std::size_t count = std::min(chunk, in.n - n0);
    const std::size_t n_cols = count * plane;
    im2col(x, g, out, n0, count, cols.data());
    ConstMapMatrix cm(cols.data(), k_rows, n_cols);
    StridedMap ym(y.data().data() + n0 * plane, g.c_out, n_cols, Stride(total_cols));
    multiply(ym, w, cm, false);
  }
  MapMatrix yall(y.data().data(), g.c_out, total_cols);
  for (std::size_t o = 0; o < g.c_out; ++o) yall.row(o).array() += bias[o];
}

void conv2d_backward(const Tensor& x, std::span<const double> weights, const ConvGeometry& g,
                     const Tensor& dy, std::vector<double>& cols, std::span<double> dweights,
                     std::span<double> dbias, Tensor* dx) {
  const Shape in = x.shape();
  const Shape out = g.output_shape(in);
  require(dy.shape() == out, "conv output gradient shape");
  require(dweights.size() == g.weight_count() && dbias.size() == g.c_out, "conv gradient size");
  const std::size_t k_rows = g.c_in * g.kh * g.kw;
  const std::size_t plane = out.h * out.w;
  const std::size_t total_cols = in.n * plane;
  const std::size_t chunk = chunk_samples(k_rows, plane, in.n);
  cols.resize(k_rows * chunk * plane);

  ConstMapMatrix dyall(dy.data().data(), g.c_out, total_cols);
  for (std::size_t o = 0; o < g.c_out; ++o) dbias[o] += row_sum(dyall.row(o));

  MapMatrix dw(dweights.data(), g.c_out, k_rows);
  ConstMapMatrix w(weights.data(), g.c_out, k_rows);
  RowMatrix dcols;
  if (dx != nullptr) {
    dx->reshape(in);
    dx->fill(0.0);
  }
  for (std::size_t n0 = 0; n0 < in.n; n0 += chunk) {
    const std::size_t count = std::min(chunk, in.n - n0);
    const std::size_t n_cols = count * plane;
    im2col(x, g, out, n0, count, cols.data());
    ConstMapMatrix cm(cols.data(), k_rows, n_cols);
    ConstStridedMap dym(dy.data().data() + n0 * plane, g.c_out, n_cols, Stride(total_cols));
    multiply(dw, dym, cm.transpose(), true);
    if (dx != nullptr) {
      dcols.resize(k_rows, n_cols);
      multiply(dcols, w.transpose(), dym, false);
      col2im_add(dcols.data(), g, in, out, n0, count, *dx);
    }
  }
}

void maxpool_forward(const Tensor& x, std::size_t ph, std::size_t pw, Tensor& y,
                     std::vector<std::size_t>& argmax) {
  const Shape in = x.shape();
  require(ph > 0 && pw > 0 && in.h >= ph && in.w >= pw, "pool window larger than input");
  const Shape out{in.c, in.n, in.h / ph, in.w / pw};
  y.reshape(out);
  argmax.resize(out.size());
  const double* src = x.data().data();
  double* dst = y.data().data();
  std::size_t o = 0;
  for (std::size_t cn = 0; cn < in.c * in.n; ++cn) {
    const std::size_t base = cn * in.h * in.w;
    for (std::size_t i = 0; i < out.h; ++i) {
      for (std::size_t j = 0; j < out.w; ++j, ++o) {
        std::size_t best = base + (i * ph) * in.w + j * pw;
        for (std::size_t u = 0; u < ph; ++u) {
          for (std::size_t v = 0; v < pw; ++v) {
            const std::size_t idx = base + (i * ph + u) * in.w + j * pw + v;
            if (src[idx] > src[best]) best = idx;
          }
        }
        dst[o] = src[best];
        argmax[o] = best;
      }
    }
  }
}

void maxpool_backward(const Tensor& dy, const std::vector<std::size_t>& argmax, const Shape& in,
                      Tensor& dx) {
  require(argmax.size() == dy.size(), "maxpool gradient shape");
  dx.reshape(in);
  dx.fill(0.0);
  auto g = dy.data();
  auto d = dx.data();
  for (std::size_t o = 0; o < argmax.size(); ++o) d[argmax[o]] += g[o];
}

void global_pool_forward(const Tensor& x, GlobalPoolMode mode, Tensor& y,
                         std::vector<std::size_t>& argmax) {
  const Shape in = x.shape();
  const std::size_t plane = in.h * in.w;
  require(plane > 0, "global pool of empty plane");
  y.reshape({in.c, in.n, 1, 1});
  argmax.clear();
  if (mode == GlobalPoolMode::Max) argmax.resize(in.c * in.n);
  const double* src = x.data().data();
  for (std::size_t cn = 0; cn < in.c * in.n; ++cn) {
    const double* p = src + cn * plane;
    if (mode == GlobalPoolMode::Average) {
      double s = 0.0;
      for (std::size_t k = 0; k < plane; ++k) s += p[k];
      y.data()[cn] = s / static_cast<double>(plane);
    } else {
      std::size_t best = 0;
      for (std::size_t k = 1; k < plane; ++k)
        if (p[k] > p[best]) best = k;
      y.data()[cn] = p[best];
      argmax[cn] = cn * plane + best;
    }
  }
}

void global_pool_backward(const Tensor& dy, GlobalPoolMode mode, const Shape& in,
                          const std::vector<std::size_t>& argmax, Tensor& dx) {
  require(dy.size() == in.c * in.n, "global pool gradient shape");
  const std::size_t plane = in.h * in.w;
  dx.reshape(in);
  if (mode == GlobalPoolMode::Average) {
    const double scale = 1.0 / static_cast<double>(plane);
    for (std::size_t cn = 0; cn < in.c * in.n; ++cn) {
      std::fill_n(dx.data().data() + cn * plane, plane, dy.data()[cn] * scale);
    }
  } else {
    dx.fill(0.0);
    for (std::size_t cn = 0; cn < in.c * in.n; ++cn) dx.data()[argmax[cn]] += dy.data()[cn];
  }
}

void dense_forward(const Tensor& x, std::span<const double> weights, std::span<const double> bias,
                   std::size_t n_in, std::size_t n_out, Tensor& y) {
  const Shape in = x.shape();
  require(in.c == n_in && in.h == 1 && in.w == 1, "dense input shape");
  require(weights.size() == n_in * n_out && bias.size() == n_out, "dense parameter size");
  y.reshape({n_out, in.n, 1, 1});
  ConstMapMatrix w(weights.data(), n_out, n_in);
  ConstMapMatrix xm(x.data().data(), n_in, in.n);
  MapMatrix ym(y.data().data(), n_out, in.n);
  multiply(ym, w, xm, false);
  for (std::size_t o = 0; o < n_out; ++o) ym.row(o).array() += bias[o];
}

void dense_backward(const Tensor& x, std::span<const double> weights, std::size_t n_in,
                    std::size_t n_out, const Tensor& dy, std::span<double> dweights,
                    std::span<double> dbias, Tensor* dx) {
  const std::size_t batch = x.shape().n;
  require(dy.shape() == Shape{n_out, batch, 1, 1}, "dense output gradient shape");
  ConstMapMatrix dym(dy.data().data(), n_out, batch);
  ConstMapMatrix xm(x.data().data(), n_in, batch);
  MapMatrix dw(dweights.data(), n_out, n_in);
  multiply(dw, dym, xm.transpose(), true);
  for (std::size_t o = 0; o < n_out; ++o) dbias[o] += row_sum(dym.row(o));
  if (dx == nullptr) return;
  dx->reshape(x.shape());
  ConstMapMatrix w(weights.data(), n_out, n_in);
  MapMatrix dxm(dx->data().data(), n_in, batch);
  multiply(dxm, w.transpose(), dym, false);
}

void relu_forward(const Tensor& x, Tensor& y) {
  y.reshape(x.shape());
  auto s = x.data();
  auto d = y.data();
  for (std::size_t i = 0; i < s.size(); ++i) d[i] = s[i] > 0.0 ? s[i] : 0.0;
}

void relu_backward(const Tensor& x, const Tensor& dy, Tensor& dx) {
  require(x.shape() == dy.shape(), "relu gradient shape");
  dx.reshape(x.shape());
  auto s = x.data();
  auto g = dy.data();
  auto d = dx.data();
  for (std::size_t i = 0; i < s.size(); ++i) d[i] = s[i] > 0.0 ? g[i] : 0.0;
}

void dropout_forward(const Tensor& x, double p, bool training, Rng* rng, Tensor& y,
                     std::vector<double>& mask) {
  y.reshape(x.shape());
  if (!training || p <= 0.0) {
    mask.clear();
    std::copy(x.data().begin(), x.data().end(), y.data().begin());
    return;
  }
  if (rng == nullptr) {
    throw Error(ErrorKind::Usage, "MissingRng", "training-mode dropout needs a random generator");
  }
  const double keep_scale = 1.0 / (1.0 - p);
  mask.resize(x.size());
  auto s = x.data();
  auto d = y.data();
  // One draw from the caller's generator seeds a cheap counter-based stream.
  const std::uint64_t key = rng->next_u64();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double u = static_cast<double>(splitmix64(key + i) >> 11) * 0x1.0p-53;
    mask[i] = u < p ? 0.0 : keep_scale;
    d[i] = s[i] * mask[i];
  }
}

void dropout_backward(const Tensor& dy, const std::vector<double>& mask, Tensor& dx) {
  dx.reshape(dy.shape());
  auto g = dy.data();
  auto d = dx.data();
  if (mask.empty()) {
    std::copy(g.begin(), g.end(), d.begin());
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * mask[i];
}

void softmax_forward(const Tensor& x, Tensor& y) {
  const Shape in = x.shape();
  require(in.h == 1 && in.w == 1, "softmax expects (classes, batch, 1, 1)");
  y.reshape(in);
  for (std::size_t n = 0; n < in.n; ++n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < in.c; ++c) m = std::max(m, x.at(c, n, 0, 0));
    double z = 0.0;
    for (std::size_t c = 0; c < in.c; ++c) {
      const double e = std::exp(x.at(c, n, 0, 0) - m);
      y.at(c, n, 0, 0) = e;
      z += e;
    }
    for (std::size_t c = 0; c < in.c; ++c) y.at(c, n, 0, 0) /= z;
  }
}

void softmax_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
  require(y.shape() == dy.shape(), "softmax gradient shape");
  const Shape s = y.shape();
  dx.reshape(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    double dot = 0.0;
    for (std::size_t c = 0; c < s.c; ++c) dot += dy.at(c, n, 0, 0) * y.at(c, n, 0, 0);
    for (std::size_t c = 0; c < s.c; ++c)
      dx.at(c, n, 0, 0) = y.at(c, n, 0, 0) * (dy.at(c, n, 0, 0) - dot);
  }
}

double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor& probs,
                             Tensor& dlogits) {
  const Shape s = logits.shape();
  require(labels.size() == s.n, "one label per batch column");
  softmax_forward(logits, probs);
  dlogits.reshape(s);
  const double inv_n = 1.0 / static_cast<double>(s.n);
  double loss = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const auto label = static_cast<std::size_t>(labels[n]);
    require(label < s.c, "label out of range");
    loss -= std::log(std::max(probs.at(label, n, 0, 0), std::numeric_limits<double>::min()));
    for (std::size_t c = 0; c < s.c; ++c) {
      dlogits.at(c, n, 0, 0) = (probs.at(c, n, 0, 0) - (c == label ? 1.0 : 0.0)) * inv_n;
    }
  }
  return loss * inv_n;
}

}  // namespace morse::nn
