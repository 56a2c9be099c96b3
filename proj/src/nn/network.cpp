#include "dqp/nn/network.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <random>

namespace dqp::nn {

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian doubles");

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  t.shape = std::move(shape);
  t.values.assign(n, 0.0);
  return t;
}

namespace {

std::size_t offset_of(const std::vector<int>& shape, std::initializer_list<int> index) {
  if (index.size() != shape.size()) throw ShapeError("index rank does not match tensor rank");
  std::size_t off = 0;
  std::size_t d = 0;
  for (int i : index) {
    if (i < 0 || i >= shape[d]) throw ShapeError("tensor index out of range");
    off = off * static_cast<std::size_t>(shape[d]) + static_cast<std::size_t>(i);
    ++d;
  }
  return off;
}

}  // namespace

double& Tensor::at(std::initializer_list<int> index) { return values[offset_of(shape, index)]; }
double Tensor::at(std::initializer_list<int> index) const { return values[offset_of(shape, index)]; }

void Tensor::validate() const {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  if (n != values.size()) throw ShapeError("tensor value count does not match its shape");
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("tensor holds a non-finite value");
  }
}

LayerSpec LayerSpec::conv(int filters, int kh, int kw, int stride) {
  LayerSpec l;
  l.kind = LayerKind::kConv;
  l.filters = filters;
  l.kernel_h = kh;
  l.kernel_w = kw;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::dense(int units) {
  LayerSpec l;
  l.kind = LayerKind::kDense;
  l.units = units;
  return l;
}

LayerSpec LayerSpec::batch_norm(int channels) {
  LayerSpec l;
  l.kind = LayerKind::kBatchNorm;
  l.channels = channels;
  return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::kFlatten;
  return l;
}

std::string describe(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::kConv:
      return "conv " + std::to_string(l.filters) + "@" + std::to_string(l.kernel_h) + "x" +
             std::to_string(l.kernel_w) + "/" + std::to_string(l.stride);
    case LayerKind::kDense: return "dense " + std::to_string(l.units);
    case LayerKind::kBatchNorm: return "batchnorm " + std::to_string(l.channels);
    case LayerKind::kRelu: return "relu";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

ArchSpec ArchSpec::full() {
  ArchSpec a;
  a.convs = {{32, 4, 2}, {64, 4, 2}, {64, 3, 1}};
  a.hidden = {128};
  return a;
}

ArchSpec ArchSpec::desk() {
  ArchSpec a;
  a.convs = {{4, 4, 2}, {8, 4, 2}, {8, 3, 1}};
  a.hidden = {32};
  a.output_scale = 100.0;
  return a;
}

namespace {

void check_arch(const ArchSpec& a) {
  if (a.height <= 0 || a.width <= 0 || a.channels <= 0) throw ShapeError("input dimensions must be positive");
  if (a.side < 0) throw ShapeError("side feature count must be non-negative");
  if (!(a.output_scale > 0) || !std::isfinite(a.output_scale)) throw ShapeError("output scale must be positive");
  int h = a.height, w = a.width;
  for (const ConvSpec& c : a.convs) {
    if (c.filters <= 0 || c.kernel <= 0) throw ShapeError("conv dimensions must be positive");
    if (c.stride < 1) throw ShapeError("conv stride must be at least 1");
    if (c.kernel > h || c.kernel > w) throw ShapeError("conv kernel larger than its input");
    h = (h - c.kernel) / c.stride + 1;
    w = (w - c.kernel) / c.stride + 1;
  }
  for (int u : a.hidden) {
    if (u <= 0) throw ShapeError("dense units must be positive");
  }
  if (a.bn_eps <= 0 || a.bn_momentum < 0 || a.bn_momentum > 1) throw ShapeError("bad batch norm settings");
}

}  // namespace

std::vector<LayerSpec> build_chain(const ArchSpec& arch) {
  check_arch(arch);
  std::vector<LayerSpec> chain;
  int c = arch.channels;
  for (const ConvSpec& conv : arch.convs) {
    chain.push_back(LayerSpec::batch_norm(c));
    chain.push_back(LayerSpec::conv(conv.filters, conv.kernel, conv.kernel, conv.stride));
    chain.push_back(LayerSpec::relu());
    c = conv.filters;
  }
  chain.push_back(LayerSpec::flatten());
  int features = 0;
  {
    int h = arch.height, w = arch.width;
    for (const ConvSpec& conv : arch.convs) {
      h = (h - conv.kernel) / conv.stride + 1;
      w = (w - conv.kernel) / conv.stride + 1;
    }
    features = h * w * c + arch.side;
  }
  for (int u : arch.hidden) {
    chain.push_back(LayerSpec::batch_norm(features));
    chain.push_back(LayerSpec::dense(u));
    chain.push_back(LayerSpec::relu());
    features = u;
  }
  chain.push_back(LayerSpec::dense(1));
  return chain;
}

std::vector<std::vector<int>> layer_shapes(const ArchSpec& arch) {
  const auto chain = build_chain(arch);
  std::vector<std::vector<int>> out;
  std::vector<int> shape{arch.height, arch.width, arch.channels};
  for (const LayerSpec& l : chain) {
    switch (l.kind) {
      case LayerKind::kConv:
        shape = {(shape[0] - l.kernel_h) / l.stride + 1, (shape[1] - l.kernel_w) / l.stride + 1, l.filters};
        break;
      case LayerKind::kDense: shape = {l.units}; break;
      case LayerKind::kFlatten: shape = {shape[0] * shape[1] * shape[2] + arch.side}; break;
      case LayerKind::kBatchNorm:
      case LayerKind::kRelu: break;
    }
    out.push_back(shape);
  }
  return out;
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void im2col(const Matrix& x, int n, int h, int w, int c, int k_h, int k_w, int stride, int oh, int ow,
            Matrix& col) {
  col.resize(static_cast<Eigen::Index>(n) * oh * ow, static_cast<Eigen::Index>(k_h) * k_w * c);
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double* dst = col.row((static_cast<Eigen::Index>(b) * oh + i) * ow + j).data();
        for (int ki = 0; ki < k_h; ++ki) {
          const double* src = x.row((static_cast<Eigen::Index>(b) * h + i * stride + ki) * w + j * stride).data();
          std::copy(src, src + static_cast<std::ptrdiff_t>(k_w) * c, dst);
          dst += static_cast<std::ptrdiff_t>(k_w) * c;
        }
      }
    }
  }
}

void col2im(const Matrix& col, int n, int h, int w, int c, int k_h, int k_w, int stride, int oh, int ow,
            Matrix& x) {
  x.setZero(static_cast<Eigen::Index>(n) * h * w, c);
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        const double* src = col.row((static_cast<Eigen::Index>(b) * oh + i) * ow + j).data();
        for (int ki = 0; ki < k_h; ++ki) {
          double* dst = x.row((static_cast<Eigen::Index>(b) * h + i * stride + ki) * w + j * stride).data();
          for (int t = 0; t < k_w * c; ++t) dst[t] += src[t];
          src += static_cast<std::ptrdiff_t>(k_w) * c;
        }
      }
    }
  }
}

// Batch norm kernels over the columns of a row-major matrix. Written as
// plain loops: Eigen's rowwise broadcasts are slow for narrow matrices.
void bn_stats(const Matrix& x, Matrix& mean, Matrix& var) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  mean = Matrix::Zero(1, cols);
  var = Matrix::Zero(1, cols);
  double* mu = mean.data();
  double* va = var.data();
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    for (Eigen::Index c = 0; c < cols; ++c) mu[c] += xr[c];
  }
  for (Eigen::Index c = 0; c < cols; ++c) mu[c] /= static_cast<double>(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double t = xr[c] - mu[c];
      va[c] += t * t;
    }
  }
  for (Eigen::Index c = 0; c < cols; ++c) va[c] /= static_cast<double>(rows);
}

void bn_apply(const Matrix& x, const Matrix& mean, const Matrix& inv, const Matrix& gamma, const Matrix& beta,
              Matrix& xhat, Matrix& y) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  xhat.resize(rows, cols);
  y.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* hr = xhat.data() + r * cols;
    double* yr = y.data() + r * cols;
    for (Eigen::Index c = 0; c < cols; ++c) {
      hr[c] = (xr[c] - mean.data()[c]) * inv.data()[c];
      yr[c] = hr[c] * gamma.data()[c] + beta.data()[c];
    }
  }
}

// d is replaced by the input gradient when dx is requested.
void bn_backward(Matrix& d, const Matrix& xhat, const Matrix& inv, const Matrix& gamma, bool train, bool dx,
                 Matrix& dgamma, Matrix& dbeta) {
  const Eigen::Index rows = d.rows(), cols = d.cols();
  dgamma = Matrix::Zero(1, cols);
  dbeta = Matrix::Zero(1, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double* dr = d.data() + r * cols;
    const double* hr = xhat.data() + r * cols;
    for (Eigen::Index c = 0; c < cols; ++c) {
      dgamma.data()[c] += dr[c] * hr[c];
      dbeta.data()[c] += dr[c];
    }
  }
  if (!dx) return;
  // With dxhat = d * gamma: sum(dxhat) = gamma * dbeta, sum(dxhat * xhat) = gamma * dgamma.
  const double m = static_cast<double>(rows);
  std::vector<double> a(static_cast<std::size_t>(cols)), b(static_cast<std::size_t>(cols)),
      k(static_cast<std::size_t>(cols));
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double g = gamma.data()[c];
    k[c] = g * inv.data()[c];
    a[c] = train ? g * dbeta.data()[c] / m : 0.0;
    b[c] = train ? g * dgamma.data()[c] / m : 0.0;
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    double* dr = d.data() + r * cols;
    const double* hr = xhat.data() + r * cols;
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (train) {
        dr[c] = inv.data()[c] * (gamma.data()[c] * dr[c] - a[c] - hr[c] * b[c]);
      } else {
        dr[c] *= k[c];
      }
    }
  }
}

// out += scale * w over one row of filters; fixed widths vectorize.
template <int F>
inline void axpy_fixed(double* __restrict out, const double* __restrict w, double scale) {
  for (int q = 0; q < F; ++q) out[q] += scale * w[q];
}

inline void axpy(double* __restrict out, const double* __restrict w, double scale, int f) {
  switch (f) {
    case 4: axpy_fixed<4>(out, w, scale); return;
    case 8: axpy_fixed<8>(out, w, scale); return;
    case 16: axpy_fixed<16>(out, w, scale); return;
    case 32: axpy_fixed<32>(out, w, scale); return;
    default:
      for (int q = 0; q < f; ++q) out[q] += scale * w[q];
  }
}

// dw += scale * d and returns w . d.
template <int F>
inline double axpy_dot_fixed(double* __restrict dw, const double* __restrict w, const double* __restrict d,
                             double scale) {
  double dot = 0;
  for (int q = 0; q < F; ++q) {
    dw[q] += scale * d[q];
    dot += w[q] * d[q];
  }
  return dot;
}

inline double axpy_dot(double* __restrict dw, const double* __restrict w, const double* __restrict d, double scale,
                       int f) {
  switch (f) {
    case 4: return axpy_dot_fixed<4>(dw, w, d, scale);
    case 8: return axpy_dot_fixed<8>(dw, w, d, scale);
    case 16: return axpy_dot_fixed<16>(dw, w, d, scale);
    case 32: return axpy_dot_fixed<32>(dw, w, d, scale);
    default: {
      double dot = 0;
      for (int q = 0; q < f; ++q) {
        dw[q] += scale * d[q];
        dot += w[q] * d[q];
      }
      return dot;
    }
  }
}

// A finite sum implies finite entries (Inf and NaN both propagate).
bool all_finite(const Matrix& m) { return std::isfinite(m.sum()); }

void require_finite(const Matrix& m, std::size_t layer, const LayerSpec& spec) {
  if (!all_finite(m)) {
    throw NumericError("non-finite activation after layer " + std::to_string(layer) + " (" + describe(spec) + ")");
  }
}

}  // namespace

Network::Network(const ArchSpec& arch, std::uint64_t seed) : arch_(arch), chain_(build_chain(arch)), seed_(seed) {
  std::mt19937_64 rng(seed);
  int h = arch.height, w = arch.width, c = arch.channels;
  int features = 0;
  bool spatial = true;
  for (std::size_t i = 0; i < chain_.size(); ++i) {
    const LayerSpec& spec = chain_[i];
    Layer l;
    l.spec = spec;
    l.in_h = h;
    l.in_w = w;
    l.in_c = c;
    l.in_features = spatial ? h * w * c : features;
    l.spatial = spatial;
    switch (spec.kind) {
      case LayerKind::kBatchNorm: {
        const int ch = spatial ? c : features;
        l.gamma = Matrix::Ones(1, ch);
        l.beta = Matrix::Zero(1, ch);
        l.running_mean = Matrix::Zero(1, ch);
        l.running_var = Matrix::Ones(1, ch);
        break;
      }
      case LayerKind::kConv: {
        const int fan_in = spec.kernel_h * spec.kernel_w * c;
        const double limit = std::sqrt(6.0 / fan_in);
        l.weight.resize(fan_in, spec.filters);
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
          for (Eigen::Index q = 0; q < l.weight.cols(); ++q) l.weight(r, q) = (2.0 * uniform01(rng) - 1.0) * limit;
        l.bias = Matrix::Zero(1, spec.filters);
        h = (h - spec.kernel_h) / spec.stride + 1;
        w = (w - spec.kernel_w) / spec.stride + 1;
        c = spec.filters;
        break;
      }
      case LayerKind::kFlatten:
        features = h * w * c + arch.side;
        spatial = false;
        concat_at_ = static_cast<int>(i);
        break;
      case LayerKind::kDense: {
        const double limit = std::sqrt(6.0 / features);
        l.weight.resize(features, spec.units);
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
          for (Eigen::Index q = 0; q < l.weight.cols(); ++q) l.weight(r, q) = (2.0 * uniform01(rng) - 1.0) * limit;
        l.bias = Matrix::Zero(1, spec.units);
        features = spec.units;
        break;
      }
      case LayerKind::kRelu: break;
    }
    l.out_h = h;
    l.out_w = w;
    l.out_c = c;
    layers_.push_back(std::move(l));
  }
}

Matrix Network::run(const Matrix* dense, const SparseInput* sparse, const Matrix& side, Mode mode, Cache* cache,
                    std::vector<std::pair<Matrix, Matrix>>* batch_stats) const {
  if (layers_.empty()) throw ShapeError("network has no layers");
  const Eigen::Index cells = static_cast<Eigen::Index>(arch_.height) * arch_.width;
  int n = 0;
  if (dense) {
    if (dense->cols() != arch_.input_size()) {
      throw ShapeError("input has " + std::to_string(dense->cols()) + " features, expected " +
                       std::to_string(arch_.input_size()));
    }
    n = static_cast<int>(dense->rows());
    if (!all_finite(*dense)) throw NumericError("non-finite network input");
  } else {
    n = sparse->batch;
    for (const auto& e : sparse->entries) {
      if (e.row < 0 || e.row >= n * cells || e.channel < 0 || e.channel >= arch_.channels) {
        throw ShapeError("sparse input entry out of range");
      }
      if (!std::isfinite(e.value)) throw NumericError("non-finite network input");
    }
  }
  if (n == 0) throw ShapeError("empty batch");
  if (arch_.side > 0 && (side.rows() != n || side.cols() != arch_.side)) {
    throw ShapeError("side features must have shape (batch, " + std::to_string(arch_.side) + ")");
  }
  if (arch_.side == 0 && side.size() != 0) throw ShapeError("network takes no side features");
  if (!all_finite(side)) throw NumericError("non-finite network input");

  if (cache) {
    cache->owner = this;
    cache->version = version_;
    cache->batch = n;
    cache->mode = mode;
    cache->inputs.assign(layers_.size(), Matrix());
    cache->extra.assign(layers_.size(), Matrix());
    cache->inv_std.assign(layers_.size(), Matrix());
  }

  Matrix x;
  std::size_t first = 0;
  if (fused_input()) {
    x = input_block(sparse ? *sparse : SparseInput::from_dense(*dense, arch_.channels), mode, cache, batch_stats);
    require_finite(x, 1, layers_[1].spec);
    first = 2;
  } else {
    const Matrix flat = dense ? *dense : sparse->to_dense(arch_.input_size(), arch_.channels);
    x = Eigen::Map<const Matrix>(flat.data(), static_cast<Eigen::Index>(n) * cells, arch_.channels);
  }
  for (std::size_t i = first; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    Matrix y;
    switch (l.spec.kind) {
      case LayerKind::kBatchNorm: {
        Matrix mean, var;
        if (mode == Mode::kTrain) {
          bn_stats(x, mean, var);
          if (batch_stats) batch_stats->emplace_back(mean, var);
        } else {
          mean = l.running_mean;
          var = l.running_var;
        }
        const Matrix inv = (var.array() + arch_.bn_eps).rsqrt().matrix();
        Matrix xhat;
        bn_apply(x, mean, inv, l.gamma, l.beta, xhat, y);
        if (cache) {
          cache->extra[i] = std::move(xhat);
          cache->inv_std[i] = inv;
        }
        break;
      }
      case LayerKind::kConv: {
        Matrix col;
        im2col(x, n, l.in_h, l.in_w, l.in_c, l.spec.kernel_h, l.spec.kernel_w, l.spec.stride, l.out_h, l.out_w, col);
        y.noalias() = col * l.weight;
        y.rowwise() += l.bias.row(0);
        if (cache) cache->extra[i] = std::move(col);
        break;
      }
      case LayerKind::kRelu: y = x.cwiseMax(0.0); break;
      case LayerKind::kFlatten: {
        const Eigen::Index flat = static_cast<Eigen::Index>(l.in_h) * l.in_w * l.in_c;
        y.resize(n, flat + arch_.side);
        y.leftCols(flat) = Eigen::Map<const Matrix>(x.data(), n, flat);
        if (arch_.side > 0) y.rightCols(arch_.side) = side;
        break;
      }
      case LayerKind::kDense: {
        y.noalias() = x * l.weight;
        y.rowwise() += l.bias.row(0);
        break;
      }
    }
    require_finite(y, i, l.spec);
    if (cache) cache->inputs[i] = std::move(x);
    x = std::move(y);
  }
  if (arch_.output_scale != 1.0) x *= arch_.output_scale;
  return x;
}

void Network::update_running(const std::vector<std::pair<Matrix, Matrix>>& stats) {
  const double m = arch_.bn_momentum;
  std::size_t k = 0;
  for (Layer& l : layers_) {
    if (l.spec.kind != LayerKind::kBatchNorm) continue;
    l.running_mean = m * l.running_mean + (1.0 - m) * stats[k].first;
    l.running_var = m * l.running_var + (1.0 - m) * stats[k].second;
    ++k;
  }
}

void Network::refresh_running_stats(const std::vector<SparseInput>& batches, const std::vector<Matrix>& sides) {
  if (batches.empty()) return;
  if (!sides.empty() && sides.size() != batches.size()) throw ShapeError("one side matrix per batch expected");
  std::vector<std::pair<Matrix, Matrix>> sum;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    std::vector<std::pair<Matrix, Matrix>> stats;
    run(nullptr, &batches[b], sides.empty() ? Matrix() : sides[b], Mode::kTrain, nullptr, &stats);
    if (sum.empty()) {
      sum = std::move(stats);
      continue;
    }
    for (std::size_t k = 0; k < stats.size(); ++k) {
      sum[k].first += stats[k].first;
      sum[k].second += stats[k].second;
    }
  }
  const double n = static_cast<double>(batches.size());
  std::size_t k = 0;
  for (Layer& l : layers_) {
    if (l.spec.kind != LayerKind::kBatchNorm) continue;
    l.running_mean = sum[k].first / n;
    l.running_var = sum[k].second / n;
    ++k;
  }
  touch();
}

Matrix Network::forward(const Matrix& input, const Matrix& side, Mode mode, Cache* cache) {
  std::vector<std::pair<Matrix, Matrix>> stats;
  Matrix out = run(&input, nullptr, side, mode, cache, mode == Mode::kTrain ? &stats : nullptr);
  if (mode == Mode::kTrain) update_running(stats);
  return out;
}

Matrix Network::forward(const SparseInput& input, const Matrix& side, Mode mode, Cache* cache) {
  std::vector<std::pair<Matrix, Matrix>> stats;
  Matrix out = run(nullptr, &input, side, mode, cache, mode == Mode::kTrain ? &stats : nullptr);
  if (mode == Mode::kTrain) update_running(stats);
  return out;
}

Matrix Network::infer(const Matrix& input, const Matrix& side) const {
  return run(&input, nullptr, side, Mode::kInfer, nullptr, nullptr);
}

Matrix Network::infer(const SparseInput& input, const Matrix& side) const {
  return run(nullptr, &input, side, Mode::kInfer, nullptr, nullptr);
}

SparseInput SparseInput::from_dense(const Matrix& input, int channels) {
  SparseInput out;
  out.batch = static_cast<int>(input.rows());
  const Eigen::Index rows = input.size() / channels;
  const double* data = input.data();
  for (Eigen::Index row = 0; row < rows; ++row) {
    const double* cell = data + row * channels;
    for (int c = 0; c < channels; ++c) {
      if (cell[c] != 0.0) out.entries.push_back({static_cast<int>(row), c, cell[c]});
    }
  }
  return out;
}

Matrix SparseInput::to_dense(int input_size, int channels) const {
  Matrix m = Matrix::Zero(batch, input_size);
  for (const Entry& e : entries) m.data()[static_cast<Eigen::Index>(e.row) * channels + e.channel] += e.value;
  return m;
}


// Input batch norm followed by the first conv, computed from the nonzero
// inputs only. Batch norm is a per-channel affine map y = a*x + b here, so
// with valid padding every output gets the same contribution from b and the
// rest only from nonzero cells of its receptive field.
Matrix Network::input_block(SparseInput input, Mode mode, Cache* cache,
                            std::vector<std::pair<Matrix, Matrix>>* batch_stats) const {
  const Layer& bn = layers_[0];
  const Layer& cv = layers_[1];
  const int n = input.batch;
  const int channels = bn.in_c;
  const Eigen::Index cells = static_cast<Eigen::Index>(n) * bn.in_h * bn.in_w;
  const auto& nz = input.entries;

  Matrix mean, var;
  if (mode == Mode::kTrain) {
    mean = Matrix::Zero(1, channels);
    var = Matrix::Zero(1, channels);
    for (const auto& e : nz) {
      mean.data()[e.channel] += e.value;
      var.data()[e.channel] += e.value * e.value;
    }
    for (int c = 0; c < channels; ++c) {
      mean.data()[c] /= static_cast<double>(cells);
      var.data()[c] = std::max(0.0, var.data()[c] / static_cast<double>(cells) - mean.data()[c] * mean.data()[c]);
    }
    if (batch_stats) batch_stats->emplace_back(mean, var);
  } else {
    mean = bn.running_mean;
    var = bn.running_var;
  }
  const Matrix inv = (var.array() + arch_.bn_eps).rsqrt().matrix();
  // Rows: mean, a, b.
  Matrix affine(3, channels);
  for (int c = 0; c < channels; ++c) {
    const double a = bn.gamma.data()[c] * inv.data()[c];
    affine(0, c) = mean.data()[c];
    affine(1, c) = a;
    affine(2, c) = bn.beta.data()[c] - a * mean.data()[c];
  }

  const int kh = cv.spec.kernel_h, kw = cv.spec.kernel_w, s = cv.spec.stride;
  const int oh = cv.out_h, ow = cv.out_w, f = cv.spec.filters;
  Eigen::RowVectorXd base = cv.bias.row(0);
  for (int k = 0; k < kh * kw; ++k) {
    for (int c = 0; c < channels; ++c) base += affine(2, c) * cv.weight.row(k * channels + c);
  }
  Matrix z(static_cast<Eigen::Index>(n) * oh * ow, f);
  z.rowwise() = base;
  const int plane = bn.in_h * bn.in_w;
  for (const auto& e : nz) {
    const int b = e.row / plane;
    const int i = (e.row % plane) / bn.in_w;
    const int j = e.row % bn.in_w;
    const double scale = affine(1, e.channel) * e.value;
    const int oi_lo = std::max(0, (i - kh + s) / s), oi_hi = std::min(oh - 1, i / s);
    const int oj_lo = std::max(0, (j - kw + s) / s), oj_hi = std::min(ow - 1, j / s);
    for (int oi = oi_lo; oi <= oi_hi; ++oi) {
      for (int oj = oj_lo; oj <= oj_hi; ++oj) {
        const int k = (i - oi * s) * kw + (j - oj * s);
        double* out = z.data() + ((static_cast<Eigen::Index>(b) * oh + oi) * ow + oj) * f;
        const double* __restrict wr = cv.weight.data() + static_cast<Eigen::Index>(k * channels + e.channel) * f;
        axpy(out, wr, scale, f);
      }
    }
  }
  if (cache) {
    cache->extra[0] = std::move(affine);
    cache->inv_std[0] = inv;
    cache->sparse = std::move(input);
  }
  return z;
}

void Network::input_block_backward(const Cache& cache, const Matrix& d, bool input_grad,
                                   std::vector<Matrix>& bn_grads, std::vector<Matrix>& conv_grads,
                                   Matrix& dx) const {
  const Layer& bn = layers_[0];
  const Layer& cv = layers_[1];
  const int channels = bn.in_c;
  const int n = cache.batch;
  const Matrix& affine = cache.extra[0];
  const Matrix& inv = cache.inv_std[0];
  const int kh = cv.spec.kernel_h, kw = cv.spec.kernel_w, s = cv.spec.stride;
  const int oh = cv.out_h, ow = cv.out_w, f = cv.spec.filters;

  const Eigen::RowVectorXd total = d.colwise().sum();
  Matrix dw(cv.weight.rows(), cv.weight.cols());
  for (int k = 0; k < kh * kw; ++k) {
    for (int c = 0; c < channels; ++c) dw.row(k * channels + c) = affine(2, c) * total;
  }
  std::vector<double> dyx(static_cast<std::size_t>(channels), 0.0);
  const int plane = bn.in_h * bn.in_w;
  for (const auto& e : cache.sparse.entries) {
    const int b = e.row / plane;
    const int i = (e.row % plane) / bn.in_w;
    const int j = e.row % bn.in_w;
    const double scale = affine(1, e.channel) * e.value;
    const int oi_lo = std::max(0, (i - kh + s) / s), oi_hi = std::min(oh - 1, i / s);
    const int oj_lo = std::max(0, (j - kw + s) / s), oj_hi = std::min(ow - 1, j / s);
    for (int oi = oi_lo; oi <= oi_hi; ++oi) {
      for (int oj = oj_lo; oj <= oj_hi; ++oj) {
        const int k = (i - oi * s) * kw + (j - oj * s);
        const double* drow = d.data() + ((static_cast<Eigen::Index>(b) * oh + oi) * ow + oj) * f;
        const Eigen::Index r = static_cast<Eigen::Index>(k * channels + e.channel) * f;
        double* dwr = dw.data() + r;
        const double* wr = cv.weight.data() + r;
        dyx[static_cast<std::size_t>(e.channel)] += e.value * axpy_dot(dwr, wr, drow, scale, f);
      }
    }
  }
  Matrix dgamma(1, channels), dbeta(1, channels);
  for (int c = 0; c < channels; ++c) {
    double db = 0;
    for (int k = 0; k < kh * kw; ++k) db += cv.weight.row(k * channels + c).dot(total);
    dbeta.data()[c] = db;
    dgamma.data()[c] = inv.data()[c] * (dyx[static_cast<std::size_t>(c)] - affine(0, c) * db);
  }
  bn_grads = {dgamma, dbeta};
  conv_grads = {std::move(dw), total};

  if (input_grad) {
    const Matrix dcol = d * cv.weight.transpose();
    Matrix dy;
    col2im(dcol, n, bn.in_h, bn.in_w, channels, kh, kw, s, oh, ow, dy);
    const Matrix flat = cache.sparse.to_dense(arch_.input_size(), channels);
    const Eigen::Map<const Matrix> x(flat.data(), static_cast<Eigen::Index>(n) * bn.in_h * bn.in_w, channels);
    Matrix xhat(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (int c = 0; c < channels; ++c) xhat(r, c) = (x(r, c) - affine(0, c)) * inv.data()[c];
    }
    Matrix unused_g, unused_b;
    bn_backward(dy, xhat, inv, bn.gamma, cache.mode == Mode::kTrain, true, unused_g, unused_b);
    dx = Eigen::Map<const Matrix>(dy.data(), n, arch_.input_size());
  }
}

Gradients Network::backward(const Cache& cache, const Matrix& upstream, bool input_grad) const {
  if (cache.owner != this || cache.version != version_ || cache.inputs.size() != layers_.size()) {
    throw std::logic_error("stale or mismatched forward cache");
  }
  const int n = cache.batch;
  if (upstream.rows() != n || upstream.cols() != 1) throw ShapeError("upstream gradient must have shape (batch, 1)");

  Gradients g;
  std::vector<std::vector<Matrix>> per_layer(layers_.size());
  Matrix d = upstream * arch_.output_scale;
  const std::size_t stop = fused_input() ? 2 : 0;
  for (std::size_t ii = layers_.size(); ii-- > stop;) {
    const Layer& l = layers_[ii];
    const Matrix& x = cache.inputs[ii];
    const bool need_dx = ii > 0 || input_grad;
    switch (l.spec.kind) {
      case LayerKind::kDense: {
        per_layer[ii].push_back(x.transpose() * d);
        per_layer[ii].push_back(d.colwise().sum());
        if (need_dx) d = d * l.weight.transpose();
        break;
      }
      case LayerKind::kRelu:
        d = (x.array() > 0.0).select(d.array(), 0.0).matrix();
        break;
      case LayerKind::kFlatten: {
        const Eigen::Index flat = static_cast<Eigen::Index>(l.in_h) * l.in_w * l.in_c;
        if (arch_.side > 0) g.side = d.rightCols(arch_.side);
        Matrix left = d.leftCols(flat);
        d = Eigen::Map<const Matrix>(left.data(), static_cast<Eigen::Index>(n) * l.in_h * l.in_w, l.in_c);
        break;
      }
      case LayerKind::kBatchNorm: {
        Matrix dgamma, dbeta;
        bn_backward(d, cache.extra[ii], cache.inv_std[ii], l.gamma, cache.mode == Mode::kTrain, need_dx, dgamma,
                    dbeta);
        per_layer[ii].push_back(std::move(dgamma));
        per_layer[ii].push_back(std::move(dbeta));
        break;
      }
      case LayerKind::kConv: {
        const Matrix& col = cache.extra[ii];
        per_layer[ii].push_back(col.transpose() * d);
        per_layer[ii].push_back(d.colwise().sum());
        if (need_dx) {
          const Matrix dcol = d * l.weight.transpose();
          Matrix dx;
          col2im(dcol, n, l.in_h, l.in_w, l.in_c, l.spec.kernel_h, l.spec.kernel_w, l.spec.stride, l.out_h, l.out_w,
                 dx);
          d = std::move(dx);
        }
        break;
      }
    }
  }
  if (stop == 2) {
    Matrix dx;
    input_block_backward(cache, d, input_grad, per_layer[0], per_layer[1], dx);
    d = std::move(dx);
  }
  for (auto& blocks : per_layer) {
    for (auto& b : blocks) g.params.push_back(std::move(b));
  }
  if (input_grad) {
    g.input = Eigen::Map<const Matrix>(d.data(), n, arch_.input_size());
  }
  return g;
}

std::vector<Matrix*> Network::parameters() {
  std::vector<Matrix*> out;
  for (Layer& l : layers_) {
    if (l.spec.kind == LayerKind::kConv || l.spec.kind == LayerKind::kDense) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    } else if (l.spec.kind == LayerKind::kBatchNorm) {
      out.push_back(&l.gamma);
      out.push_back(&l.beta);
    }
  }
  return out;
}

std::vector<const Matrix*> Network::parameters() const {
  std::vector<const Matrix*> out;
  for (Matrix* m : const_cast<Network*>(this)->parameters()) out.push_back(m);
  return out;
}

std::vector<Matrix*> Network::buffers() {
  std::vector<Matrix*> out;
  for (Layer& l : layers_) {
    if (l.spec.kind == LayerKind::kBatchNorm) {
      out.push_back(&l.running_mean);
      out.push_back(&l.running_var);
    }
  }
  return out;
}

std::vector<const Matrix*> Network::buffers() const {
  std::vector<const Matrix*> out;
  for (Matrix* m : const_cast<Network*>(this)->buffers()) out.push_back(m);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* m : parameters()) n += static_cast<std::size_t>(m->size());
  return n;
}

void Network::copy_from(const Network& other) {
  if (!(arch_ == other.arch_)) throw ShapeError("cannot copy parameters between different architectures");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].weight = other.layers_[i].weight;
    layers_[i].bias = other.layers_[i].bias;
    layers_[i].gamma = other.layers_[i].gamma;
    layers_[i].beta = other.layers_[i].beta;
    layers_[i].running_mean = other.layers_[i].running_mean;
    layers_[i].running_var = other.layers_[i].running_var;
  }
  touch();
}

void Network::set_zero() {
  for (Layer& l : layers_) {
    if (l.spec.kind == LayerKind::kConv || l.spec.kind == LayerKind::kDense) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }
  touch();
}

bool operator==(const Network& a, const Network& b) {
  if (!(a.arch_ == b.arch_)) return false;
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (*pa[i] != *pb[i]) return false;
  }
  const auto ba = a.buffers(), bb = b.buffers();
  for (std::size_t i = 0; i < ba.size(); ++i) {
    if (*ba[i] != *bb[i]) return false;
  }
  return true;
}

void Adam::step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
  if (params.size() != grads.size()) throw ShapeError("parameter and gradient block counts differ");
  if (m.empty()) {
    for (const Matrix* p : params) {
      m.push_back(Matrix::Zero(p->rows(), p->cols()));
      v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (m.size() != params.size()) throw ShapeError("optimizer state does not match the parameters");
  ++steps;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& gr = grads[i];
    if (gr.rows() != p.rows() || gr.cols() != p.cols() || m[i].rows() != p.rows() || m[i].cols() != p.cols()) {
      throw ShapeError("gradient block " + std::to_string(i) + " has the wrong shape");
    }
    m[i] = beta1 * m[i] + (1.0 - beta1) * gr;
    v[i] = beta2 * v[i] + (1.0 - beta2) * gr.cwiseProduct(gr);
    p.array() -= lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + eps);
  }
}

void Adam::step(Network& net, const Gradients& grads) {
  step(net.parameters(), grads.params);
  net.touch();
}

Matrix to_matrix(const Tensor& t) {
  t.validate();
  if (t.shape.empty()) throw ShapeError("tensor has no batch dimension");
  const Eigen::Index rows = t.shape[0];
  const Eigen::Index cols = static_cast<Eigen::Index>(t.values.size()) / rows;
  return Eigen::Map<const Matrix>(t.values.data(), rows, cols);
}

Tensor to_tensor(const Matrix& m, std::vector<int> shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  if (t.values.size() != static_cast<std::size_t>(m.size())) throw ShapeError("matrix size does not match shape");
  std::copy(m.data(), m.data() + m.size(), t.values.begin());
  return t;
}

}  // namespace dqp::nn
