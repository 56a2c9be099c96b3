#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace dqp::nn {

// Activations are row-major so that an NHWC batch of shape (N*H*W, C) and its
// flattened view (N, H*W*C) share the same memory layout.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;  // row-major

  static Tensor zeros(std::vector<int> shape);
  std::size_t size() const { return values.size(); }
  double& at(std::initializer_list<int> index);
  double at(std::initializer_list<int> index) const;
  // Throws ShapeError / NumericError when the invariants do not hold.
  void validate() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum class LayerKind { kConv, kDense, kBatchNorm, kRelu, kFlatten };

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int filters = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  int units = 0;
  int channels = 0;

  static LayerSpec conv(int filters, int kh, int kw, int stride);
  static LayerSpec dense(int units);
  static LayerSpec batch_norm(int channels);
  static LayerSpec relu();
  static LayerSpec flatten();

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

std::string describe(const LayerSpec& l);

struct ConvSpec {
  int filters = 0;
  int kernel = 0;
  int stride = 1;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

// Conv stack, flatten, optional side features concatenated to the flattened
// vector, hidden dense layers, scalar output. Batch norm precedes every
// layer except the output one; ReLU follows every layer except the output.
struct ArchSpec {
  int height = 30;
  int width = 30;
  int channels = 7;
  std::vector<ConvSpec> convs;
  std::vector<int> hidden;
  int side = 0;
  double bn_momentum = 0.99;
  double bn_eps = 1e-5;
  // Fixed factor on the scalar output. Adam moves a weight by about lr per
  // step, so a small head trained briefly cannot reach Q-values in the
  // hundreds; scaling the output instead keeps the argmin unchanged.
  double output_scale = 1.0;

  // 32@4x4/2, 64@4x4/2, 64@3x3/1, dense 128, dense 1.
  static ArchSpec full();
  // Same layer pattern with fewer filters and output scale 100; what training
  // runs on one core use.
  static ArchSpec desk();

  int input_size() const { return height * width * channels; }
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

std::vector<LayerSpec> build_chain(const ArchSpec& arch);
// Per-sample output shape after each layer of the chain, e.g. {14,14,32} or {1024}.
std::vector<std::vector<int>> layer_shapes(const ArchSpec& arch);

struct Gradients {
  std::vector<Matrix> params;  // same order as Network::parameters()
  Matrix input;                // (N, input_size)
  Matrix side;                 // (N, side)
};

enum class Mode { kTrain, kInfer };

// Nonzero entries of an input batch, addressed in the (N*H*W, C) view. Entries
// must be unique; one-hot encodings are far cheaper to pass this way.
struct SparseInput {
  struct Entry {
    int row;  // sample * H * W + cell
    int channel;
    double value;
  };
  int batch = 0;
  std::vector<Entry> entries;

  static SparseInput from_dense(const Matrix& input, int channels);
  Matrix to_dense(int input_size, int channels) const;
};

class Network;
struct Adam;

// Intermediates of one forward pass; only valid for the parameters it was
// computed with.
struct Cache {
  const Network* owner = nullptr;
  std::uint64_t version = 0;
  int batch = 0;
  std::vector<Matrix> inputs;  // input of every layer
  std::vector<Matrix> extra;   // im2col matrix (conv) or normalized input (batch norm)
  std::vector<Matrix> inv_std; // batch norm only
  Mode mode = Mode::kInfer;
  SparseInput sparse;  // input of the fused first block
};

class Network {
 public:
  Network() = default;
  Network(const ArchSpec& arch, std::uint64_t seed);

  const ArchSpec& arch() const { return arch_; }
  const std::vector<LayerSpec>& chain() const { return chain_; }
  std::uint64_t seed() const { return seed_; }

  // input: (N, H*W*C) with per-sample layout ((row*W + col)*C + channel);
  // side: (N, side) or empty when the architecture has none. Returns (N, 1).
  // Train mode uses batch statistics and updates the running ones.
  Matrix forward(const Matrix& input, const Matrix& side, Mode mode, Cache* cache = nullptr);
  Matrix forward(const SparseInput& input, const Matrix& side, Mode mode, Cache* cache = nullptr);
  Matrix infer(const Matrix& input, const Matrix& side = Matrix()) const;
  Matrix infer(const SparseInput& input, const Matrix& side = Matrix()) const;

  // upstream: dLoss/dOutput, shape (N, 1).
  // Throws std::logic_error for a cache from another network or older parameters.
  Gradients backward(const Cache& cache, const Matrix& upstream, bool input_grad = true) const;

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<Matrix*> buffers();  // batch norm running mean / variance
  std::vector<const Matrix*> buffers() const;
  std::size_t parameter_count() const;

  // Must be called after parameters are modified from outside; invalidates caches.
  void touch() { ++version_; }
  std::uint64_t version() const { return version_; }

  // Replaces the running batch norm statistics by the average train-mode
  // batch statistics over `batches`, parameters held fixed. Running averages
  // lag behind the weights while they move; features that are constant over
  // the data (zero padding) have near-zero variance, so that lag alone can
  // shift infer-mode outputs far from train-mode ones.
  void refresh_running_stats(const std::vector<SparseInput>& batches, const std::vector<Matrix>& sides = {});

  // Copies parameters and buffers (target network synchronisation).
  void copy_from(const Network& other);
  void set_zero();

  friend bool operator==(const Network& a, const Network& b);

 private:
  struct Layer {
    LayerSpec spec;
    int in_h = 0, in_w = 0, in_c = 0;  // per-sample input geometry (conv, bn)
    int out_h = 0, out_w = 0, out_c = 0;
    int in_features = 0;
    bool spatial = false;  // batch norm over (N*H*W, C) rather than (N, F)
    Matrix weight, bias;   // conv / dense
    Matrix gamma, beta, running_mean, running_var;  // batch norm
  };

  Matrix run(const Matrix* dense, const SparseInput* sparse, const Matrix& side, Mode mode, Cache* cache,
             std::vector<std::pair<Matrix, Matrix>>* batch_stats) const;
  void update_running(const std::vector<std::pair<Matrix, Matrix>>& stats);
  Matrix input_block(SparseInput input, Mode mode, Cache* cache,
                     std::vector<std::pair<Matrix, Matrix>>* batch_stats) const;
  void input_block_backward(const Cache& cache, const Matrix& d, bool input_grad, std::vector<Matrix>& bn_grads,
                            std::vector<Matrix>& conv_grads, Matrix& dx) const;
  bool fused_input() const {
    return layers_.size() > 1 && layers_[0].spec.kind == LayerKind::kBatchNorm &&
           layers_[1].spec.kind == LayerKind::kConv;
  }

  ArchSpec arch_;
  std::vector<LayerSpec> chain_;
  std::vector<Layer> layers_;
  int concat_at_ = -1;  // layer index whose input receives the side features
  std::uint64_t seed_ = 0;
  std::uint64_t version_ = 1;

  friend void save_checkpoint(std::ostream&, const Network&, const Adam*, const std::string&);
  friend Network load_checkpoint(std::istream&, Adam*, std::string*);
};

struct Adam {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t steps = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  // Bias-corrected update params -= lr * m_hat / (sqrt(v_hat) + eps).
  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads);
  void step(Network& net, const Gradients& grads);
};

// Binary checkpoint: magic "DQPNET01", u64 header length, JSON header
// (architecture, chain, seed, optimizer settings, user metadata), then
// little-endian float64 blocks: parameters, buffers, and ADAM moments when present.
void save_checkpoint(std::ostream& out, const Network& net, const Adam* adam,
                     const std::string& metadata_json = "{}");
Network load_checkpoint(std::istream& in, Adam* adam = nullptr, std::string* metadata_json = nullptr);
void save_checkpoint_file(const std::string& path, const Network& net, const Adam* adam,
                          const std::string& metadata_json = "{}");
Network load_checkpoint_file(const std::string& path, Adam* adam = nullptr,
                             std::string* metadata_json = nullptr);

Matrix to_matrix(const Tensor& t);  // one sample per row; first dimension is the batch
Tensor to_tensor(const Matrix& m, std::vector<int> shape);

}  // namespace dqp::nn
