#pragma once

#include "aoimix/random.hpp"
#include "aoimix/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace aoimix {

enum class Activation { kRelu, kIdentity, kAbsolute };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct LayerSpec {
  int inputs = 0;
  int outputs = 0;
  Activation activation = Activation::kIdentity;
};

struct DenseLayer {
  Matrix weight;  ///< outputs x inputs
  Vector bias;
  Activation activation = Activation::kIdentity;
};

/// Intermediate values of a batched forward pass; columns are samples.
struct ForwardCache {
  std::vector<Matrix> inputs;          ///< input to layer i
  std::vector<Matrix> preactivations;  ///< W x + b of layer i
};

/// Parameter gradients, laid out like the network.
struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  bool all_finite() const;
  void set_zero();
  Gradients& operator+=(const Gradients& other);
  double max_abs() const;
};

/// Fully connected feed-forward network in 64-bit floats.
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  DenseNet(const std::vector<LayerSpec>& specs, Rng& rng);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  int input_size() const;
  int output_size() const;
  std::size_t param_count() const;
  std::vector<LayerSpec> specs() const;

  Vector forward(const Vector& input) const;

  /// Forward over a batch (one sample per column). Fills `cache` when given.
  Matrix forward_batch(const Matrix& inputs, ForwardCache* cache = nullptr) const;

  /// Reverse pass for a cached batch; `upstream` is dLoss/dOutput per column.
  /// Parameter gradients are summed over the batch. Writes dLoss/dInput when
  /// `input_gradient` is non-null.
  Gradients backward(const ForwardCache& cache, const Matrix& upstream,
                     Matrix* input_gradient = nullptr) const;

  Gradients zero_gradients() const;

  std::vector<double> flatten() const;
  void assign(std::span<const double> params);

  bool all_finite() const;

  /// One header line of JSON describing the layer shapes, then the flat
  /// parameter vector as little-endian f64 (per layer: weight row-major, bias).
  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static DenseNet load(std::istream& in);
  static DenseNet load(const std::string& path);

 private:
  std::vector<DenseLayer> layers_;
};

/// Single-sample convenience around forward_batch/backward.
struct BackwardResult {
  Gradients parameters;
  Vector input;
};
BackwardResult backward(const DenseNet& net, const Vector& input, const Vector& upstream);

/// theta <- theta - lr * (grad or momentum buffer). Non-finite gradients skip
/// the update and bump skipped_updates().
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double learning_rate = 1e-3, double momentum = 0.0)
      : learning_rate_(learning_rate), momentum_(momentum) {}

  bool step(DenseNet& net, const Gradients& grads);

  double learning_rate() const { return learning_rate_; }
  void set_learning_rate(double lr) { learning_rate_ = lr; }
  std::uint64_t skipped_updates() const { return skipped_; }

 private:
  double learning_rate_;
  double momentum_;
  Gradients velocity_;
  std::uint64_t skipped_ = 0;
};

}  // namespace aoimix
