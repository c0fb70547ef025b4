#include "aoimix/neural.hpp"

#include "aoimix/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace aoimix {
namespace {

void activate(Activation a, Matrix& z) {
  switch (a) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kAbsolute:
      z = z.cwiseAbs();
      break;
    case Activation::kIdentity:
      break;
  }
}

// Multiplies `grad` in place by the activation derivative at `pre`.
void activation_backward(Activation a, const Matrix& pre, Matrix& grad) {
  switch (a) {
    case Activation::kRelu:
      grad = (pre.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::kAbsolute:
      grad = grad.cwiseProduct(pre.unaryExpr([](double v) {
        return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      }));
      break;
    case Activation::kIdentity:
      break;
  }
}

void write_f64_le(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_f64_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8))
    throw ContractViolation("densenet load: truncated parameter payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
    case Activation::kAbsolute:
      return "absolute";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  if (name == "absolute") return Activation::kAbsolute;
  throw ContractViolation("unknown activation '" + name + "'");
}

bool Gradients::all_finite() const {
  for (const auto& w : weight)
    if (!w.allFinite()) return false;
  for (const auto& b : bias)
    if (!b.allFinite()) return false;
  return true;
}

void Gradients::set_zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.weight.size() != weight.size()) throw ContractViolation("gradients: layout mismatch");
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] += other.weight[i];
    bias[i] += other.bias[i];
  }
  return *this;
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto& w : weight)
    if (w.size()) m = std::max(m, w.cwiseAbs().maxCoeff());
  for (const auto& b : bias)
    if (b.size()) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ContractViolation("densenet: at least one layer required");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weight.rows())
      throw ContractViolation("densenet: bias length must equal layer outputs");
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows())
      throw ContractViolation("densenet: consecutive layer dimensions do not chain");
  }
}

DenseNet::DenseNet(const std::vector<LayerSpec>& specs, Rng& rng) {
  if (specs.empty()) throw ContractViolation("densenet: at least one layer required");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.inputs < 1 || s.outputs < 1) throw ContractViolation("densenet: empty layer");
    if (i > 0 && s.inputs != specs[i - 1].outputs)
      throw ContractViolation("densenet: consecutive layer dimensions do not chain");
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.inputs));
    std::uniform_real_distribution<double> init(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(s.outputs, s.inputs);
    layer.bias.resize(s.outputs);
    for (int r = 0; r < s.outputs; ++r)
      for (int c = 0; c < s.inputs; ++c) layer.weight(r, c) = init(rng);
    for (int r = 0; r < s.outputs; ++r) layer.bias[r] = init(rng);
    layer.activation = s.activation;
    layers_.push_back(std::move(layer));
  }
}

int DenseNet::input_size() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int DenseNet::output_size() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<LayerSpec> DenseNet::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_)
    out.push_back({static_cast<int>(l.weight.cols()), static_cast<int>(l.weight.rows()),
                   l.activation});
  return out;
}

Vector DenseNet::forward(const Vector& input) const {
  if (input.size() != input_size())
    throw ContractViolation("densenet forward: input has " + std::to_string(input.size()) +
                            " entries, network expects " + std::to_string(input_size()));
  Vector x = input;
  for (const auto& l : layers_) {
    Matrix z = l.weight * x + l.bias;
    activate(l.activation, z);
    x = std::move(z);
  }
  return x;
}

Matrix DenseNet::forward_batch(const Matrix& inputs, ForwardCache* cache) const {
  if (inputs.rows() != input_size())
    throw ContractViolation("densenet forward: input rows do not match the first layer");
  if (cache) {
    cache->inputs.clear();
    cache->preactivations.clear();
  }
  Matrix x = inputs;
  for (const auto& l : layers_) {
    Matrix z = l.weight * x;
    z.colwise() += l.bias;
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->preactivations.push_back(z);
    }
    activate(l.activation, z);
    x = std::move(z);
  }
  return x;
}

Gradients DenseNet::zero_gradients() const {
  Gradients g;
  for (const auto& l : layers_) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

Gradients DenseNet::backward(const ForwardCache& cache, const Matrix& upstream,
                             Matrix* input_gradient) const {
  if (cache.inputs.size() != layers_.size())
    throw ContractViolation("densenet backward: cache does not match this network");
  if (upstream.rows() != output_size() || upstream.cols() != cache.inputs.front().cols())
    throw ContractViolation("densenet backward: upstream gradient has the wrong shape");
  Gradients g;
  g.weight.resize(layers_.size());
  g.bias.resize(layers_.size());
  Matrix delta = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& l = layers_[i];
    activation_backward(l.activation, cache.preactivations[i], delta);
    g.weight[i].noalias() = delta * cache.inputs[i].transpose();
    g.bias[i] = delta.rowwise().sum();
    if (i > 0 || input_gradient) {
      Matrix next = l.weight.transpose() * delta;
      delta = std::move(next);
    }
  }
  if (input_gradient) *input_gradient = std::move(delta);
  return g;
}

std::vector<double> DenseNet::flatten() const {
  std::vector<double> out;
  out.reserve(param_count());
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias[r]);
  }
  return out;
}

void DenseNet::assign(std::span<const double> params) {
  if (params.size() != param_count())
    throw ContractViolation("densenet assign: parameter count mismatch");
  std::size_t k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = params[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = params[k++];
  }
}

bool DenseNet::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

void DenseNet::save(std::ostream& out) const {
  nlohmann::json header;
  header["format"] = "densenet-f64le";
  header["param_count"] = param_count();
  auto& layers = header["layers"] = nlohmann::json::array();
  for (const auto& s : specs())
    layers.push_back({{"inputs", s.inputs}, {"outputs", s.outputs},
                      {"activation", to_string(s.activation)}});
  out << header.dump() << '\n';
  for (double v : flatten()) write_f64_le(out, v);
  if (!out) throw Error("densenet save: write failed");
}

void DenseNet::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  save(out);
}

DenseNet DenseNet::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ContractViolation("densenet load: missing header");
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != "densenet-f64le")
    throw ContractViolation("densenet load: unknown format");
  std::vector<DenseLayer> layers;
  for (const auto& l : header.at("layers")) {
    DenseLayer layer;
    const int in_size = l.at("inputs").get<int>();
    const int out_size = l.at("outputs").get<int>();
    layer.weight = Matrix::Zero(out_size, in_size);
    layer.bias = Vector::Zero(out_size);
    layer.activation = parse_activation(l.at("activation").get<std::string>());
    layers.push_back(std::move(layer));
  }
  DenseNet net(std::move(layers));
  const auto count = header.at("param_count").get<std::size_t>();
  if (count != net.param_count()) throw ContractViolation("densenet load: param_count mismatch");
  std::vector<double> params(count);
  for (auto& p : params) p = read_f64_le(in);
  net.assign(params);
  return net;
}

DenseNet DenseNet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return load(in);
}

BackwardResult backward(const DenseNet& net, const Vector& input, const Vector& upstream) {
  ForwardCache cache;
  net.forward_batch(input, &cache);
  Matrix input_grad;
  BackwardResult r;
  r.parameters = net.backward(cache, upstream, &input_grad);
  r.input = input_grad.col(0);
  return r;
}

bool SgdOptimizer::step(DenseNet& net, const Gradients& grads) {
  auto& layers = net.layers();
  if (grads.weight.size() != layers.size()) throw ContractViolation("sgd: gradient layout mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (grads.weight[i].rows() != layers[i].weight.rows() ||
        grads.weight[i].cols() != layers[i].weight.cols() ||
        grads.bias[i].size() != layers[i].bias.size())
      throw ContractViolation("sgd: gradient shape mismatch");
  }
  if (!grads.all_finite()) {
    ++skipped_;
    return false;
  }
  if (momentum_ > 0.0) {
    if (velocity_.weight.empty()) velocity_ = net.zero_gradients();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      velocity_.weight[i] = momentum_ * velocity_.weight[i] + grads.weight[i];
      velocity_.bias[i] = momentum_ * velocity_.bias[i] + grads.bias[i];
      layers[i].weight -= learning_rate_ * velocity_.weight[i];
      layers[i].bias -= learning_rate_ * velocity_.bias[i];
    }
  } else {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight -= learning_rate_ * grads.weight[i];
      layers[i].bias -= learning_rate_ * grads.bias[i];
    }
  }
  return true;
}

}  // namespace aoimix
