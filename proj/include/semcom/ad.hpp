#pragma once

// Reverse-mode differentiation over dense [batch, width] arrays.
//
// A Graph is a static, topologically ordered list of primitive applications.
// eval_graph runs it against named inputs and a ParamStore and returns an
// Evaluation holding every intermediate value; backward walks the same list in
// reverse and accumulates parameter gradients into the store.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom::ad {

struct ParamEntry {
  Tensor value;
  Tensor grad;
  Tensor momentum;
  // Batch-norm running statistics live in the store but are never stepped.
  bool trainable = true;
};

class ParamStore {
 public:
  ParamEntry& add(const std::string& name, Tensor value, bool trainable = true);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;

  // Names in lexicographic order; this is the checkpoint ordering.
  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;
  void zero_grad();

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  bool values_equal(const ParamStore& other) const;

 private:
  std::map<std::string, ParamEntry> entries_;
};

enum class Mode { Train, Infer };

enum class Op {
  Input,
  Param,
  MatMul,
  BiasAdd,
  Add,
  Mul,
  Scale,
  LeakyRelu,
  Relu,
  Sigmoid,
  BatchNorm,
  Concat,
  Slice,
  PowerNormalize,
  ComplexGain,
  Mse,
  Softmax,
  SoftmaxCrossEntropy,
  CosineSquared,
  UniformNoiseAdd,
  GaussianCodeLength,
  WeightedSum,
};

const char* op_name(Op op);

using NodeId = std::size_t;

struct Node {
  Node(Op o, std::vector<NodeId> in = {}) : op(o), inputs(std::move(in)) {}

  Op op;
  std::vector<NodeId> inputs;
  // Input/Param name, or the running-mean name for BatchNorm.
  std::string name;
  // Running-variance name for BatchNorm.
  std::string name2;
  // Op attribute: leaky slope, scale factor, power budget, slice begin.
  double a = 0.0;
  // Slice end.
  double b = 0.0;
  std::vector<double> coeffs;
  // Declared width for Input nodes (0: any shape accepted).
  std::size_t width = 0;
  // Test-only fault injection: the adjoint of this node is negated.
  bool corrupt_adjoint = false;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormRate = 0.1;

class Graph {
 public:
  NodeId input(const std::string& name, std::size_t width = 0);
  NodeId param(const std::string& name);

  NodeId matmul(NodeId x, NodeId w);
  NodeId bias_add(NodeId x, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  NodeId leaky_relu(NodeId x, double slope);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId batch_norm(NodeId x, NodeId gamma, NodeId beta, const std::string& running_mean,
                    const std::string& running_var);
  NodeId concat(const std::vector<NodeId>& parts);
  NodeId slice(NodeId x, std::size_t begin, std::size_t end);
  // Rescales each row (2*q_c reals = q_c complex symbols) to average power `power`.
  NodeId power_normalize(NodeId x, double power);
  // Multiplies each interleaved complex symbol of row i by the complex gain h[i].
  NodeId complex_gain(NodeId x, NodeId h);
  NodeId mse(NodeId a, NodeId b);
  NodeId softmax(NodeId logits);
  // Mean over rows of -ln softmax(logits)[label]; labels are [batch, 1] class indices.
  NodeId softmax_cross_entropy(NodeId logits, NodeId labels);
  // Mean over rows of <a,b>^2 / (|a|^2 |b|^2).
  NodeId cosine_squared(NodeId a, NodeId b);
  // x + noise with identity gradient to x and none to the noise.
  NodeId uniform_noise_add(NodeId x, NodeId noise);
  // Mean over rows of the discretized-Gaussian code length in bits.
  NodeId gaussian_code_length(NodeId values, NodeId mean, NodeId scale);
  NodeId weighted_sum(const std::vector<NodeId>& terms, const std::vector<double>& coeffs);

  void set_output(const std::string& name, NodeId id);
  std::optional<NodeId> output(const std::string& name) const;
  NodeId require_output(const std::string& name) const;
  const std::map<std::string, NodeId>& outputs() const { return outputs_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  // Negates the adjoint of `id`; used only to prove the gradient checker catches faults.
  void inject_adjoint_fault(NodeId id);

 private:
  NodeId push(Node node);
  std::vector<Node> nodes_;
  std::map<std::string, NodeId> outputs_;
};

using TensorMap = std::map<std::string, Tensor>;

struct Evaluation {
  Mode mode = Mode::Infer;
  bool complete = false;
  std::vector<Tensor> values;
  // Per-node saved state for the adjoint (normalized activations, norms).
  std::vector<Tensor> saved;
  std::vector<Tensor> saved2;

  const Tensor& value(NodeId id) const { return values.at(id); }
  TensorMap named_outputs(const Graph& graph) const;
};

Evaluation eval_graph(const Graph& graph, ParamStore& store, const TensorMap& inputs, Mode mode);

struct BackwardOptions {
  // When set, only parameters for which this returns true receive gradients.
  std::function<bool(const std::string&)> param_filter;
  // When set, gradients with respect to Input nodes are written here by name.
  TensorMap* input_grads = nullptr;
};

void backward(const Graph& graph, const Evaluation& eval, NodeId loss, ParamStore& store,
              const BackwardOptions& options = {});

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_grad = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  bool passed = true;
};

// Compares analytic gradients of scalar `loss` against central differences for
// every parameter in the store (and every listed input). Relative error is
// |a - n| / max(|a|, |n|, floor); the floor keeps vanishing gradients from
// dominating the report.
GradCheckReport grad_check(const Graph& graph, ParamStore& store, TensorMap inputs, NodeId loss,
                           double tolerance, double step = 1e-6,
                           const std::vector<std::string>& check_inputs = {},
                           double floor = 1e-4);

// buffer <- momentum*buffer + (grad + decay*value); value <- value - lr*buffer; grad <- 0.
void sgd_step(ParamStore& store, double lr, double momentum, double weight_decay);

// Per-entry learning rate; entries mapped to 0 are left untouched (frozen) but
// still have their gradients cleared.
void sgd_step(ParamStore& store, const std::function<double(const std::string&)>& lr_for,
              double momentum, double weight_decay);

}  // namespace semcom::ad
