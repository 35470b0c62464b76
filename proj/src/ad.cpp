#include "semcom/ad.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "semcom/error.hpp"
#include "semcom/gaussian.hpp"

namespace semcom::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) { return ConstMap(t.values.data(), t.rows(), t.cols()); }
MutMap as_matrix(Tensor& t) { return MutMap(t.values.data(), t.rows(), t.cols()); }

[[noreturn]] void shape_fail(NodeId id, Op op, const std::string& what) {
  throw ShapeError("node " + std::to_string(id) + " (" + op_name(op) + "): " + what);
}

void require_rank2(NodeId id, Op op, const Tensor& t, const char* which) {
  if (t.rank() != 2) {
    shape_fail(id, op, std::string(which) + " must be [batch, width], got " + shape_string(t.shape));
  }
}

void require_same(NodeId id, Op op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) {
    shape_fail(id, op, "operand shapes differ: " + shape_string(a.shape) + " vs " +
                           shape_string(b.shape));
  }
}

// Gradient accumulators are allocated on first use.
Tensor& grad_slot(std::vector<Tensor>& grads, NodeId id, const Tensor& like) {
  Tensor& g = grads[id];
  if (g.values.empty() && like.size() != 0) g = Tensor(like.shape, 0.0);
  return g;
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamStore

ParamEntry& ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (contains(name)) throw ValidationError("duplicate parameter name: " + name);
  ParamEntry entry;
  entry.grad = Tensor(value.shape, 0.0);
  entry.momentum = Tensor(value.shape, 0.0);
  entry.value = std::move(value);
  entry.trainable = trainable;
  return entries_.emplace(name, std::move(entry)).first->second;
}

ParamEntry& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter: " + name);
  return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, entry] : entries_) out.push_back(name);
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, entry] : entries_) {
    if (entry.trainable) n += entry.value.size();
  }
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, entry] : entries_) std::fill(entry.grad.values.begin(), entry.grad.values.end(), 0.0);
}

bool ParamStore::values_equal(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto it = other.entries_.begin();
  for (const auto& [name, entry] : entries_) {
    if (name != it->first || entry.value != it->second.value) return false;
    ++it;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Graph construction

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Param: return "param";
    case Op::MatMul: return "matmul";
    case Op::BiasAdd: return "bias_add";
    case Op::Add: return "add";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::BatchNorm: return "batch_norm";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::PowerNormalize: return "power_normalize";
    case Op::ComplexGain: return "complex_gain";
    case Op::Mse: return "mse";
    case Op::Softmax: return "softmax";
    case Op::SoftmaxCrossEntropy: return "softmax_cross_entropy";
    case Op::CosineSquared: return "cosine_squared";
    case Op::UniformNoiseAdd: return "uniform_noise_add";
    case Op::GaussianCodeLength: return "gaussian_code_length";
    case Op::WeightedSum: return "weighted_sum";
  }
  return "unknown";
}

NodeId Graph::push(Node node) {
  for (NodeId in : node.inputs) {
    if (in >= nodes_.size()) throw ValidationError("graph edge refers to a node that does not precede it");
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

NodeId Graph::input(const std::string& name, std::size_t width) {
  for (const Node& n : nodes_) {
    if (n.op == Op::Input && n.name == name) throw ValidationError("duplicate input slot: " + name);
  }
  Node n{Op::Input, {}};
  n.name = name;
  n.width = width;
  return push(std::move(n));
}

NodeId Graph::param(const std::string& name) {
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::Param && nodes_[i].name == name) return i;
  }
  Node n{Op::Param, {}};
  n.name = name;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId x, NodeId w) { return push({Op::MatMul, {x, w}}); }
NodeId Graph::bias_add(NodeId x, NodeId b) { return push({Op::BiasAdd, {x, b}}); }
NodeId Graph::add(NodeId a, NodeId b) { return push({Op::Add, {a, b}}); }
NodeId Graph::mul(NodeId a, NodeId b) { return push({Op::Mul, {a, b}}); }

NodeId Graph::scale(NodeId x, double factor) {
  Node n{Op::Scale, {x}};
  n.a = factor;
  return push(std::move(n));
}

NodeId Graph::leaky_relu(NodeId x, double slope) {
  Node n{Op::LeakyRelu, {x}};
  n.a = slope;
  return push(std::move(n));
}

NodeId Graph::relu(NodeId x) { return push({Op::Relu, {x}}); }
NodeId Graph::sigmoid(NodeId x) { return push({Op::Sigmoid, {x}}); }

NodeId Graph::batch_norm(NodeId x, NodeId gamma, NodeId beta, const std::string& running_mean,
                         const std::string& running_var) {
  Node n{Op::BatchNorm, {x, gamma, beta}};
  n.name = running_mean;
  n.name2 = running_var;
  return push(std::move(n));
}

NodeId Graph::concat(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ValidationError("concat of zero operands");
  return push({Op::Concat, parts});
}

NodeId Graph::slice(NodeId x, std::size_t begin, std::size_t end) {
  if (end <= begin) throw ValidationError("slice must be non-empty");
  Node n{Op::Slice, {x}};
  n.a = static_cast<double>(begin);
  n.b = static_cast<double>(end);
  return push(std::move(n));
}

NodeId Graph::power_normalize(NodeId x, double power) {
  if (!(power > 0)) throw ValidationError("power budget must be positive");
  Node n{Op::PowerNormalize, {x}};
  n.a = power;
  return push(std::move(n));
}

NodeId Graph::complex_gain(NodeId x, NodeId h) { return push({Op::ComplexGain, {x, h}}); }
NodeId Graph::mse(NodeId a, NodeId b) { return push({Op::Mse, {a, b}}); }
NodeId Graph::softmax(NodeId logits) { return push({Op::Softmax, {logits}}); }

NodeId Graph::softmax_cross_entropy(NodeId logits, NodeId labels) {
  return push({Op::SoftmaxCrossEntropy, {logits, labels}});
}

NodeId Graph::cosine_squared(NodeId a, NodeId b) { return push({Op::CosineSquared, {a, b}}); }

NodeId Graph::uniform_noise_add(NodeId x, NodeId noise) {
  return push({Op::UniformNoiseAdd, {x, noise}});
}

NodeId Graph::gaussian_code_length(NodeId values, NodeId mean, NodeId scale) {
  return push({Op::GaussianCodeLength, {values, mean, scale}});
}

NodeId Graph::weighted_sum(const std::vector<NodeId>& terms, const std::vector<double>& coeffs) {
  if (terms.empty() || terms.size() != coeffs.size()) {
    throw ValidationError("weighted_sum needs one coefficient per term");
  }
  Node n{Op::WeightedSum, terms};
  n.coeffs = coeffs;
  return push(std::move(n));
}

void Graph::set_output(const std::string& name, NodeId id) {
  if (id >= nodes_.size()) throw ValidationError("output refers to unknown node");
  outputs_[name] = id;
}

std::optional<NodeId> Graph::output(const std::string& name) const {
  auto it = outputs_.find(name);
  if (it == outputs_.end()) return std::nullopt;
  return it->second;
}

NodeId Graph::require_output(const std::string& name) const {
  auto id = output(name);
  if (!id) throw ValidationError("graph has no output named " + name);
  return *id;
}

void Graph::inject_adjoint_fault(NodeId id) { nodes_.at(id).corrupt_adjoint = true; }

TensorMap Evaluation::named_outputs(const Graph& graph) const {
  TensorMap out;
  for (const auto& [name, id] : graph.outputs()) out[name] = values.at(id);
  return out;
}

// ---------------------------------------------------------------------------
// Forward

Evaluation eval_graph(const Graph& graph, ParamStore& store, const TensorMap& inputs, Mode mode) {
  const auto& nodes = graph.nodes();
  Evaluation ev;
  ev.mode = mode;
  ev.values.resize(nodes.size());
  ev.saved.resize(nodes.size());
  ev.saved2.resize(nodes.size());

  for (NodeId id = 0; id < nodes.size(); ++id) {
    const Node& node = nodes[id];
    Tensor& out = ev.values[id];
    auto in = [&](std::size_t k) -> const Tensor& { return ev.values[node.inputs[k]]; };

    switch (node.op) {
      case Op::Input: {
        auto it = inputs.find(node.name);
        if (it == inputs.end()) shape_fail(id, node.op, "missing input '" + node.name + "'");
        const Tensor& t = it->second;
        if (node.width != 0 && (t.rank() != 2 || t.cols() != node.width)) {
          shape_fail(id, node.op, "input '" + node.name + "' expects width " +
                                      std::to_string(node.width) + ", got " + shape_string(t.shape));
        }
        out = t;
        break;
      }
      case Op::Param:
        out = store.at(node.name).value;
        break;
      case Op::MatMul: {
        const Tensor& x = in(0);
        const Tensor& w = in(1);
        require_rank2(id, node.op, x, "lhs");
        require_rank2(id, node.op, w, "weight");
        if (x.cols() != w.rows()) {
          shape_fail(id, node.op, "inner dimensions differ: " + shape_string(x.shape) + " x " +
                                      shape_string(w.shape));
        }
        out = Tensor({x.rows(), w.cols()});
        as_matrix(out).noalias() = as_matrix(x) * as_matrix(w);
        break;
      }
      case Op::BiasAdd: {
        const Tensor& x = in(0);
        const Tensor& b = in(1);
        require_rank2(id, node.op, x, "input");
        if (b.size() != x.cols()) shape_fail(id, node.op, "bias width differs from input width");
        out = x;
        for (std::size_t r = 0; r < x.rows(); ++r) {
          auto row = out.row_span(r);
          for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
        }
        break;
      }
      case Op::Add:
      case Op::Mul: {
        require_same(id, node.op, in(0), in(1));
        out = in(0);
        const auto& rhs = in(1).values;
        if (node.op == Op::Add) {
          for (std::size_t i = 0; i < out.size(); ++i) out[i] += rhs[i];
        } else {
          for (std::size_t i = 0; i < out.size(); ++i) out[i] *= rhs[i];
        }
        break;
      }
      case Op::Scale:
        out = in(0);
        for (double& v : out.values) v *= node.a;
        break;
      case Op::LeakyRelu:
        out = in(0);
        for (double& v : out.values) v = v > 0 ? v : node.a * v;
        break;
      case Op::Relu:
        out = in(0);
        for (double& v : out.values) v = v > 0 ? v : 0.0;
        break;
      case Op::Sigmoid:
        out = in(0);
        for (double& v : out.values) v = sigmoid_value(v);
        break;
      case Op::BatchNorm: {
        const Tensor& x = in(0);
        const Tensor& gamma = in(1);
        const Tensor& beta = in(2);
        require_rank2(id, node.op, x, "input");
        const std::size_t batch = x.rows();
        const std::size_t width = x.cols();
        if (gamma.size() != width || beta.size() != width) {
          shape_fail(id, node.op, "affine parameters must match feature width");
        }
        Tensor& running_mean = store.at(node.name).value;
        Tensor& running_var = store.at(node.name2).value;
        Tensor mean({width}, 0.0);
        Tensor var({width}, 0.0);
        if (mode == Mode::Train) {
          for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t c = 0; c < width; ++c) mean[c] += x.at(r, c);
          }
          for (double& m : mean.values) m /= static_cast<double>(batch);
          for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t c = 0; c < width; ++c) {
              const double d = x.at(r, c) - mean[c];
              var[c] += d * d;
            }
          }
          for (double& v : var.values) v /= static_cast<double>(batch);
          const double unbias = batch > 1 ? static_cast<double>(batch) / (batch - 1) : 1.0;
          for (std::size_t c = 0; c < width; ++c) {
            running_mean[c] = (1 - kBatchNormRate) * running_mean[c] + kBatchNormRate * mean[c];
            running_var[c] =
                (1 - kBatchNormRate) * running_var[c] + kBatchNormRate * var[c] * unbias;
          }
        } else {
          mean = running_mean;
          var = running_var;
        }
        Tensor inv_std({width});
        for (std::size_t c = 0; c < width; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + kBatchNormEps);
        Tensor xhat(x.shape);
        out = Tensor(x.shape);
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t c = 0; c < width; ++c) {
            const double h = (x.at(r, c) - mean[c]) * inv_std[c];
            xhat.at(r, c) = h;
            out.at(r, c) = gamma[c] * h + beta[c];
          }
        }
        ev.saved[id] = std::move(xhat);
        ev.saved2[id] = std::move(inv_std);
        break;
      }
      case Op::Concat: {
        std::size_t rows = in(0).rows();
        std::size_t width = 0;
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
          require_rank2(id, node.op, in(k), "operand");
          if (in(k).rows() != rows) shape_fail(id, node.op, "operands have different batch sizes");
          width += in(k).cols();
        }
        out = Tensor({rows, width});
        for (std::size_t r = 0; r < rows; ++r) {
          double* dst = out.values.data() + r * width;
          for (std::size_t k = 0; k < node.inputs.size(); ++k) {
            auto src = in(k).row_span(r);
            dst = std::copy(src.begin(), src.end(), dst);
          }
        }
        break;
      }
      case Op::Slice: {
        const Tensor& x = in(0);
        require_rank2(id, node.op, x, "input");
        const auto begin = static_cast<std::size_t>(node.a);
        const auto end = static_cast<std::size_t>(node.b);
        if (end > x.cols()) shape_fail(id, node.op, "slice exceeds input width");
        out = Tensor({x.rows(), end - begin});
        for (std::size_t r = 0; r < x.rows(); ++r) {
          auto src = x.row_span(r);
          std::copy(src.begin() + begin, src.begin() + end, out.row_span(r).begin());
        }
        break;
      }
      case Op::PowerNormalize: {
        const Tensor& x = in(0);
        require_rank2(id, node.op, x, "codeword");
        if (x.cols() % 2 != 0) shape_fail(id, node.op, "codeword must hold interleaved (re, im) pairs");
        const double symbols = static_cast<double>(x.cols() / 2);
        const double target = std::sqrt(symbols * node.a);
        Tensor norms({x.rows()});
        out = Tensor(x.shape);
        for (std::size_t r = 0; r < x.rows(); ++r) {
          auto src = x.row_span(r);
          double sq = 0;
          for (double v : src) sq += v * v;
          const double norm = std::sqrt(sq);
          if (!(norm > 0)) {
            throw NumericError("node " + std::to_string(id) +
                               " (power_normalize): degenerate codeword with zero norm");
          }
          norms[r] = norm;
          auto dst = out.row_span(r);
          for (std::size_t c = 0; c < src.size(); ++c) dst[c] = target * src[c] / norm;
        }
        ev.saved[id] = std::move(norms);
        break;
      }
      case Op::ComplexGain: {
        const Tensor& x = in(0);
        const Tensor& h = in(1);
        require_rank2(id, node.op, x, "symbols");
        if (x.cols() % 2 != 0) shape_fail(id, node.op, "symbols must be interleaved pairs");
        if (h.rank() != 2 || h.cols() != 2 || (h.rows() != x.rows() && h.rows() != 1)) {
          shape_fail(id, node.op, "gain must be [batch, 2] or [1, 2], got " + shape_string(h.shape));
        }
        out = Tensor(x.shape);
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const std::size_t hr = h.rows() == 1 ? 0 : r;
          const double gr = h.at(hr, 0);
          const double gi = h.at(hr, 1);
          auto src = x.row_span(r);
          auto dst = out.row_span(r);
          for (std::size_t c = 0; c < src.size(); c += 2) {
            dst[c] = gr * src[c] - gi * src[c + 1];
            dst[c + 1] = gr * src[c + 1] + gi * src[c];
          }
        }
        break;
      }
      case Op::Mse: {
        require_same(id, node.op, in(0), in(1));
        const auto& a = in(0).values;
        const auto& b = in(1).values;
        if (a.empty()) shape_fail(id, node.op, "empty operands");
        double acc = 0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
        out = Tensor::scalar(acc / static_cast<double>(a.size()));
        break;
      }
      case Op::Softmax: {
        const Tensor& z = in(0);
        require_rank2(id, node.op, z, "logits");
        out = Tensor(z.shape);
        for (std::size_t r = 0; r < z.rows(); ++r) {
          auto src = z.row_span(r);
          auto dst = out.row_span(r);
          const double peak = *std::max_element(src.begin(), src.end());
          double total = 0;
          for (std::size_t c = 0; c < src.size(); ++c) total += dst[c] = std::exp(src[c] - peak);
          for (double& v : dst) v /= total;
        }
        break;
      }
      case Op::SoftmaxCrossEntropy: {
        const Tensor& z = in(0);
        const Tensor& labels = in(1);
        require_rank2(id, node.op, z, "logits");
        if (labels.size() != z.rows()) shape_fail(id, node.op, "one label per row required");
        Tensor probs(z.shape);
        double loss = 0;
        for (std::size_t r = 0; r < z.rows(); ++r) {
          const double lv = labels[r];
          if (lv < 0 || lv >= static_cast<double>(z.cols()) || lv != std::floor(lv)) {
            throw ValidationError("node " + std::to_string(id) + ": label " + std::to_string(lv) +
                                  " is not a class index below " + std::to_string(z.cols()));
          }
          auto src = z.row_span(r);
          auto dst = probs.row_span(r);
          const double peak = *std::max_element(src.begin(), src.end());
          double total = 0;
          for (std::size_t c = 0; c < src.size(); ++c) total += dst[c] = std::exp(src[c] - peak);
          for (double& v : dst) v /= total;
          const auto label = static_cast<std::size_t>(lv);
          loss += -(src[label] - peak - std::log(total));
        }
        out = Tensor::scalar(loss / static_cast<double>(z.rows()));
        ev.saved[id] = std::move(probs);
        break;
      }
      case Op::CosineSquared: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        require_same(id, node.op, a, b);
        double acc = 0;
        for (std::size_t r = 0; r < a.rows(); ++r) {
          auto ar = a.row_span(r);
          auto br = b.row_span(r);
          double dot = 0, na = 0, nb = 0;
          for (std::size_t c = 0; c < ar.size(); ++c) {
            dot += ar[c] * br[c];
            na += ar[c] * ar[c];
            nb += br[c] * br[c];
          }
          if (na > 0 && nb > 0) acc += std::min(1.0, dot * dot / (na * nb));
        }
        out = Tensor::scalar(acc / static_cast<double>(a.rows()));
        break;
      }
      case Op::UniformNoiseAdd: {
        require_same(id, node.op, in(0), in(1));
        out = in(0);
        const auto& noise = in(1).values;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += noise[i];
        break;
      }
      case Op::GaussianCodeLength: {
        const Tensor& v = in(0);
        const Tensor& mean = in(1);
        const Tensor& scale = in(2);
        require_rank2(id, node.op, v, "values");
        if (mean.size() != v.cols() || scale.size() != v.cols()) {
          shape_fail(id, node.op, "entropy model width differs from feature width");
        }
        double bits = 0;
        for (std::size_t r = 0; r < v.rows(); ++r) {
          for (std::size_t c = 0; c < v.cols(); ++c) {
            const double s = std::max(scale[c], kMinEntropyScale);
            const double p = std::max(discretized_gaussian_mass(v.at(r, c), mean[c], s), kMinCodeProbability);
            bits -= std::log2(p);
          }
        }
        out = Tensor::scalar(bits / static_cast<double>(v.rows()));
        break;
      }
      case Op::WeightedSum: {
        out = Tensor(in(0).shape, 0.0);
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
          require_same(id, node.op, in(0), in(k));
          const auto& src = in(k).values;
          for (std::size_t i = 0; i < out.size(); ++i) out[i] += node.coeffs[k] * src[i];
        }
        break;
      }
      default:
        throw ValidationError("node " + std::to_string(id) + ": unknown primitive");
    }

    if (node.op != Op::Input && node.op != Op::Param && !out.all_finite()) {
      throw NumericError("non-finite value produced at node " + std::to_string(id) + " (" +
                         op_name(node.op) + ")");
    }
  }
  ev.complete = true;
  return ev;
}

// ---------------------------------------------------------------------------
// Backward

void backward(const Graph& graph, const Evaluation& ev, NodeId loss, ParamStore& store,
              const BackwardOptions& options) {
  const auto& nodes = graph.nodes();
  if (!ev.complete || ev.values.size() != nodes.size()) {
    throw ValidationError("backward called before a completed forward pass of this graph");
  }
  if (ev.mode != Mode::Train) throw ValidationError("backward requires a train-mode forward pass");
  if (loss >= nodes.size()) throw ValidationError("loss node out of range");
  if (ev.values[loss].size() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + shape_string(ev.values[loss].shape));
  }

  // Which nodes lead to something that wants a gradient.
  std::vector<char> wants(nodes.size(), 0);
  for (NodeId id = 0; id <= loss; ++id) {
    const Node& node = nodes[id];
    if (node.op == Op::Param) {
      wants[id] = store.at(node.name).trainable &&
                  (!options.param_filter || options.param_filter(node.name));
    } else if (node.op == Op::Input) {
      wants[id] = options.input_grads != nullptr;
    } else {
      for (NodeId k : node.inputs) wants[id] = wants[id] || wants[k];
    }
  }

  std::vector<Tensor> grads(nodes.size());
  grads[loss] = Tensor(ev.values[loss].shape, 1.0);

  for (NodeId id = loss + 1; id-- > 0;) {
    const Node& node = nodes[id];
    if (!wants[id] || grads[id].values.empty()) continue;
    Tensor g = grads[id];
    if (node.corrupt_adjoint) {
      for (double& v : g.values) v = -v;
    }
    auto val = [&](std::size_t k) -> const Tensor& { return ev.values[node.inputs[k]]; };
    auto need = [&](std::size_t k) { return wants[node.inputs[k]] != 0; };
    auto slot = [&](std::size_t k) -> Tensor& { return grad_slot(grads, node.inputs[k], val(k)); };
    const Tensor& out = ev.values[id];

    switch (node.op) {
      case Op::Input:
        if (options.input_grads) (*options.input_grads)[node.name] = g;
        break;
      case Op::Param: {
        Tensor& acc = store.at(node.name).grad;
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
        break;
      }
      case Op::MatMul: {
        if (need(0)) as_matrix(slot(0)).noalias() += as_matrix(g) * as_matrix(val(1)).transpose();
        if (need(1)) as_matrix(slot(1)).noalias() += as_matrix(val(0)).transpose() * as_matrix(g);
        break;
      }
      case Op::BiasAdd: {
        if (need(0)) {
          Tensor& dx = slot(0);
          for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
        }
        if (need(1)) {
          Tensor& db = slot(1);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            auto row = g.row_span(r);
            for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
          }
        }
        break;
      }
      case Op::Add:
      case Op::UniformNoiseAdd: {
        const std::size_t operands = node.op == Op::Add ? 2 : 1;
        for (std::size_t k = 0; k < operands; ++k) {
          if (!need(k)) continue;
          Tensor& d = slot(k);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
        break;
      }
      case Op::Mul: {
        for (std::size_t k = 0; k < 2; ++k) {
          if (!need(k)) continue;
          Tensor& d = slot(k);
          const auto& other = val(1 - k).values;
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * other[i];
        }
        break;
      }
      case Op::Scale: {
        Tensor& d = slot(0);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += node.a * g[i];
        break;
      }
      case Op::LeakyRelu: {
        Tensor& d = slot(0);
        const auto& x = val(0).values;
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += x[i] > 0 ? g[i] : node.a * g[i];
        break;
      }
      case Op::Relu: {
        Tensor& d = slot(0);
        const auto& x = val(0).values;
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += x[i] > 0 ? g[i] : 0.0;
        break;
      }
      case Op::Sigmoid: {
        Tensor& d = slot(0);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * out[i] * (1.0 - out[i]);
        break;
      }
      case Op::BatchNorm: {
        const Tensor& gamma = val(1);
        const Tensor& xhat = ev.saved[id];
        const Tensor& inv_std = ev.saved2[id];
        const std::size_t batch = g.rows();
        const std::size_t width = g.cols();
        if (need(1) || need(2)) {
          Tensor& dgamma = slot(1);
          Tensor& dbeta = slot(2);
          for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t c = 0; c < width; ++c) {
              dgamma[c] += g.at(r, c) * xhat.at(r, c);
              dbeta[c] += g.at(r, c);
            }
          }
        }
        if (need(0)) {
          Tensor& dx = slot(0);
          if (ev.mode == Mode::Train) {
            const double n = static_cast<double>(batch);
            for (std::size_t c = 0; c < width; ++c) {
              double sum = 0, sum_h = 0;
              for (std::size_t r = 0; r < batch; ++r) {
                const double dh = g.at(r, c) * gamma[c];
                sum += dh;
                sum_h += dh * xhat.at(r, c);
              }
              for (std::size_t r = 0; r < batch; ++r) {
                const double dh = g.at(r, c) * gamma[c];
                dx.at(r, c) += inv_std[c] / n * (n * dh - sum - xhat.at(r, c) * sum_h);
              }
            }
          } else {
            for (std::size_t r = 0; r < batch; ++r) {
              for (std::size_t c = 0; c < width; ++c) dx.at(r, c) += g.at(r, c) * gamma[c] * inv_std[c];
            }
          }
        }
        break;
      }
      case Op::Concat: {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
          const std::size_t w = val(k).cols();
          if (need(k)) {
            Tensor& d = slot(k);
            for (std::size_t r = 0; r < g.rows(); ++r) {
              auto src = g.row_span(r);
              auto dst = d.row_span(r);
              for (std::size_t c = 0; c < w; ++c) dst[c] += src[offset + c];
            }
          }
          offset += w;
        }
        break;
      }
      case Op::Slice: {
        Tensor& d = slot(0);
        const auto begin = static_cast<std::size_t>(node.a);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          auto src = g.row_span(r);
          auto dst = d.row_span(r);
          for (std::size_t c = 0; c < src.size(); ++c) dst[begin + c] += src[c];
        }
        break;
      }
      case Op::PowerNormalize: {
        // y = t x / |x|  =>  dx = (t/|x|) (g - u (u . g)), u = x/|x|.
        Tensor& d = slot(0);
        const Tensor& x = val(0);
        const Tensor& norms = ev.saved[id];
        const double target = std::sqrt(static_cast<double>(x.cols() / 2) * node.a);
        for (std::size_t r = 0; r < x.rows(); ++r) {
          auto xr = x.row_span(r);
          auto gr = g.row_span(r);
          auto dr = d.row_span(r);
          const double norm = norms[r];
          double proj = 0;
          for (std::size_t c = 0; c < xr.size(); ++c) proj += xr[c] * gr[c];
          proj /= norm * norm;
          for (std::size_t c = 0; c < xr.size(); ++c) dr[c] += target / norm * (gr[c] - xr[c] * proj);
        }
        break;
      }
      case Op::ComplexGain: {
        const Tensor& x = val(0);
        const Tensor& h = val(1);
        Tensor* dx = need(0) ? &slot(0) : nullptr;
        Tensor* dh = need(1) ? &slot(1) : nullptr;
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const std::size_t hr = h.rows() == 1 ? 0 : r;
          const double gr_ = h.at(hr, 0);
          const double gi_ = h.at(hr, 1);
          auto xs = x.row_span(r);
          auto gs = g.row_span(r);
          for (std::size_t c = 0; c < xs.size(); c += 2) {
            if (dx) {
              dx->at(r, c) += gr_ * gs[c] + gi_ * gs[c + 1];
              dx->at(r, c + 1) += -gi_ * gs[c] + gr_ * gs[c + 1];
            }
            if (dh) {
              dh->at(hr, 0) += gs[c] * xs[c] + gs[c + 1] * xs[c + 1];
              dh->at(hr, 1) += -gs[c] * xs[c + 1] + gs[c + 1] * xs[c];
            }
          }
        }
        break;
      }
      case Op::Mse: {
        const auto& a = val(0).values;
        const auto& b = val(1).values;
        const double k = 2.0 * g[0] / static_cast<double>(a.size());
        if (need(0)) {
          Tensor& d = slot(0);
          for (std::size_t i = 0; i < a.size(); ++i) d[i] += k * (a[i] - b[i]);
        }
        if (need(1)) {
          Tensor& d = slot(1);
          for (std::size_t i = 0; i < a.size(); ++i) d[i] -= k * (a[i] - b[i]);
        }
        break;
      }
      case Op::Softmax: {
        Tensor& d = slot(0);
        for (std::size_t r = 0; r < out.rows(); ++r) {
          auto s = out.row_span(r);
          auto gs = g.row_span(r);
          double dot = 0;
          for (std::size_t c = 0; c < s.size(); ++c) dot += s[c] * gs[c];
          auto dr = d.row_span(r);
          for (std::size_t c = 0; c < s.size(); ++c) dr[c] += s[c] * (gs[c] - dot);
        }
        break;
      }
      case Op::SoftmaxCrossEntropy: {
        if (!need(0)) break;
        Tensor& d = slot(0);
        const Tensor& probs = ev.saved[id];
        const Tensor& labels = val(1);
        const double k = g[0] / static_cast<double>(probs.rows());
        for (std::size_t r = 0; r < probs.rows(); ++r) {
          auto p = probs.row_span(r);
          auto dr = d.row_span(r);
          const auto label = static_cast<std::size_t>(labels[r]);
          for (std::size_t c = 0; c < p.size(); ++c) dr[c] += k * (p[c] - (c == label ? 1.0 : 0.0));
        }
        break;
      }
      case Op::CosineSquared: {
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        Tensor* da = need(0) ? &slot(0) : nullptr;
        Tensor* db = need(1) ? &slot(1) : nullptr;
        const double k = g[0] / static_cast<double>(a.rows());
        for (std::size_t r = 0; r < a.rows(); ++r) {
          auto ar = a.row_span(r);
          auto br = b.row_span(r);
          double dot = 0, na = 0, nb = 0;
          for (std::size_t c = 0; c < ar.size(); ++c) {
            dot += ar[c] * br[c];
            na += ar[c] * ar[c];
            nb += br[c] * br[c];
          }
          if (!(na > 0 && nb > 0)) continue;
          const double cos2 = dot * dot / (na * nb);
          for (std::size_t c = 0; c < ar.size(); ++c) {
            if (da) da->at(r, c) += k * (2.0 * dot * br[c] / (na * nb) - 2.0 * cos2 * ar[c] / na);
            if (db) db->at(r, c) += k * (2.0 * dot * ar[c] / (na * nb) - 2.0 * cos2 * br[c] / nb);
          }
        }
        break;
      }
      case Op::GaussianCodeLength: {
        const Tensor& v = val(0);
        const Tensor& mean = val(1);
        const Tensor& scale = val(2);
        Tensor* dv = need(0) ? &slot(0) : nullptr;
        Tensor* dm = need(1) ? &slot(1) : nullptr;
        Tensor* ds = need(2) ? &slot(2) : nullptr;
        const double k = g[0] / static_cast<double>(v.rows()) / std::numbers::ln2;
        for (std::size_t r = 0; r < v.rows(); ++r) {
          for (std::size_t c = 0; c < v.cols(); ++c) {
            const bool clamped_scale = scale[c] < kMinEntropyScale;
            const double s = clamped_scale ? kMinEntropyScale : scale[c];
            const double p = discretized_gaussian_mass(v.at(r, c), mean[c], s);
            if (p < kMinCodeProbability) continue;
            const double upper = (v.at(r, c) - mean[c] + 0.5) / s;
            const double lower = (v.at(r, c) - mean[c] - 0.5) / s;
            const double dp_dv = (normal_pdf(upper) - normal_pdf(lower)) / s;
            const double dp_ds = -(normal_pdf(upper) * upper - normal_pdf(lower) * lower) / s;
            // d(-log2 p) = -dp / (p ln 2)
            if (dv) dv->at(r, c) += -k * dp_dv / p;
            if (dm) (*dm)[c] += k * dp_dv / p;
            if (ds && !clamped_scale) (*ds)[c] += -k * dp_ds / p;
          }
        }
        break;
      }
      case Op::WeightedSum: {
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
          if (!need(k)) continue;
          Tensor& d = slot(k);
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += node.coeffs[k] * g[i];
        }
        break;
      }
      default:
        throw ValidationError("node " + std::to_string(id) + ": unknown primitive");
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient check

namespace {

double scalar_loss(const Graph& graph, ParamStore& store, const TensorMap& inputs, NodeId loss) {
  return eval_graph(graph, store, inputs, Mode::Train).values[loss][0];
}

GradCheckEntry compare(const std::string& name, const Tensor& analytic, Tensor& value,
                       const std::function<double()>& f, double step, double floor,
                       double tolerance) {
  GradCheckEntry entry;
  entry.name = name;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double saved = value[i];
    value[i] = saved + step;
    const double plus = f();
    value[i] = saved - step;
    const double minus = f();
    value[i] = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    entry.max_rel_error = std::max(entry.max_rel_error, std::abs(a - numeric) / denom);
    entry.max_abs_grad = std::max(entry.max_abs_grad, std::abs(a));
  }
  entry.passed = entry.max_rel_error < tolerance;
  return entry;
}

}  // namespace

GradCheckReport grad_check(const Graph& graph, ParamStore& store, TensorMap inputs, NodeId loss,
                           double tolerance, double step,
                           const std::vector<std::string>& check_inputs, double floor) {
  if (!(tolerance > 0)) throw ValidationError("grad_check tolerance must be positive");
  store.zero_grad();
  TensorMap input_grads;
  BackwardOptions options;
  if (!check_inputs.empty()) options.input_grads = &input_grads;
  const Evaluation ev = eval_graph(graph, store, inputs, Mode::Train);
  backward(graph, ev, loss, store, options);

  GradCheckReport report;
  auto f = [&] { return scalar_loss(graph, store, inputs, loss); };
  for (auto& [name, entry] : store) {
    if (!entry.trainable) continue;
    const Tensor analytic = entry.grad;
    report.entries.push_back(compare(name, analytic, entry.value, f, step, floor, tolerance));
  }
  for (const std::string& name : check_inputs) {
    auto it = inputs.find(name);
    if (it == inputs.end()) throw ValidationError("grad_check: unknown input " + name);
    Tensor analytic = input_grads.count(name) ? input_grads[name] : Tensor(it->second.shape, 0.0);
    report.entries.push_back(compare("input:" + name, analytic, it->second, f, step, floor, tolerance));
  }
  store.zero_grad();
  for (const auto& e : report.entries) {
    report.worst = std::max(report.worst, e.max_rel_error);
    report.passed = report.passed && e.passed;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Optimizer

void sgd_step(ParamStore& store, double lr, double momentum, double weight_decay) {
  if (!(lr > 0)) throw ValidationError("learning rate must be positive");
  sgd_step(store, [lr](const std::string&) { return lr; }, momentum, weight_decay);
}

void sgd_step(ParamStore& store, const std::function<double(const std::string&)>& lr_for,
              double momentum, double weight_decay) {
  for (auto& [name, entry] : store) {
    if (entry.trainable) {
      const double lr = lr_for(name);
      if (lr < 0) throw ValidationError("learning rate must be non-negative");
      if (lr > 0) {
        for (std::size_t i = 0; i < entry.value.size(); ++i) {
          double& buf = entry.momentum[i];
          buf = momentum * buf + (entry.grad[i] + weight_decay * entry.value[i]);
          entry.value[i] -= lr * buf;
        }
      }
    }
    std::fill(entry.grad.values.begin(), entry.grad.values.end(), 0.0);
  }
}

}  // namespace semcom::ad
