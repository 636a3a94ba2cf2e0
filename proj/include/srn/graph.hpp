#ifndef SRN_GRAPH_HPP_
#define SRN_GRAPH_HPP_

#include <map>
#include <random>
#include <string>
#include <vector>

#include "srn/layers.hpp"
#include "srn/param_store.hpp"
#include "srn/tensor.hpp"

namespace srn {

enum class OpKind {
  kInput,
  kParam,
  kConv2d,
  kRelu,
  kSigmoid,
  kMultiply,
  kAdd,
  kSpatialSoftmax,
  kWeightedPool,
  kLinear,
  kSpatialSumPool,
  kGlobalAvgPool,
  kAvgPool2,
  kFlatten,
  kAffineCombine,
  kBceLoss,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kInput: return "input";
    case OpKind::kParam: return "param";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kMultiply: return "multiply";
    case OpKind::kAdd: return "add";
    case OpKind::kSpatialSoftmax: return "spatial_softmax";
    case OpKind::kWeightedPool: return "weighted_pool";
    case OpKind::kLinear: return "linear";
    case OpKind::kSpatialSumPool: return "spatial_sum_pool";
    case OpKind::kGlobalAvgPool: return "global_avg_pool";
    case OpKind::kAvgPool2: return "avg_pool2";
    case OpKind::kFlatten: return "flatten";
    case OpKind::kAffineCombine: return "affine_combine";
    case OpKind::kBceLoss: return "bce_loss";
  }
  return "?";
}

/// Static operation graph. Built once per model configuration; shapes are
/// inferred and validated at build time so execution never reshapes.
class Graph {
 public:
  struct Node {
    OpKind kind;
    std::vector<int> args;   // upstream node ids, in op-specific order
    std::vector<int> shape;  // inferred output shape
    ConvSpec conv;           // kConv2d only
    double alpha = 0.5;      // kAffineCombine only
    int input_index = -1;    // kInput only
    std::string pname;       // kParam only
    std::string pgroup;      // kParam only
  };

  int input(const std::string& name, std::vector<int> shape) {
    Node n;
    n.kind = OpKind::kInput;
    n.input_index = static_cast<int>(input_shapes_.size());
    n.shape = shape;
    input_names_.push_back(name);
    input_shapes_.push_back(std::move(shape));
    return push(n);
  }

  int param(const std::string& name, const std::string& group, std::vector<int> shape) {
    Node n;
    n.kind = OpKind::kParam;
    n.pname = name;
    n.pgroup = group;
    n.shape = std::move(shape);
    return push(n);
  }

  int conv2d(int x, int w, int b, const ConvSpec& spec) {
    spec.validate();
    const auto& xs = shape_of(x, "conv2d input");
    if (xs.size() != 3 || xs[2] != spec.in_channels)
      throw ShapeError(std::string("conv2d: input ") + shape_str(xs) + " incompatible with spec in_channels=" +
                       std::to_string(spec.in_channels));
    if (shape_of(w, "conv2d weight") != spec.weight_shape())
      throw ShapeError("conv2d: declared weight " + shape_str(shape_of(w, "w")) + " != " +
                       shape_str(spec.weight_shape()));
    if (spec.bias && shape_of(b, "conv2d bias") != std::vector<int>{spec.out_channels})
      throw ShapeError("conv2d: bias shape mismatch for out_channels=" +
                       std::to_string(spec.out_channels));
    const int oh = spec.out_h(xs[0]), ow = spec.out_w(xs[1]);
    if (oh <= 0 || ow <= 0)
      throw ShapeError("conv2d: kernel larger than padded input " + shape_str(xs));
    Node n;
    n.kind = OpKind::kConv2d;
    n.conv = spec;
    n.args = spec.bias ? std::vector<int>{x, w, b} : std::vector<int>{x, w};
    n.shape = {oh, ow, spec.out_channels};
    return push(n);
  }

  int relu(int x) { return unary(OpKind::kRelu, x); }
  int sigmoid(int x) { return unary(OpKind::kSigmoid, x); }

  int multiply(int a, int b) { return binary_same(OpKind::kMultiply, a, b); }
  int add(int a, int b) { return binary_same(OpKind::kAdd, a, b); }

  int spatial_softmax(int z) {
    require_rank(z, 3, "spatial_softmax");
    return unary(OpKind::kSpatialSoftmax, z);
  }

  int weighted_pool(int x, int a) {
    const auto& xs = shape_of(x, "weighted_pool X");
    const auto& as = shape_of(a, "weighted_pool A");
    if (xs.size() != 3 || as.size() != 3 || xs[0] != as[0] || xs[1] != as[1])
      throw ShapeError("weighted_pool: X " + shape_str(xs) + " vs A " + shape_str(as));
    Node n;
    n.kind = OpKind::kWeightedPool;
    n.args = {x, a};
    n.shape = {as[2], xs[2]};
    return push(n);
  }

  int linear(int x, int w, int b) {
    const auto& xs = shape_of(x, "linear input");
    const auto& ws = shape_of(w, "linear weight");
    const auto& bs = shape_of(b, "linear bias");
    if (xs.size() != 1 || ws.size() != 2 || ws[1] != xs[0] || bs != std::vector<int>{ws[0]})
      throw ShapeError("linear: W " + shape_str(ws) + ", x " + shape_str(xs) + ", b " +
                       shape_str(bs));
    Node n;
    n.kind = OpKind::kLinear;
    n.args = {x, w, b};
    n.shape = {ws[0]};
    return push(n);
  }

  int spatial_sum_pool(int m) {
    require_rank(m, 3, "spatial_sum_pool");
    Node n;
    n.kind = OpKind::kSpatialSumPool;
    n.args = {m};
    n.shape = {shape_of(m, "m")[2]};
    return push(n);
  }

  int global_avg_pool(int x) {
    require_rank(x, 3, "global_avg_pool");
    Node n;
    n.kind = OpKind::kGlobalAvgPool;
    n.args = {x};
    n.shape = {shape_of(x, "x")[2]};
    return push(n);
  }

  int avg_pool2(int x) {
    const auto& xs = shape_of(x, "avg_pool2 input");
    if (xs.size() != 3 || xs[0] % 2 != 0 || xs[1] % 2 != 0)
      throw ShapeError("avg_pool2: input " + shape_str(xs) + " must be rank 3 with even H, W");
    Node n;
    n.kind = OpKind::kAvgPool2;
    n.args = {x};
    n.shape = {xs[0] / 2, xs[1] / 2, xs[2]};
    return push(n);
  }

  int flatten(int x) {
    Node n;
    n.kind = OpKind::kFlatten;
    n.args = {x};
    n.shape = {static_cast<int>(Tensor<double>::count(shape_of(x, "flatten input")))};
    return push(n);
  }

  int affine_combine(int a, int b, double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
      throw ConfigError("affine_combine: alpha " + std::to_string(alpha) + " outside [0, 1]");
    int id = binary_same(OpKind::kAffineCombine, a, b);
    nodes_[id].alpha = alpha;
    return id;
  }

  /// args = {logits, targets} or {logits, targets, mask}; output shape (1).
  int bce_loss(int logits, int targets, int mask = -1) {
    const auto& ls = shape_of(logits, "bce_loss logits");
    if (shape_of(targets, "bce_loss targets") != ls)
      throw ShapeError("bce_loss: logits/targets shape mismatch " + shape_str(ls));
    Node n;
    n.kind = OpKind::kBceLoss;
    n.args = {logits, targets};
    if (mask >= 0) {
      if (shape_of(mask, "bce_loss mask") != ls)
        throw ShapeError("bce_loss: mask shape mismatch " + shape_str(ls));
      n.args.push_back(mask);
    }
    n.shape = {1};
    return push(n);
  }

  void mark_output(const std::string& name, int node) {
    check_id(node, "mark_output");
    outputs_[name] = node;
    output_order_.push_back(name);
  }

  int output(const std::string& name) const {
    auto it = outputs_.find(name);
    if (it == outputs_.end()) throw ConfigError("Graph: no output named " + name);
    return it->second;
  }

  bool has_output(const std::string& name) const { return outputs_.count(name) != 0; }
  const std::vector<std::string>& output_names() const { return output_order_; }

  void set_loss(int node) {
    check_id(node, "set_loss");
    if (nodes_[node].shape != std::vector<int>{1})
      throw ShapeError("set_loss: node output " + shape_str(nodes_[node].shape) +
                       " is not scalar");
    loss_node_ = node;
  }
  int loss_node() const { return loss_node_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_[id]; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_inputs() const { return static_cast<int>(input_shapes_.size()); }
  const std::vector<int>& input_shape(int i) const { return input_shapes_[i]; }
  const std::string& input_name(int i) const { return input_names_[i]; }

  /// Registers this graph's parameters (zero-valued) in the store.
  template <typename Scalar>
  void declare_params(ParamStore<Scalar>& store) const {
    for (const auto& n : nodes_)
      if (n.kind == OpKind::kParam && !store.has(n.pname)) store.add(n.pname, n.pgroup, n.shape);
  }

 private:
  int push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size() - 1);
  }

  void check_id(int id, const char* who) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
      throw ConfigError(std::string(who) + ": invalid node id " + std::to_string(id));
  }

  const std::vector<int>& shape_of(int id, const char* what) const {
    check_id(id, what);
    return nodes_[id].shape;
  }

  void require_rank(int id, int rank, const char* op) const {
    const auto& s = shape_of(id, op);
    if (static_cast<int>(s.size()) != rank)
      throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                       shape_str(s));
  }

  int unary(OpKind k, int x) {
    Node n;
    n.kind = k;
    n.args = {x};
    n.shape = shape_of(x, op_name(k));
    return push(n);
  }

  int binary_same(OpKind k, int a, int b) {
    const auto& as = shape_of(a, op_name(k));
    const auto& bs = shape_of(b, op_name(k));
    if (as != bs)
      throw ShapeError(std::string(op_name(k)) + ": shape mismatch " + shape_str(as) + " vs " +
                       shape_str(bs));
    Node n;
    n.kind = k;
    n.args = {a, b};
    n.shape = as;
    return push(n);
  }

  std::vector<Node> nodes_;
  std::vector<std::string> input_names_;
  std::vector<std::vector<int>> input_shapes_;
  std::map<std::string, int> outputs_;
  std::vector<std::string> output_order_;
  int loss_node_ = -1;
};

/// Executes a Graph against a ParamStore: forward values, reverse-mode
/// gradients. Activation buffers persist across calls so per-sample reuse
/// inside a batch does not reallocate.
template <typename Scalar>
class GraphExec {
 public:
  GraphExec(const Graph& graph, ParamStore<Scalar>& store) : graph_(graph), store_(&store) {
    const int n = graph_.num_nodes();
    owned_.resize(n);
    vals_.assign(n, nullptr);
    grads_.resize(n);
    graph_.declare_params(store);
    for (int id = 0; id < n; ++id) {
      const auto& node = graph_.node(id);
      if (node.kind == OpKind::kParam) {
        auto& e = store.at(node.pname);
        if (e.value.shape() != node.shape)
          throw ShapeError("GraphExec: param " + node.pname + " stored as " +
                           shape_str(e.value.shape()) + ", declared " + shape_str(node.shape));
        vals_[id] = &e.value;
      }
    }
  }

  /// Runs every node in order. Input tensors are borrowed for the duration
  /// of subsequent value() calls.
  void forward(const std::vector<const Tensor<Scalar>*>& inputs) {
    if (static_cast<int>(inputs.size()) != graph_.num_inputs())
      throw ShapeError("forward: expected " + std::to_string(graph_.num_inputs()) + " inputs, got " +
                       std::to_string(inputs.size()));
    for (int i = 0; i < graph_.num_inputs(); ++i)
      if (inputs[i]->shape() != graph_.input_shape(i))
        throw ShapeError("forward: input '" + graph_.input_name(i) + "' is " +
                         shape_str(inputs[i]->shape()) + ", graph declares " +
                         shape_str(graph_.input_shape(i)));

    for (int id = 0; id < graph_.num_nodes(); ++id) {
      const auto& n = graph_.node(id);
      switch (n.kind) {
        case OpKind::kInput:
          vals_[id] = inputs[n.input_index];
          break;
        case OpKind::kParam:
          break;  // bound at construction
        case OpKind::kConv2d:
          owned_[id] = conv2d(val(n.args[0]), n.conv, val(n.args[1]),
                              n.conv.bias ? &val(n.args[2]) : nullptr);
          vals_[id] = &owned_[id];
          break;
        case OpKind::kRelu:
          owned_[id] = srn::relu(val(n.args[0]));
          vals_[id] = &owned_[id];
          break;
        case OpKind::kSigmoid:
          owned_[id] = srn::sigmoid(val(n.args[0]));
          vals_[id] = &owned_[id];
          break;
        case OpKind::kMultiply:
          owned_[id] = srn::multiply(val(n.args[0]), val(n.args[1]));
          vals_[id] = &owned_[id];
          break;
        case OpKind::kAdd:
          owned_[id] = srn::add(val(n.args[0]), val(n.args[1]));
          vals_[id] = &owned_[id];
          break;
        case OpKind::kSpatialSoftmax:
          owned_[id] = srn::spatial_softmax(val(n.args[0]));
          vals_[id] = &owned_[id];
          break;
        case OpKind::kWeightedPool:
          owned_[id] = srn::weighted_pool(val(n.args[0]), val(n.args[1]));
          vals_[id] = &owned_[id];
          break;
        case OpKind::kLinear:
          owned_[id] = srn::linear(val(n.args[0]), val(n.args[1]), val(n.args[2]));
          vals_[id] = &owned_[id];
          break;
        case OpKind::kSpatialSumPool:
          owned_[id] = srn::spatial_sum_pool(val(n.args[0]));
          vals_[id] = &owned_[id];
          break;
        case OpKind::kGlobalAvgPool:
          owned_[id] = srn::global_avg_pool(val(n.args[0]));
          vals_[id] = &owned_[id];
          break;
        case OpKind::kAvgPool2:
          owned_[id] = srn::avg_pool2(val(n.args[0]));
          vals_[id] = &owned_[id];
          break;
        case OpKind::kFlatten:
          owned_[id] = val(n.args[0]).reshaped(n.shape);
          vals_[id] = &owned_[id];
          break;
        case OpKind::kAffineCombine:
          owned_[id] = srn::affine_combine(val(n.args[0]), val(n.args[1]), n.alpha);
          vals_[id] = &owned_[id];
          break;
        case OpKind::kBceLoss:
          owned_[id] = srn::bce_loss(val(n.args[0]), val(n.args[1]),
                                     n.args.size() > 2 ? &val(n.args[2]) : nullptr);
          vals_[id] = &owned_[id];
          break;
      }
    }
    forward_done_ = true;
  }

  const Tensor<Scalar>& value(int id) const {
    if (!forward_done_ || vals_[id] == nullptr)
      throw Error("GraphExec: value requested before forward()");
    return *vals_[id];
  }
  const Tensor<Scalar>& value(const std::string& output) const {
    return value(graph_.output(output));
  }

  /// Reverse-mode sweep from a scalar node, seeded with `seed`. Parameter
  /// gradients accumulate (+=) into the store; call store.zero_grads() to
  /// start a fresh accumulation. Subgraphs that reach no unfrozen parameter
  /// are skipped.
  void backward(int loss_id, double seed = 1.0) {
    if (!forward_done_) throw Error("GraphExec: backward() before forward()");
    if (loss_id < 0 || loss_id >= graph_.num_nodes() ||
        graph_.node(loss_id).shape != std::vector<int>{1})
      throw ShapeError("backward: node " + std::to_string(loss_id) + " is not a scalar loss");

    refresh_masks(loss_id);
    const auto& live = live_cache_[loss_id];
    if (!live[loss_id]) return;  // nothing trainable below this loss

    for (int id = 0; id < graph_.num_nodes(); ++id)
      if (live[id] && graph_.node(id).kind != OpKind::kParam) {
        if (!grads_[id].same_shape(*vals_[id])) grads_[id] = Tensor<Scalar>(vals_[id]->shape());
        grads_[id].set_zero();
      }
    grads_[loss_id][0] = static_cast<Scalar>(seed);

    for (int id = loss_id; id >= 0; --id) {
      if (!live[id]) continue;
      const auto& n = graph_.node(id);
      if (n.kind == OpKind::kParam || n.kind == OpKind::kInput) continue;
      const Tensor<Scalar>& g = grads_[id];
      switch (n.kind) {
        case OpKind::kConv2d:
          conv2d_backward(val(n.args[0]), n.conv, val(n.args[1]), g, grad_ptr(n.args[0]),
                          grad_ptr(n.args[1]), n.conv.bias ? grad_ptr(n.args[2]) : nullptr);
          break;
        case OpKind::kRelu:
          if (auto* gx = grad_ptr(n.args[0])) relu_backward(val(n.args[0]), g, *gx);
          break;
        case OpKind::kSigmoid:
          if (auto* gx = grad_ptr(n.args[0])) sigmoid_backward(*vals_[id], g, *gx);
          break;
        case OpKind::kMultiply:
          multiply_backward(val(n.args[0]), val(n.args[1]), g, grad_ptr(n.args[0]),
                            grad_ptr(n.args[1]));
          break;
        case OpKind::kAdd:
          if (auto* ga = grad_ptr(n.args[0])) ga->array() += g.array();
          if (auto* gb = grad_ptr(n.args[1])) gb->array() += g.array();
          break;
        case OpKind::kSpatialSoftmax:
          if (auto* gz = grad_ptr(n.args[0])) spatial_softmax_backward(*vals_[id], g, *gz);
          break;
        case OpKind::kWeightedPool:
          weighted_pool_backward(val(n.args[0]), val(n.args[1]), g, grad_ptr(n.args[0]),
                                 grad_ptr(n.args[1]));
          break;
        case OpKind::kLinear:
          linear_backward(val(n.args[0]), val(n.args[1]), g, grad_ptr(n.args[0]),
                          grad_ptr(n.args[1]), grad_ptr(n.args[2]));
          break;
        case OpKind::kSpatialSumPool:
          if (auto* gm = grad_ptr(n.args[0])) spatial_sum_pool_backward(val(n.args[0]), g, *gm);
          break;
        case OpKind::kGlobalAvgPool:
          if (auto* gx = grad_ptr(n.args[0])) global_avg_pool_backward(val(n.args[0]), g, *gx);
          break;
        case OpKind::kAvgPool2:
          if (auto* gx = grad_ptr(n.args[0])) avg_pool2_backward(val(n.args[0]), g, *gx);
          break;
        case OpKind::kFlatten:
          if (auto* gx = grad_ptr(n.args[0]))
            gx->array() += g.array();  // same storage order, different shape
          break;
        case OpKind::kAffineCombine:
          if (auto* ga = grad_ptr(n.args[0]))
            ga->array() += static_cast<Scalar>(n.alpha) * g.array();
          if (auto* gb = grad_ptr(n.args[1]))
            gb->array() += static_cast<Scalar>(1.0 - n.alpha) * g.array();
          break;
        case OpKind::kBceLoss:
          if (auto* gl = grad_ptr(n.args[0]))
            bce_loss_backward(val(n.args[0]), val(n.args[1]),
                              n.args.size() > 2 ? &val(n.args[2]) : nullptr, g, *gl);
          break;
        default:
          break;
      }
    }
  }

  const Graph& graph() const { return graph_; }
  ParamStore<Scalar>& store() { return *store_; }

 private:
  const Tensor<Scalar>& val(int id) const { return *vals_[id]; }

  Tensor<Scalar>* grad_ptr(int id) {
    const auto& n = graph_.node(id);
    if (!needs_grad_[id]) return nullptr;
    if (n.kind == OpKind::kParam) return &store_->at(n.pname).grad;
    return &grads_[id];
  }

  void refresh_masks(int loss_id) {
    // needs_grad: the node's subtree contains an unfrozen parameter.
    const int n = graph_.num_nodes();
    needs_grad_.assign(n, 0);
    for (int id = 0; id < n; ++id) {
      const auto& node = graph_.node(id);
      if (node.kind == OpKind::kParam) {
        needs_grad_[id] = store_->group_frozen(node.pgroup) ? 0 : 1;
      } else {
        char v = 0;
        for (int a : node.args) v |= needs_grad_[a];
        // Loss targets/mask never receive gradients.
        if (node.kind == OpKind::kBceLoss) v = needs_grad_[node.args[0]];
        needs_grad_[id] = v;
      }
    }
    auto& live = live_cache_[loss_id];
    live.assign(n, 0);
    live[loss_id] = needs_grad_[loss_id];
    for (int id = loss_id; id >= 0; --id) {
      if (!live[id]) continue;
      for (int a : graph_.node(id).args)
        if (needs_grad_[a]) live[a] = 1;
    }
  }

  const Graph& graph_;
  ParamStore<Scalar>* store_;
  std::vector<Tensor<Scalar>> owned_;
  std::vector<const Tensor<Scalar>*> vals_;
  std::vector<Tensor<Scalar>> grads_;
  std::vector<char> needs_grad_;
  std::map<int, std::vector<char>> live_cache_;
  bool forward_done_ = false;
};

/// Gaussian fan-in initialization: weights (rank >= 2) get N(0, 2 / fan_in),
/// biases (rank 1) stay zero. Deterministic in registration order.
template <typename Scalar>
void init_params(ParamStore<Scalar>& store, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& e : store.entries()) {
    if (e.value.rank() < 2) {
      e.value.set_zero();
      continue;
    }
    const double fan_in = static_cast<double>(e.value.size()) / e.value.dim(0);
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (int i = 0; i < e.value.size(); ++i)
      e.value[i] = static_cast<Scalar>(normal(rng) * std_dev);
  }
}

/// One-shot convenience: forward pass, then exact reverse-mode gradients of
/// the graph's designated loss written into the store (replacing previous
/// gradients). Returns the marked outputs in declaration order.
template <typename Scalar>
std::vector<Tensor<Scalar>> forward_backward(const Graph& graph,
                                             const std::vector<Tensor<Scalar>>& inputs,
                                             ParamStore<Scalar>& params) {
  GraphExec<Scalar> exec(graph, params);
  std::vector<const Tensor<Scalar>*> ptrs;
  ptrs.reserve(inputs.size());
  for (const auto& t : inputs) ptrs.push_back(&t);
  exec.forward(ptrs);
  if (graph.loss_node() >= 0) {
    params.zero_grads();
    exec.backward(graph.loss_node());
  }
  std::vector<Tensor<Scalar>> outs;
  for (const auto& name : graph.output_names()) outs.push_back(exec.value(name));
  return outs;
}

}  // namespace srn

#endif  // SRN_GRAPH_HPP_
