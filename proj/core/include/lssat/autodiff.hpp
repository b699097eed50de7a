#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "lssat/tensor.hpp"

namespace lssat {

enum class Primitive {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kScalarMul,
  kMatMul,
  kTranspose,
  kReshape,
  kIndexGather,
  kIndexScatter,
  kSoftmax,
  kLayerNorm,
  kGelu,
  kMean,
  kMeanAxis,
  kSumOfSquares,
  kCrossEntropy,
};

std::string_view primitive_name(Primitive op);

// Per-sample row indices into a token axis: rows[b] lists the positions
// selected for sample b. Every sample selects the same number of rows.
struct IndexTable {
  std::size_t batch = 0;
  std::size_t count = 0;
  std::vector<std::size_t> rows;  // batch * count, sample-major

  std::size_t at(std::size_t b, std::size_t j) const { return rows[b * count + j]; }
};

class Graph;

// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

using GradientMap = std::map<std::size_t, Tensor>;

// Tape of primitive applications in creation order. Inputs of a node always
// precede it, so the tape is acyclic by construction and reverse creation
// order is a valid topological order for the backward sweep.
class Graph {
 public:
  // Accumulates into adjoint[input] given the node's output adjoint.
  using Adjoints = std::vector<std::vector<double>>;
  using BackwardFn = std::function<void(std::span<const double> grad_out, Adjoints& adjoint)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf node. Tensors flagged requires_grad are parameters and receive
  // gradients from backward(); everything else is a constant.
  Var leaf(const Tensor& value);
  Var constant(Tensor value) { return leaf(value.with_requires_grad(false)); }

  Var record(Primitive op, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  Primitive op(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  friend GradientMap backward(const Graph& graph, Var loss);

 private:
  struct Node {
    Primitive op;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;  // stable addresses: value() references survive later records
};

// Reverse sweep from a scalar loss. Returns d(loss)/d(leaf) keyed by node id
// for every parameter leaf reachable from the loss. Does not mutate the
// graph, so repeated calls return identical maps.
GradientMap backward(const Graph& graph, Var loss);

// --- primitives --------------------------------------------------------
//
// Broadcasting is limited to leading-batch expansion: in add/sub/mul the
// second operand may have a shape equal to a trailing suffix of the first
// operand's shape; in matmul the right operand may be a plain matrix applied
// to every leading batch of the left operand. Anything else is a ShapeError.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scalar_mul(Var a, double s);
// [..., m, k] x [k, n] or [..., m, k] x [..., k, n] -> [..., m, n]
Var matmul(Var a, Var b);
// Output axis i takes input axis perm[i].
Var transpose(Var a, std::vector<std::size_t> perm);
Var transpose(Var a, std::size_t axis0, std::size_t axis1);
Var reshape(Var a, Shape shape);
// src [S, F] (shared by every sample) or [B, S, F] -> [B, count, F]
Var index_gather(Var src, const IndexTable& idx);
// src [B, count, F] -> [B, length, F], zero at unselected rows
Var index_scatter(Var src, const IndexTable& idx, std::size_t length);
Var softmax(Var a);
// Normalizes over the last axis, then applies gamma/beta of that length.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-6);
// Exact Gauss-error-function form.
Var gelu(Var a);
Var mean(Var a);
Var mean_axis(Var a, std::size_t axis);
Var sum_of_squares(Var a);
// Mean over the batch of -log softmax(logits)[label]; logits [B, K].
Var cross_entropy(Var logits, std::span<const std::size_t> labels);

// Extra arguments for the runtime-dispatched entry point.
struct PrimitiveArgs {
  double scalar = 0.0;
  Shape shape;
  std::vector<std::size_t> perm;
  std::size_t axis = 0;
  std::size_t length = 0;
  double eps = 1e-6;
  const IndexTable* indices = nullptr;
  std::span<const std::size_t> labels;
};

Var apply_primitive(Primitive op, std::span<const Var> inputs, const PrimitiveArgs& args = {});

}  // namespace lssat
