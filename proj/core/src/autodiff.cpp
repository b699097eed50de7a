#include "lssat/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lssat/error.hpp"

namespace lssat {

std::string_view primitive_name(Primitive op) {
  switch (op) {
    case Primitive::kLeaf: return "leaf";
    case Primitive::kAdd: return "add";
    case Primitive::kSub: return "sub";
    case Primitive::kMul: return "mul";
    case Primitive::kScalarMul: return "scalar-mul";
    case Primitive::kMatMul: return "matmul";
    case Primitive::kTranspose: return "transpose";
    case Primitive::kReshape: return "reshape";
    case Primitive::kIndexGather: return "index-gather";
    case Primitive::kIndexScatter: return "index-scatter";
    case Primitive::kSoftmax: return "softmax";
    case Primitive::kLayerNorm: return "layer-norm";
    case Primitive::kGelu: return "gelu";
    case Primitive::kMean: return "mean";
    case Primitive::kMeanAxis: return "mean-axis";
    case Primitive::kSumOfSquares: return "sum-of-squares";
    case Primitive::kCrossEntropy: return "cross-entropy";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (graph == nullptr) throw Error("var: detached handle");
  return graph->value(id);
}

Var Graph::leaf(const Tensor& value) {
  nodes_.push_back(Node{Primitive::kLeaf, {}, value, value.requires_grad(), nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(Primitive op, std::vector<std::size_t> inputs, Tensor value,
                  BackwardFn backward_fn) {
  bool needs_grad = false;
  for (auto in : inputs) needs_grad = needs_grad || nodes_[in].requires_grad;
#ifndef NDEBUG
  if (!value.all_finite()) {
    throw NumericError(std::string(primitive_name(op)) + ": non-finite output");
  }
#endif
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), needs_grad,
                        needs_grad ? std::move(backward_fn) : nullptr});
  return Var{this, nodes_.size() - 1};
}

GradientMap backward(const Graph& graph, Var loss) {
  if (loss.graph != &graph) {
    throw Error("backward: loss is not a node of this graph");
  }
  const Tensor& lv = graph.value(loss.id);
  if (lv.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(lv.shape()));
  }
  GradientMap grads;
  if (!graph.requires_grad(loss.id)) return grads;

  Graph::Adjoints adjoint(graph.nodes_.size());
  adjoint[loss.id].assign(1, 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (adjoint[i].empty()) continue;
    const auto& node = graph.nodes_[i];
    if (node.op == Primitive::kLeaf) {
      if (node.requires_grad) {
        grads.emplace(i, Tensor(node.value.shape(), std::move(adjoint[i])));
      }
    } else if (node.backward) {
      node.backward(adjoint[i], adjoint);
    }
    adjoint[i] = {};
  }
  return grads;
}

namespace {

Graph& common_graph(Var a, Var b, std::string_view op) {
  if (a.graph == nullptr || a.graph != b.graph) {
    throw Error(std::string(op) + ": operands belong to different graphs");
  }
  return *a.graph;
}

std::vector<double>& slot(Graph::Adjoints& adj, std::size_t id, std::size_t n) {
  auto& v = adj[id];
  if (v.empty()) v.assign(n, 0.0);
  return v;
}

[[noreturn]] void shape_mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

// True when `suffix` equals the trailing dims of `full`.
bool is_suffix(const Shape& full, const Shape& suffix) {
  if (suffix.size() > full.size()) return false;
  return std::equal(suffix.begin(), suffix.end(), full.end() - suffix.size());
}

enum class Elementwise { kAdd, kSub, kMul };

Var elementwise(Var a, Var b, Elementwise kind) {
  Primitive op = kind == Elementwise::kAdd   ? Primitive::kAdd
                 : kind == Elementwise::kSub ? Primitive::kSub
                                             : Primitive::kMul;
  Graph& g = common_graph(a, b, primitive_name(op));
  const Tensor av = a.value();
  const Tensor bv = b.value();
  if (!is_suffix(av.shape(), bv.shape())) shape_mismatch(primitive_name(op), av.shape(), bv.shape());
  const std::size_t n = av.size();
  const std::size_t nb = bv.size();
  std::vector<double> out(n);
  auto x = av.data();
  auto y = bv.data();
  for (std::size_t i = 0; i < n; ++i) {
    double yi = y[i % nb];
    out[i] = kind == Elementwise::kAdd ? x[i] + yi : kind == Elementwise::kSub ? x[i] - yi : x[i] * yi;
  }
  const bool ga = g.requires_grad(a.id), gb = g.requires_grad(b.id);
  const std::size_t ia = a.id, ib = b.id;
  return g.record(op, {ia, ib}, Tensor(av.shape(), std::move(out)),
                  [=](std::span<const double> go, Graph::Adjoints& adj) {
                    auto x = av.data();
                    auto y = bv.data();
                    if (ga) {
                      auto& da = slot(adj, ia, n);
                      for (std::size_t i = 0; i < n; ++i) {
                        da[i] += kind == Elementwise::kMul ? go[i] * y[i % nb] : go[i];
                      }
                    }
                    if (gb) {
                      auto& db = slot(adj, ib, nb);
                      for (std::size_t i = 0; i < n; ++i) {
                        double d = kind == Elementwise::kAdd   ? go[i]
                                   : kind == Elementwise::kSub ? -go[i]
                                                               : go[i] * x[i];
                        db[i % nb] += d;
                      }
                    }
                  });
}

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a = A[i * k + p];
      const double* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
    }
  }
}

// C[m,k] += G[m,n] * B[k,n]^T
void gemm_nt(const double* G, const double* B, double* C, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = G + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* b = B + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += gi[j] * b[j];
      C[i * k + p] += s;
    }
  }
}

// C[k,n] += A[m,k]^T * G[m,n]
void gemm_tn(const double* A, const double* G, double* C, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = G + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a = A[i * k + p];
      double* c = C + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += a * gi[j];
    }
  }
}

std::vector<double> permute_data(std::span<const double> in, const Shape& in_shape,
                                 const std::vector<std::size_t>& perm) {
  const std::size_t r = in_shape.size();
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in_shape[i];
  Shape out_shape(r);
  std::vector<std::size_t> stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = in_shape[perm[i]];
    stride[i] = in_stride[perm[i]];
  }
  std::vector<double> out(in.size());
  std::vector<std::size_t> counter(r, 0);
  std::size_t offset = 0;
  for (std::size_t o = 0; o < out.size(); ++o) {
    out[o] = in[offset];
    for (std::size_t d = r; d-- > 0;) {
      if (++counter[d] < out_shape[d]) {
        offset += stride[d];
        break;
      }
      offset -= stride[d] * (out_shape[d] - 1);
      counter[d] = 0;
    }
  }
  return out;
}

struct RowSplit {
  std::size_t rows;
  std::size_t width;
};

RowSplit last_axis(const Shape& s, std::string_view op) {
  if (s.empty() || s.back() == 0) throw ShapeError(std::string(op) + ": needs a non-empty last axis");
  return {numel(s) / s.back(), s.back()};
}

}  // namespace

Var add(Var a, Var b) { return elementwise(a, b, Elementwise::kAdd); }
Var sub(Var a, Var b) { return elementwise(a, b, Elementwise::kSub); }
Var mul(Var a, Var b) { return elementwise(a, b, Elementwise::kMul); }

Var scalar_mul(Var a, double s) {
  Graph& g = *a.graph;
  const Tensor av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * av[i];
  const std::size_t ia = a.id, n = av.size();
  return g.record(Primitive::kScalarMul, {ia}, Tensor(av.shape(), std::move(out)),
                  [=](std::span<const double> go, Graph::Adjoints& adj) {
                    auto& da = slot(adj, ia, n);
                    for (std::size_t i = 0; i < n; ++i) da[i] += s * go[i];
                  });
}

Var matmul(Var a, Var b) {
  Graph& g = common_graph(a, b, "matmul");
  const Tensor av = a.value();
  const Tensor bv = b.value();
  const Shape& as = av.shape();
  const Shape& bs = bv.shape();
  if (as.size() < 2 || bs.size() < 2) shape_mismatch("matmul", as, bs);
  const std::size_t m = as[as.size() - 2], k = as.back();
  const std::size_t n = bs.back();
  if (bs[bs.size() - 2] != k) shape_mismatch("matmul", as, bs);
  const bool shared_rhs = bs.size() == 2;
  if (!shared_rhs &&
      (bs.size() != as.size() || !std::equal(as.begin(), as.end() - 2, bs.begin()))) {
    shape_mismatch("matmul", as, bs);
  }
  const std::size_t batch = av.size() / (m * k);
  Shape out_shape(as.begin(), as.end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(batch * m * n, 0.0);
  const double* A = av.data().data();
  const double* B = bv.data().data();
  if (shared_rhs) {
    gemm_nn(A, B, out.data(), batch * m, k, n);
  } else {
    for (std::size_t t = 0; t < batch; ++t) {
      gemm_nn(A + t * m * k, B + t * k * n, out.data() + t * m * n, m, k, n);
    }
  }
  const bool ga = g.requires_grad(a.id), gb = g.requires_grad(b.id);
  const std::size_t ia = a.id, ib = b.id;
  return g.record(
      Primitive::kMatMul, {ia, ib}, Tensor(std::move(out_shape), std::move(out)),
      [=](std::span<const double> go, Graph::Adjoints& adj) {
        const double* A = av.data().data();
        const double* B = bv.data().data();
        const double* G = go.data();
        if (ga) {
          auto& da = slot(adj, ia, av.size());
          if (shared_rhs) {
            gemm_nt(G, B, da.data(), batch * m, k, n);
          } else {
            for (std::size_t t = 0; t < batch; ++t) {
              gemm_nt(G + t * m * n, B + t * k * n, da.data() + t * m * k, m, k, n);
            }
          }
        }
        if (gb) {
          auto& db = slot(adj, ib, bv.size());
          if (shared_rhs) {
            gemm_tn(A, G, db.data(), batch * m, k, n);
          } else {
            for (std::size_t t = 0; t < batch; ++t) {
              gemm_tn(A + t * m * k, G + t * m * n, db.data() + t * k * n, m, k, n);
            }
          }
        }
      });
}

Var transpose(Var a, std::vector<std::size_t> perm) {
  Graph& g = *a.graph;
  const Tensor av = a.value();
  const Shape& s = av.shape();
  std::vector<std::size_t> check = perm;
  std::sort(check.begin(), check.end());
  bool valid = check.size() == s.size();
  for (std::size_t i = 0; valid && i < check.size(); ++i) valid = check[i] == i;
  if (!valid) {
    Shape p(perm.begin(), perm.end());
    throw ShapeError("transpose: permutation " + shape_str(p) + " invalid for shape " + shape_str(s));
  }
  Shape out_shape(s.size());
  std::vector<std::size_t> inverse(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out_shape[i] = s[perm[i]];
    inverse[perm[i]] = i;
  }
  auto out = permute_data(av.data(), s, perm);
  const std::size_t ia = a.id;
  return g.record(Primitive::kTranspose, {ia}, Tensor(out_shape, std::move(out)),
                  [=](std::span<const double> go, Graph::Adjoints& adj) {
                    auto back = permute_data(go, out_shape, inverse);
                    auto& da = slot(adj, ia, back.size());
                    for (std::size_t i = 0; i < back.size(); ++i) da[i] += back[i];
                  });
}

Var transpose(Var a, std::size_t axis0, std::size_t axis1) {
  std::vector<std::size_t> perm(a.shape().size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  if (axis0 >= perm.size() || axis1 >= perm.size()) {
    throw ShapeError("transpose: axis out of range for shape " + shape_str(a.shape()));
  }
  std::swap(perm[axis0], perm[axis1]);
  return transpose(a, std::move(perm));
}

Var reshape(Var a, Shape shape) {
  Graph& g = *a.graph;
  const Tensor av = a.value();
  if (numel(shape) != av.size()) shape_mismatch("reshape", av.shape(), shape);
  const std::size_t ia = a.id, n = av.size();
  return g.record(Primitive::kReshape, {ia}, av.reshaped(std::move(shape)).with_requires_grad(false),
                  [=](std::span<const double> go, Graph::Adjoints& adj) {
                    auto& da = slot(adj, ia, n);
                    for (std::size_t i = 0; i < n; ++i) da[i] += go[i];
                  });
}

Var index_gather(Var src, const IndexTable& idx) {
  Graph& g = *src.graph;
  const Tensor sv = src.value();
  const Shape& s = sv.shape();
  const bool shared = s.size() == 2;
  if (!(shared || (s.size() == 3 && s[0] == idx.batch)) || idx.rows.size() != idx.batch * idx.count) {
    throw ShapeError("index-gather: source " + shape_str(s) + " incompatible with index table " +
                     shape_str({idx.batch, idx.count}));
  }
  const std::size_t len = s[s.size() - 2], width = s.back();
  for (auto r : idx.rows) {
    if (r >= len) throw ShapeError("index-gather: row " + std::to_string(r) + " out of range " + std::to_string(len));
  }
  std::vector<double> out(idx.batch * idx.count * width);
  auto x = sv.data();
  for (std::size_t b = 0; b < idx.batch; ++b) {
    const std::size_t base = shared ? 0 : b * len * width;
    for (std::size_t j = 0; j < idx.count; ++j) {
      std::copy_n(x.begin() + base + idx.at(b, j) * width, width,
                  out.begin() + (b * idx.count + j) * width);
    }
  }
  const std::size_t is = src.id, n = sv.size();
  return g.record(Primitive::kIndexGather, {is}, Tensor({idx.batch, idx.count, width}, std::move(out)),
                  [=](std::span<const double> go, Graph::Adjoints& adj) {
                    auto& ds = slot(adj, is, n);
                    for (std::size_t b = 0; b < idx.batch; ++b) {
                      const std::size_t base = shared ? 0 : b * len * width;
                      for (std::size_t j = 0; j < idx.count; ++j) {
                        const double* gr = go.data() + (b * idx.count + j) * width;
                        double* d = ds.data() + base + idx.at(b, j) * width;
                        for (std::size_t f = 0; f < width; ++f) d[f] += gr[f];
                      }
                    }
                  });
}

Var index_scatter(Var src, const IndexTable& idx, std::size_t length) {
  Graph& g = *src.graph;
  const Tensor sv = src.value();
  const Shape& s = sv.shape();
  if (s.size() != 3 || s[0] != idx.batch || s[1] != idx.count || idx.rows.size() != idx.batch * idx.count) {
    throw ShapeError("index-scatter: source " + shape_str(s) + " incompatible with index table " +
                     shape_str({idx.batch, idx.count}));
  }
  for (auto r : idx.rows) {
    if (r >= length) throw ShapeError("index-scatter: row " + std::to_string(r) + " out of range " + std::to_string(length));
  }
  const std::size_t width = s[2];
  std::vector<double> out(idx.batch * length * width, 0.0);
  auto x = sv.data();
  for (std::size_t b = 0; b < idx.batch; ++b) {
    for (std::size_t j = 0; j < idx.count; ++j) {
      const double* from = x.data() + (b * idx.count + j) * width;
      double* to = out.data() + (b * length + idx.at(b, j)) * width;
      for (std::size_t f = 0; f < width; ++f) to[f] += from[f];
    }
  }
  const std::size_t is = src.id, n = sv.size();
  return g.record(Primitive::kIndexScatter, {is}, Tensor({idx.batch, length, width}, std::move(out)),
                  [=](std::span<const double> go, Graph::Adjoints& adj) {
                    auto& ds = slot(adj, is, n);
                    for (std::size_t b = 0; b < idx.batch; ++b) {
                      for (std::size_t j = 0; j < idx.count; ++j) {
                        const double* gr = go.data() + (b * length + idx.at(b, j)) * width;
                        double* d = ds.data() + (b * idx.count + j) * width;
                        for (std::size_t f = 0; f < width; ++f) d[f] += gr[f];
                      }
                    }
                  });
}

Var softmax(Var a) {
  Graph& g = *a.graph;
  const Tensor av = a.value();
  const auto [rows, width] = last_axis(av.shape(), "softmax");
  std::vector<double> out(av.size());
  auto x = av.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * width;
    double* yr = out.data() + r * width;
    const double mx = *std::max_element(xr, xr + width);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) z += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < width; ++j) yr[j] /= z;
  }
  Tensor y(av.shape(), std::move(out));
  const std::size_t ia = a.id;
  return g.record(Primitive::kSoftmax, {ia}, y,
                  [=, rows = rows, width = width](std::span<const double> go, Graph::Adjoints& adj) {
                    auto& da = slot(adj, ia, rows * width);
                    auto yv = y.data();
                    for (std::size_t r = 0; r < rows; ++r) {
                      const double* yr = yv.data() + r * width;
                      const double* gr = go.data() + r * width;
                      double dot = 0.0;
                      for (std::size_t j = 0; j < width; ++j) dot += gr[j] * yr[j];
                      for (std::size_t j = 0; j < width; ++j) da[r * width + j] += yr[j] * (gr[j] - dot);
                    }
                  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Graph& g = common_graph(x, gamma, "layer-norm");
  common_graph(x, beta, "layer-norm");
  const Tensor xv = x.value();
  const Tensor gv = gamma.value();
  const Tensor bv = beta.value();
  const auto [rows, width] = last_axis(xv.shape(), "layer-norm");
  if (gv.shape() != Shape{width}) shape_mismatch("layer-norm", xv.shape(), gv.shape());
  if (bv.shape() != Shape{width}) shape_mismatch("layer-norm", xv.shape(), bv.shape());
  std::vector<double> xhat(xv.size()), out(xv.size()), rstd(rows);
  auto xs = xv.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xs.data() + r * width;
    double mu = 0.0;
    for (std::size_t j = 0; j < width; ++j) mu += xr[j];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(width);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) {
      const double h = (xr[j] - mu) * rstd[r];
      xhat[r * width + j] = h;
      out[r * width + j] = h * gv[j] + bv[j];
    }
  }
  const bool gx = g.requires_grad(x.id), gg = g.requires_grad(gamma.id), gb = g.requires_grad(beta.id);
  const std::size_t ix = x.id, ig = gamma.id, ib = beta.id;
  return g.record(
      Primitive::kLayerNorm, {ix, ig, ib}, Tensor(xv.shape(), std::move(out)),
      [=, rows = rows, width = width, xhat = std::move(xhat), rstd = std::move(rstd)](
          std::span<const double> go, Graph::Adjoints& adj) {
        const double inv_w = 1.0 / static_cast<double>(width);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = go.data() + r * width;
          const double* hr = xhat.data() + r * width;
          if (gx) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
              const double d = gr[j] * gv[j];
              s1 += d;
              s2 += d * hr[j];
            }
            auto& dx = slot(adj, ix, rows * width);
            for (std::size_t j = 0; j < width; ++j) {
              const double d = gr[j] * gv[j];
              dx[r * width + j] += rstd[r] * (d - s1 * inv_w - hr[j] * s2 * inv_w);
            }
          }
          if (gg) {
            auto& dg = slot(adj, ig, width);
            for (std::size_t j = 0; j < width; ++j) dg[j] += gr[j] * hr[j];
          }
          if (gb) {
            auto& db = slot(adj, ib, width);
            for (std::size_t j = 0; j < width; ++j) db[j] += gr[j];
          }
        }
      });
}

Var gelu(Var a) {
  Graph& g = *a.graph;
  const Tensor av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = av[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  }
  const std::size_t ia = a.id;
  return g.record(Primitive::kGelu, {ia}, Tensor(av.shape(), std::move(out)),
                  [=](std::span<const double> go, Graph::Adjoints& adj) {
                    auto& da = slot(adj, ia, av.size());
                    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
                    for (std::size_t i = 0; i < da.size(); ++i) {
                      const double x = av[i];
                      const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
                      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
                      da[i] += go[i] * (cdf + x * pdf);
                    }
                  });
}

Var mean(Var a) {
  Graph& g = *a.graph;
  const Tensor av = a.value();
  if (av.size() == 0) throw ShapeError("mean: empty tensor");
  double s = 0.0;
  for (double v : av.data()) s += v;
  const std::size_t ia = a.id, n = av.size();
  return g.record(Primitive::kMean, {ia}, Tensor::scalar(s / static_cast<double>(n)),
                  [=](std::span<const double> go, Graph::Adjoints& adj) {
                    auto& da = slot(adj, ia, n);
                    const double d = go[0] / static_cast<double>(n);
                    for (auto& v : da) v += d;
                  });
}

Var mean_axis(Var a, std::size_t axis) {
  Graph& g = *a.graph;
  const Tensor av = a.value();
  const Shape& s = av.shape();
  if (axis >= s.size() || s[axis] == 0) {
    throw ShapeError("mean-axis: axis " + std::to_string(axis) + " invalid for shape " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += av[(o * len + l) * inner + i];
  const double inv = 1.0 / static_cast<double>(len);
  for (auto& v : out) v *= inv;
  const std::size_t ia = a.id, n = av.size();
  return g.record(Primitive::kMeanAxis, {ia}, Tensor(std::move(out_shape), std::move(out)),
                  [=](std::span<const double> go, Graph::Adjoints& adj) {
                    auto& da = slot(adj, ia, n);
                    for (std::size_t o = 0; o < outer; ++o)
                      for (std::size_t l = 0; l < len; ++l)
                        for (std::size_t i = 0; i < inner; ++i) da[(o * len + l) * inner + i] += go[o * inner + i] * inv;
                  });
}

Var sum_of_squares(Var a) {
  Graph& g = *a.graph;
  const Tensor av = a.value();
  double s = 0.0;
  for (double v : av.data()) s += v * v;
  const std::size_t ia = a.id, n = av.size();
  return g.record(Primitive::kSumOfSquares, {ia}, Tensor::scalar(s),
                  [=](std::span<const double> go, Graph::Adjoints& adj) {
                    auto& da = slot(adj, ia, n);
                    for (std::size_t i = 0; i < n; ++i) da[i] += 2.0 * av[i] * go[0];
                  });
}

Var cross_entropy(Var logits, std::span<const std::size_t> labels) {
  Graph& g = *logits.graph;
  const Tensor lv = logits.value();
  const Shape& s = lv.shape();
  if (s.size() != 2 || s[0] != labels.size() || s[0] == 0) {
    throw ShapeError("cross-entropy: logits " + shape_str(s) + " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = s[0], k = s[1];
  std::vector<double> prob(lv.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] >= k) {
      throw RangeError("cross-entropy: label " + std::to_string(labels[b]) + " outside [0," + std::to_string(k) + ")");
    }
    const double* x = lv.data().data() + b * k;
    const double mx = *std::max_element(x, x + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(x[j] - mx);
    for (std::size_t j = 0; j < k; ++j) prob[b * k + j] = std::exp(x[j] - mx) / z;
    loss += -(x[labels[b]] - mx - std::log(z));
  }
  loss /= static_cast<double>(batch);
  std::vector<std::size_t> y(labels.begin(), labels.end());
  const std::size_t il = logits.id;
  return g.record(Primitive::kCrossEntropy, {il}, Tensor::scalar(loss),
                  [=, prob = std::move(prob), y = std::move(y)](std::span<const double> go,
                                                                 Graph::Adjoints& adj) {
                    auto& dl = slot(adj, il, batch * k);
                    const double scale = go[0] / static_cast<double>(batch);
                    for (std::size_t b = 0; b < batch; ++b) {
                      for (std::size_t j = 0; j < k; ++j) {
                        dl[b * k + j] += scale * (prob[b * k + j] - (j == y[b] ? 1.0 : 0.0));
                      }
                    }
                  });
}

Var apply_primitive(Primitive op, std::span<const Var> in, const PrimitiveArgs& args) {
  auto arity = [&](std::size_t n) {
    if (in.size() != n) {
      throw ShapeError(std::string(primitive_name(op)) + ": expected " + std::to_string(n) +
                       " inputs, got " + std::to_string(in.size()));
    }
  };
  auto need_indices = [&] {
    if (args.indices == nullptr) throw Error(std::string(primitive_name(op)) + ": missing index table");
    return *args.indices;
  };
  switch (op) {
    case Primitive::kAdd: arity(2); return add(in[0], in[1]);
    case Primitive::kSub: arity(2); return sub(in[0], in[1]);
    case Primitive::kMul: arity(2); return mul(in[0], in[1]);
    case Primitive::kScalarMul: arity(1); return scalar_mul(in[0], args.scalar);
    case Primitive::kMatMul: arity(2); return matmul(in[0], in[1]);
    case Primitive::kTranspose: arity(1); return transpose(in[0], args.perm);
    case Primitive::kReshape: arity(1); return reshape(in[0], args.shape);
    case Primitive::kIndexGather: arity(1); return index_gather(in[0], need_indices());
    case Primitive::kIndexScatter: arity(1); return index_scatter(in[0], need_indices(), args.length);
    case Primitive::kSoftmax: arity(1); return softmax(in[0]);
    case Primitive::kLayerNorm: arity(3); return layer_norm(in[0], in[1], in[2], args.eps);
    case Primitive::kGelu: arity(1); return gelu(in[0]);
    case Primitive::kMean: arity(1); return mean(in[0]);
    case Primitive::kMeanAxis: arity(1); return mean_axis(in[0], args.axis);
    case Primitive::kSumOfSquares: arity(1); return sum_of_squares(in[0]);
    case Primitive::kCrossEntropy: arity(1); return cross_entropy(in[0], args.labels);
    case Primitive::kLeaf: break;
  }
  throw Error("apply_primitive: unknown primitive id " + std::to_string(static_cast<int>(op)));
}

}  // namespace lssat
