#pragma once

// Dense n-dimensional array with reverse-mode automatic differentiation.
// Values are immutable during forward evaluation; each op records its parents
// and a vector-Jacobian closure, and backward() walks the graph once in
// reverse topological order. Real = double by default; float is an opt-in
// for callers that trade precision for speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "omnisal/common/error.hpp"
#include "omnisal/common/linear_map.hpp"

namespace omnisal::ag {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <class Real>
struct NodeT {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<std::shared_ptr<NodeT>> parents;          // grad-requiring parents only
  std::function<void(const NodeT&)> backward_fn;        // pulls from this->grad

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), Real(0));
  }
};

template <class Real>
class TensorT {
 public:
  using Node = NodeT<Real>;

  TensorT() = default;
  explicit TensorT(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static TensorT zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), Real(0), requires_grad);
  }

  static TensorT filled(Shape shape, Real v, bool requires_grad = false) {
    check_shape(shape);
    auto n = std::make_shared<Node>();
    n->value.assign(shape_size(shape), v);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return TensorT(std::move(n));
  }

  static TensorT scalar(Real v, bool requires_grad = false) {
    return from_data({}, {v}, requires_grad);
  }

  static TensorT from_data(Shape shape, std::vector<Real> data, bool requires_grad = false) {
    check_shape(shape);
    if (shape_size(shape) != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return TensorT(std::move(n));
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  // Freezing/unfreezing a leaf; takes effect for graphs built afterwards.
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  const std::vector<Real>& values() const { return node_->value; }
  // Direct mutation is reserved for the training loop (optimizer updates) and
  // test scaffolding; never mutate a tensor that is part of a live graph.
  std::vector<Real>& raw_values() { return node_->value; }

  Real item() const {
    if (size() != 1) throw ShapeError("item() requires a one-element tensor");
    return node_->value[0];
  }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  const std::vector<Real>& grad() const {
    if (!has_grad()) throw DataError("tensor has no gradient");
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->value.size(), Real(0)); }

  TensorT detach() const { return from_data(node_->shape, node_->value, false); }

  std::shared_ptr<Node> node() const { return node_; }

  // Reverse-mode sweep from a scalar output. Gradients accumulate, so clear
  // leaf grads between independent backward passes.
  void backward() const {
    if (size() != 1) throw ShapeError("backward() requires a scalar loss");
    if (!node_->requires_grad) return;
    std::vector<Node*> order;
    topo_sort(order);
    node_->ensure_grad();
    node_->grad[0] += Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backward_fn) n->backward_fn(*n);
    }
  }

 private:
  static void check_shape(const Shape& shape) {
    for (std::size_t e : shape) {
      if (e == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
    }
  }

  void topo_sort(std::vector<Node*>& order) const {
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node* p = n->parents[next++].get();
        if (!visited.count(p)) {
          visited.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node> node_;
};

using Tensor = TensorT<double>;
using Tensor32 = TensorT<float>;

namespace detail {

template <class Real>
TensorT<Real> make_op(Shape shape, std::vector<Real> value,
                      std::vector<TensorT<Real>> inputs,
                      std::function<void(const NodeT<Real>&)> backward_fn) {
  auto n = std::make_shared<NodeT<Real>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.defined() && in.requires_grad()) {
      n->requires_grad = true;
      n->parents.push_back(in.node());
    }
  }
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return TensorT<Real>(std::move(n));
}

// Broadcast classes: identical shapes, scalar rhs, or rhs equal to a trailing
// suffix of lhs (leading-batch expansion). Anything else is a shape error.
enum class Bcast { kSame, kScalar, kSuffix };

template <class Real>
Bcast bcast_kind(const TensorT<Real>& a, const TensorT<Real>& b, const char* op) {
  if (a.shape() == b.shape()) return Bcast::kSame;
  if (b.size() == 1) return Bcast::kScalar;
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (bs.size() <= as.size() &&
      std::equal(bs.rbegin(), bs.rend(), as.rbegin())) {
    return Bcast::kSuffix;
  }
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(as) +
                   " vs " + shape_str(bs));
}

template <class Real>
void accumulate(const std::shared_ptr<NodeT<Real>>& p, const std::vector<Real>& contrib) {
  if (!p->requires_grad) return;
  p->ensure_grad();
  for (std::size_t i = 0; i < contrib.size(); ++i) p->grad[i] += contrib[i];
}

struct AxisSplit {
  std::size_t outer, extent, inner;
};

inline AxisSplit split_axis(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ShapeError("axis out of range");
  AxisSplit sp{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <class Real>
TensorT<Real> add(const TensorT<Real>& a, const TensorT<Real>& b) {
  using detail::Bcast;
  const Bcast k = detail::bcast_kind(a, b, "add");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<Real> out(av.size());
  const std::size_t bn = bv.size();
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = av[i] + (k == Bcast::kSame ? bv[i] : bv[i % bn]);
  }
  auto an = a.node(); auto bnode = b.node();
  return detail::make_op<Real>(a.shape(), std::move(out), {a, b},
      [an, bnode, k, bn](const NodeT<Real>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bnode->requires_grad) {
          bnode->ensure_grad();
          if (k == Bcast::kSame) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) bnode->grad[i] += self.grad[i];
          } else {
            for (std::size_t i = 0; i < self.grad.size(); ++i) bnode->grad[i % bn] += self.grad[i];
          }
        }
      });
}

template <class Real>
TensorT<Real> sub(const TensorT<Real>& a, const TensorT<Real>& b) {
  using detail::Bcast;
  const Bcast k = detail::bcast_kind(a, b, "sub");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<Real> out(av.size());
  const std::size_t bn = bv.size();
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = av[i] - (k == Bcast::kSame ? bv[i] : bv[i % bn]);
  }
  auto an = a.node(); auto bnode = b.node();
  return detail::make_op<Real>(a.shape(), std::move(out), {a, b},
      [an, bnode, k, bn](const NodeT<Real>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bnode->requires_grad) {
          bnode->ensure_grad();
          if (k == Bcast::kSame) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) bnode->grad[i] -= self.grad[i];
          } else {
            for (std::size_t i = 0; i < self.grad.size(); ++i) bnode->grad[i % bn] -= self.grad[i];
          }
        }
      });
}

template <class Real>
TensorT<Real> mul(const TensorT<Real>& a, const TensorT<Real>& b) {
  using detail::Bcast;
  const Bcast k = detail::bcast_kind(a, b, "mul");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<Real> out(av.size());
  const std::size_t bn = bv.size();
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = av[i] * (k == Bcast::kSame ? bv[i] : bv[i % bn]);
  }
  auto an = a.node(); auto bnode = b.node();
  return detail::make_op<Real>(a.shape(), std::move(out), {a, b},
      [an, bnode, k, bn](const NodeT<Real>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) {
            an->grad[i] += self.grad[i] * (k == Bcast::kSame ? bnode->value[i] : bnode->value[i % bn]);
          }
        }
        if (bnode->requires_grad) {
          bnode->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) {
            bnode->grad[k == Bcast::kSame ? i : i % bn] += self.grad[i] * an->value[i];
          }
        }
      });
}

template <class Real>
TensorT<Real> div(const TensorT<Real>& a, const TensorT<Real>& b) {
  using detail::Bcast;
  const Bcast k = detail::bcast_kind(a, b, "div");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<Real> out(av.size());
  const std::size_t bn = bv.size();
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = av[i] / (k == Bcast::kSame ? bv[i] : bv[i % bn]);
  }
  auto an = a.node(); auto bnode = b.node();
  return detail::make_op<Real>(a.shape(), std::move(out), {a, b},
      [an, bnode, k, bn](const NodeT<Real>& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const Real bi = (k == Bcast::kSame) ? bnode->value[i] : bnode->value[i % bn];
          if (an->requires_grad) {
            an->ensure_grad();
            an->grad[i] += self.grad[i] / bi;
          }
          if (bnode->requires_grad) {
            bnode->ensure_grad();
            bnode->grad[k == Bcast::kSame ? i : i % bn] -= self.grad[i] * an->value[i] / (bi * bi);
          }
        }
      });
}

template <class Real>
TensorT<Real> scale(const TensorT<Real>& x, Real c) {
  const auto& xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * c;
  auto xn = x.node();
  return detail::make_op<Real>(x.shape(), std::move(out), {x},
      [xn, c](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * c;
      });
}

template <class Real>
TensorT<Real> add_scalar(const TensorT<Real>& x, Real c) {
  const auto& xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] + c;
  auto xn = x.node();
  return detail::make_op<Real>(x.shape(), std::move(out), {x},
      [xn](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
      });
}

template <class Real>
TensorT<Real> neg(const TensorT<Real>& x) { return scale(x, Real(-1)); }

// ---------------------------------------------------------------------------
// Shape manipulation

template <class Real>
TensorT<Real> reshape(const TensorT<Real>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw ShapeError("reshape: size mismatch " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  auto xn = x.node();
  return detail::make_op<Real>(std::move(shape), x.values(), {x},
      [xn](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
      });
}

template <class Real>
TensorT<Real> transpose(const TensorT<Real>& x, std::size_t a0, std::size_t a1) {
  const Shape& s = x.shape();
  if (a0 >= s.size() || a1 >= s.size()) throw ShapeError("transpose: axis out of range");
  Shape os = s;
  std::swap(os[a0], os[a1]);
  const std::size_t r = s.size();
  std::vector<std::size_t> in_strides(r, 1), out_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * s[i];
  for (std::size_t i = r; i-- > 1;) out_strides[i - 1] = out_strides[i] * os[i];

  // Precompute the source index for every destination index once; the same
  // table drives forward and backward.
  std::vector<std::uint32_t> src(x.size());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t o = 0; o < x.size(); ++o) {
    std::size_t rem = o, in_off = 0;
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t c = rem / out_strides[i];
      rem %= out_strides[i];
      std::size_t in_axis = i;
      if (i == a0) in_axis = a1;
      else if (i == a1) in_axis = a0;
      in_off += c * in_strides[in_axis];
    }
    src[o] = static_cast<std::uint32_t>(in_off);
  }
  const auto& xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = xv[src[o]];
  auto xn = x.node();
  return detail::make_op<Real>(std::move(os), std::move(out), {x},
      [xn, src = std::move(src)](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t o = 0; o < self.grad.size(); ++o) xn->grad[src[o]] += self.grad[o];
      });
}

template <class Real>
TensorT<Real> slice(const TensorT<Real>& x, std::size_t axis, std::size_t start, std::size_t len) {
  const auto sp = detail::split_axis(x.shape(), axis);
  if (start + len > sp.extent || len == 0) throw ShapeError("slice: range out of bounds");
  Shape os = x.shape();
  os[axis] = len;
  const auto& xv = x.values();
  std::vector<Real> out(sp.outer * len * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t e = 0; e < len; ++e) {
      const Real* srcp = &xv[(o * sp.extent + start + e) * sp.inner];
      Real* dstp = &out[(o * len + e) * sp.inner];
      std::copy(srcp, srcp + sp.inner, dstp);
    }
  }
  auto xn = x.node();
  return detail::make_op<Real>(std::move(os), std::move(out), {x},
      [xn, sp, start, len](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t o = 0; o < sp.outer; ++o) {
          for (std::size_t e = 0; e < len; ++e) {
            const Real* g = &self.grad[(o * len + e) * sp.inner];
            Real* dst = &xn->grad[(o * sp.extent + start + e) * sp.inner];
            for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += g[i];
          }
        }
      });
}

template <class Real>
TensorT<Real> concat(const std::vector<TensorT<Real>>& xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat: empty input list");
  const Shape& s0 = xs[0].shape();
  std::size_t total = 0;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    if (s.size() != s0.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != s0[i]) throw ShapeError("concat: extent mismatch");
    }
    total += s[axis];
  }
  Shape os = s0;
  os[axis] = total;
  const auto sp0 = detail::split_axis(os, axis);
  std::vector<Real> out(shape_size(os));
  std::vector<std::size_t> extents(xs.size());
  for (std::size_t xi = 0; xi < xs.size(); ++xi) extents[xi] = xs[xi].extent(axis);
  std::size_t base = 0;
  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    const auto& xv = xs[xi].values();
    const std::size_t ext = extents[xi];
    for (std::size_t o = 0; o < sp0.outer; ++o) {
      const Real* srcp = &xv[o * ext * sp0.inner];
      Real* dstp = &out[(o * total + base) * sp0.inner];
      std::copy(srcp, srcp + ext * sp0.inner, dstp);
    }
    base += ext;
  }
  std::vector<std::shared_ptr<NodeT<Real>>> nodes;
  for (const auto& x : xs) nodes.push_back(x.node());
  return detail::make_op<Real>(std::move(os), std::move(out), xs,
      [nodes, extents, sp0, total](const NodeT<Real>& self) {
        std::size_t base = 0;
        for (std::size_t xi = 0; xi < nodes.size(); ++xi) {
          const std::size_t ext = extents[xi];
          if (nodes[xi]->requires_grad) {
            nodes[xi]->ensure_grad();
            for (std::size_t o = 0; o < sp0.outer; ++o) {
              const Real* g = &self.grad[(o * total + base) * sp0.inner];
              Real* dst = &nodes[xi]->grad[o * ext * sp0.inner];
              for (std::size_t i = 0; i < ext * sp0.inner; ++i) dst[i] += g[i];
            }
          }
          base += ext;
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions

template <class Real>
TensorT<Real> sum(const TensorT<Real>& x) {
  Real acc = 0;
  for (Real v : x.values()) acc += v;
  auto xn = x.node();
  return detail::make_op<Real>({}, {acc}, {x},
      [xn](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (auto& g : xn->grad) g += self.grad[0];
      });
}

template <class Real>
TensorT<Real> mean(const TensorT<Real>& x) {
  const Real inv = Real(1) / static_cast<Real>(x.size());
  Real acc = 0;
  for (Real v : x.values()) acc += v;
  acc *= inv;
  auto xn = x.node();
  return detail::make_op<Real>({}, {acc}, {x},
      [xn, inv](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (auto& g : xn->grad) g += self.grad[0] * inv;
      });
}

template <class Real>
TensorT<Real> sum_axis(const TensorT<Real>& x, std::size_t axis) {
  const auto sp = detail::split_axis(x.shape(), axis);
  Shape os = x.shape();
  os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  const auto& xv = x.values();
  std::vector<Real> out(sp.outer * sp.inner, Real(0));
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t e = 0; e < sp.extent; ++e) {
      const Real* srcp = &xv[(o * sp.extent + e) * sp.inner];
      Real* dstp = &out[o * sp.inner];
      for (std::size_t i = 0; i < sp.inner; ++i) dstp[i] += srcp[i];
    }
  }
  auto xn = x.node();
  return detail::make_op<Real>(std::move(os), std::move(out), {x},
      [xn, sp](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t o = 0; o < sp.outer; ++o) {
          for (std::size_t e = 0; e < sp.extent; ++e) {
            const Real* g = &self.grad[o * sp.inner];
            Real* dst = &xn->grad[(o * sp.extent + e) * sp.inner];
            for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += g[i];
          }
        }
      });
}

template <class Real>
TensorT<Real> mean_axis(const TensorT<Real>& x, std::size_t axis) {
  const Real inv = Real(1) / static_cast<Real>(x.extent(axis));
  return scale(sum_axis(x, axis), inv);
}

template <class Real>
TensorT<Real> reduce_max(const TensorT<Real>& x) {
  const auto& xv = x.values();
  std::size_t arg = 0;
  for (std::size_t i = 1; i < xv.size(); ++i) {
    if (xv[i] > xv[arg]) arg = i;  // first maximum wins on ties
  }
  auto xn = x.node();
  return detail::make_op<Real>({}, {xv[arg]}, {x},
      [xn, arg](const NodeT<Real>& self) {
        xn->ensure_grad();
        xn->grad[arg] += self.grad[0];
      });
}

template <class Real>
TensorT<Real> reduce_min(const TensorT<Real>& x) {
  const auto& xv = x.values();
  std::size_t arg = 0;
  for (std::size_t i = 1; i < xv.size(); ++i) {
    if (xv[i] < xv[arg]) arg = i;
  }
  auto xn = x.node();
  return detail::make_op<Real>({}, {xv[arg]}, {x},
      [xn, arg](const NodeT<Real>& self) {
        xn->ensure_grad();
        xn->grad[arg] += self.grad[0];
      });
}

// ---------------------------------------------------------------------------
// Nonlinearities

template <class Real>
TensorT<Real> relu(const TensorT<Real>& x) {
  const auto& xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > Real(0) ? xv[i] : Real(0);
  auto xn = x.node();
  return detail::make_op<Real>(x.shape(), std::move(out), {x},
      [xn](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          if (xn->value[i] > Real(0)) xn->grad[i] += self.grad[i];
        }
      });
}

// Overflow-safe softplus: max(x,0) + log1p(exp(-|x|)).
template <class Real>
TensorT<Real> softplus(const TensorT<Real>& x) {
  const auto& xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const Real v = xv[i];
    out[i] = std::max(v, Real(0)) + std::log1p(std::exp(-std::abs(v)));
  }
  auto xn = x.node();
  return detail::make_op<Real>(x.shape(), std::move(out), {x},
      [xn](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const Real v = xn->value[i];
          const Real sig = Real(1) / (Real(1) + std::exp(-v));
          xn->grad[i] += self.grad[i] * sig;
        }
      });
}

template <class Real>
TensorT<Real> log_op(const TensorT<Real>& x) {
  const auto& xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::log(xv[i]);
  auto xn = x.node();
  return detail::make_op<Real>(x.shape(), std::move(out), {x},
      [xn](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          xn->grad[i] += self.grad[i] / xn->value[i];
        }
      });
}

template <class Real>
TensorT<Real> exp_op(const TensorT<Real>& x) {
  const auto& xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::exp(xv[i]);
  std::vector<Real> value = out;  // copy before the lambda consumes `out`
  auto xn = x.node();
  return detail::make_op<Real>(x.shape(), std::move(value), {x},
      [xn, y = std::move(out)](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * y[i];
      });
}

template <class Real>
TensorT<Real> sqrt_op(const TensorT<Real>& x) {
  const auto& xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::sqrt(xv[i]);
  std::vector<Real> value = out;
  auto xn = x.node();
  return detail::make_op<Real>(x.shape(), std::move(value), {x},
      [xn, y = std::move(out)](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          xn->grad[i] += self.grad[i] / (Real(2) * y[i]);
        }
      });
}

// Elementwise minimum; ties route the gradient to the first argument.
template <class Real>
TensorT<Real> minimum(const TensorT<Real>& a, const TensorT<Real>& b) {
  if (a.shape() != b.shape()) throw ShapeError("minimum: shape mismatch");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] <= bv[i] ? av[i] : bv[i];
  auto an = a.node(); auto bn = b.node();
  return detail::make_op<Real>(a.shape(), std::move(out), {a, b},
      [an, bn](const NodeT<Real>& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          if (an->value[i] <= bn->value[i]) {
            if (an->requires_grad) { an->ensure_grad(); an->grad[i] += self.grad[i]; }
          } else {
            if (bn->requires_grad) { bn->ensure_grad(); bn->grad[i] += self.grad[i]; }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Linear algebra

template <class Real>
TensorT<Real> matmul(const TensorT<Real>& a, const TensorT<Real>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.extent(0), kk = a.extent(1), n = b.extent(1);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<Real> out(m * n, Real(0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < kk; ++k) {
      const Real aik = av[i * kk + k];
      const Real* brow = &bv[k * n];
      Real* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  auto an = a.node(); auto bn = b.node();
  return detail::make_op<Real>({m, n}, std::move(out), {a, b},
      [an, bn, m, kk, n](const NodeT<Real>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          // dA = G B^T
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t k = 0; k < kk; ++k) {
              Real acc = 0;
              const Real* grow = &self.grad[i * n];
              const Real* brow = &bn->value[k * n];
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              an->grad[i * kk + k] += acc;
            }
          }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          // dB = A^T G
          for (std::size_t k = 0; k < kk; ++k) {
            for (std::size_t i = 0; i < m; ++i) {
              const Real aik = an->value[i * kk + k];
              const Real* grow = &self.grad[i * n];
              Real* brow = &bn->grad[k * n];
              for (std::size_t j = 0; j < n; ++j) brow[j] += aik * grow[j];
            }
          }
        }
      });
}

// x: [..., d_in] flattened to rows; W: [d_in, d_out]; optional bias [d_out].
template <class Real>
TensorT<Real> linear(const TensorT<Real>& x, const TensorT<Real>& w, const TensorT<Real>& b = {}) {
  if (x.rank() < 1 || w.rank() != 2) throw ShapeError("linear: bad ranks");
  const std::size_t d_in = x.shape().back();
  if (d_in != w.extent(0)) throw ShapeError("linear: feature dim mismatch");
  const std::size_t rows = x.size() / d_in;
  Shape os = x.shape();
  os.back() = w.extent(1);
  auto y = matmul(reshape(x, {rows, d_in}), w);
  if (b.defined()) y = add(y, b);
  return reshape(y, std::move(os));
}

// ---------------------------------------------------------------------------
// Softmax / layer norm

template <class Real>
TensorT<Real> softmax(const TensorT<Real>& x, std::size_t axis) {
  const auto sp = detail::split_axis(x.shape(), axis);
  if (sp.extent == 0) throw ShapeError("softmax: empty axis");
  const auto& xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.extent * sp.inner + i;
      Real mx = xv[base];
      for (std::size_t e = 1; e < sp.extent; ++e) mx = std::max(mx, xv[base + e * sp.inner]);
      Real z = 0;
      for (std::size_t e = 0; e < sp.extent; ++e) {
        const Real v = std::exp(xv[base + e * sp.inner] - mx);
        out[base + e * sp.inner] = v;
        z += v;
      }
      for (std::size_t e = 0; e < sp.extent; ++e) out[base + e * sp.inner] /= z;
    }
  }
  std::vector<Real> value = out;
  auto xn = x.node();
  return detail::make_op<Real>(x.shape(), std::move(value), {x},
      [xn, sp, y = std::move(out)](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t o = 0; o < sp.outer; ++o) {
          for (std::size_t i = 0; i < sp.inner; ++i) {
            const std::size_t base = o * sp.extent * sp.inner + i;
            Real dot = 0;
            for (std::size_t e = 0; e < sp.extent; ++e) {
              const std::size_t k = base + e * sp.inner;
              dot += self.grad[k] * y[k];
            }
            for (std::size_t e = 0; e < sp.extent; ++e) {
              const std::size_t k = base + e * sp.inner;
              xn->grad[k] += y[k] * (self.grad[k] - dot);
            }
          }
        }
      });
}

// Normalizes along `axis` with population variance, then applies the affine
// map gamma/beta (each of length extent(axis)).
template <class Real>
TensorT<Real> layer_norm(const TensorT<Real>& x, std::size_t axis,
                         const TensorT<Real>& gamma, const TensorT<Real>& beta,
                         Real eps = Real(1e-5)) {
  const auto sp = detail::split_axis(x.shape(), axis);
  if (gamma.size() != sp.extent || beta.size() != sp.extent) {
    throw ShapeError("layer_norm: gamma/beta must match the normalized extent");
  }
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  const std::size_t rows = sp.outer * sp.inner;
  std::vector<Real> xhat(xv.size());
  std::vector<Real> inv_sigma(rows);
  std::vector<Real> out(xv.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.extent * sp.inner + i;
      Real mu = 0;
      for (std::size_t e = 0; e < sp.extent; ++e) mu += xv[base + e * sp.inner];
      mu /= static_cast<Real>(sp.extent);
      Real var = 0;
      for (std::size_t e = 0; e < sp.extent; ++e) {
        const Real d = xv[base + e * sp.inner] - mu;
        var += d * d;
      }
      var /= static_cast<Real>(sp.extent);
      const Real is = Real(1) / std::sqrt(var + eps);
      inv_sigma[o * sp.inner + i] = is;
      for (std::size_t e = 0; e < sp.extent; ++e) {
        const std::size_t k = base + e * sp.inner;
        xhat[k] = (xv[k] - mu) * is;
        out[k] = xhat[k] * gv[e] + bv[e];
      }
    }
  }
  auto xn = x.node(); auto gn = gamma.node(); auto bn = beta.node();
  return detail::make_op<Real>(x.shape(), std::move(out), {x, gamma, beta},
      [xn, gn, bn, sp, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](const NodeT<Real>& self) {
        const std::size_t n = sp.extent;
        for (std::size_t o = 0; o < sp.outer; ++o) {
          for (std::size_t i = 0; i < sp.inner; ++i) {
            const std::size_t base = o * n * sp.inner + i;
            const Real is = inv_sigma[o * sp.inner + i];
            // Row sums for the normalization Jacobian.
            Real sum_gg = 0, sum_ggx = 0;
            for (std::size_t e = 0; e < n; ++e) {
              const std::size_t k = base + e * sp.inner;
              const Real gg = self.grad[k] * gn->value[e];
              sum_gg += gg;
              sum_ggx += gg * xhat[k];
            }
            if (xn->requires_grad) {
              xn->ensure_grad();
              for (std::size_t e = 0; e < n; ++e) {
                const std::size_t k = base + e * sp.inner;
                const Real gg = self.grad[k] * gn->value[e];
                xn->grad[k] += is * (gg - sum_gg / static_cast<Real>(n) -
                                     xhat[k] * sum_ggx / static_cast<Real>(n));
              }
            }
            if (gn->requires_grad) {
              gn->ensure_grad();
              for (std::size_t e = 0; e < n; ++e) {
                const std::size_t k = base + e * sp.inner;
                gn->grad[e] += self.grad[k] * xhat[k];
              }
            }
            if (bn->requires_grad) {
              bn->ensure_grad();
              for (std::size_t e = 0; e < n; ++e) {
                bn->grad[e] += self.grad[base + e * sp.inner];
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Convolution / upsampling (channel-first layout)

// x: [C_in, H, W]; w: [C_out, C_in, kh, kw]; b: [C_out] or undefined.
// Cross-correlation convention (no kernel flip).
template <class Real>
TensorT<Real> conv2d(const TensorT<Real>& x, const TensorT<Real>& w,
                     const TensorT<Real>& b, std::size_t stride, std::size_t pad) {
  if (x.rank() != 3 || w.rank() != 4) throw ShapeError("conv2d: expects x[C,H,W], w[O,C,kh,kw]");
  const std::size_t ci = x.extent(0), h = x.extent(1), ww = x.extent(2);
  const std::size_t co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  if (w.extent(1) != ci) throw ShapeError("conv2d: channel mismatch");
  if (b.defined() && b.size() != co) throw ShapeError("conv2d: bias size mismatch");
  if (stride == 0) throw ShapeError("conv2d: zero stride");
  if (h + 2 * pad < kh || ww + 2 * pad < kw) throw ShapeError("conv2d: kernel larger than input");
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (ww + 2 * pad - kw) / stride + 1;

  // Kernel-outer loops with precomputed valid output ranges keep the inner
  // loops branch-free and unit-stride in the output.
  struct ConvGeom {
    std::size_t ci, h, w, co, kh, kw, oh, ow, stride;
    std::ptrdiff_t pad;
    // Valid output range [lo, hi) for a kernel offset k along an axis of
    // input extent n and output extent m.
    void range(std::size_t k, std::size_t n, std::size_t m, std::size_t& lo, std::size_t& hi) const {
      const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - pad;
      std::ptrdiff_t l = off < 0 ? (-off + static_cast<std::ptrdiff_t>(stride) - 1) /
                                       static_cast<std::ptrdiff_t>(stride)
                                 : 0;
      // Largest o with o*stride + off <= n - 1.
      std::ptrdiff_t hh = (static_cast<std::ptrdiff_t>(n) - 1 - off) /
                              static_cast<std::ptrdiff_t>(stride) + 1;
      hh = std::min<std::ptrdiff_t>(hh, static_cast<std::ptrdiff_t>(m));
      lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(l, 0));
      hi = static_cast<std::size_t>(std::max<std::ptrdiff_t>(hh, static_cast<std::ptrdiff_t>(lo)));
    }
  };
  const ConvGeom geo{ci, h, ww, co, kh, kw, oh, ow, stride, static_cast<std::ptrdiff_t>(pad)};

  const auto& xv = x.values();
  const auto& wv = w.values();
  std::vector<Real> out(co * oh * ow, Real(0));
  for (std::size_t oc = 0; oc < co; ++oc) {
    if (b.defined()) {
      const Real bias = b.values()[oc];
      Real* plane = &out[oc * oh * ow];
      for (std::size_t i = 0; i < oh * ow; ++i) plane[i] = bias;
    }
    for (std::size_t ic = 0; ic < ci; ++ic) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        std::size_t oy_lo, oy_hi;
        geo.range(ky, h, oh, oy_lo, oy_hi);
        for (std::size_t kx = 0; kx < kw; ++kx) {
          std::size_t ox_lo, ox_hi;
          geo.range(kx, ww, ow, ox_lo, ox_hi);
          const Real wval = wv[((oc * ci + ic) * kh + ky) * kw + kx];
          if (wval == Real(0) || ox_hi == ox_lo) continue;
          for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
            const std::size_t iy = oy * stride + ky - pad;
            const Real* xrow = &xv[(ic * h + iy) * ww + (ox_lo * stride + kx - pad)];
            Real* orow = &out[(oc * oh + oy) * ow + ox_lo];
            const std::size_t n = ox_hi - ox_lo;
            for (std::size_t i = 0; i < n; ++i) orow[i] += wval * xrow[i * stride];
          }
        }
      }
    }
  }
  auto xn = x.node(); auto wn = w.node();
  auto bnode = b.defined() ? b.node() : nullptr;
  std::vector<TensorT<Real>> ins = {x, w};
  if (b.defined()) ins.push_back(b);
  return detail::make_op<Real>({co, oh, ow}, std::move(out), std::move(ins),
      [xn, wn, bnode, geo](const NodeT<Real>& self) {
        const auto [ci, h, ww, co, kh, kw, oh, ow, stride, pad] = geo;
        if (bnode && bnode->requires_grad) {
          bnode->ensure_grad();
          for (std::size_t oc = 0; oc < co; ++oc) {
            Real acc = 0;
            const Real* g = &self.grad[oc * oh * ow];
            for (std::size_t i = 0; i < oh * ow; ++i) acc += g[i];
            bnode->grad[oc] += acc;
          }
        }
        const bool need_dx = xn->requires_grad;
        const bool need_dw = wn->requires_grad;
        if (need_dx) xn->ensure_grad();
        if (need_dw) wn->ensure_grad();
        if (!need_dx && !need_dw) return;
        for (std::size_t oc = 0; oc < co; ++oc) {
          for (std::size_t ic = 0; ic < ci; ++ic) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
              std::size_t oy_lo, oy_hi;
              geo.range(ky, h, oh, oy_lo, oy_hi);
              for (std::size_t kx = 0; kx < kw; ++kx) {
                std::size_t ox_lo, ox_hi;
                geo.range(kx, ww, ow, ox_lo, ox_hi);
                const std::size_t wi = ((oc * ci + ic) * kh + ky) * kw + kx;
                const std::size_t n = ox_hi - ox_lo;
                if (n == 0) continue;
                if (need_dx) {
                  const Real wval = wn->value[wi];
                  if (wval != Real(0)) {
                    for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
                      const std::size_t iy = oy * stride + ky - pad;
                      Real* dxrow = &xn->grad[(ic * h + iy) * ww + (ox_lo * stride + kx - pad)];
                      const Real* grow = &self.grad[(oc * oh + oy) * ow + ox_lo];
                      for (std::size_t i = 0; i < n; ++i) dxrow[i * stride] += wval * grow[i];
                    }
                  }
                }
                if (need_dw) {
                  Real acc = 0;
                  for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
                    const std::size_t iy = oy * stride + ky - pad;
                    const Real* xrow = &xn->value[(ic * h + iy) * ww + (ox_lo * stride + kx - pad)];
                    const Real* grow = &self.grad[(oc * oh + oy) * ow + ox_lo];
                    for (std::size_t i = 0; i < n; ++i) acc += xrow[i * stride] * grow[i];
                  }
                  wn->grad[wi] += acc;
                }
              }
            }
          }
        }
      });
}

// Nearest-neighbour x2 upsampling of [C, H, W].
template <class Real>
TensorT<Real> upsample_nearest2(const TensorT<Real>& x) {
  if (x.rank() != 3) throw ShapeError("upsample_nearest2: expects [C,H,W]");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const auto& xv = x.values();
  std::vector<Real> out(c * 4 * h * w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const Real v = xv[(ch * h + i) * w + j];
        const std::size_t base = (ch * 2 * h + 2 * i) * 2 * w + 2 * j;
        out[base] = v;
        out[base + 1] = v;
        out[base + 2 * w] = v;
        out[base + 2 * w + 1] = v;
      }
    }
  }
  auto xn = x.node();
  return detail::make_op<Real>({c, 2 * h, 2 * w}, std::move(out), {x},
      [xn, c, h, w](const NodeT<Real>& self) {
        xn->ensure_grad();
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
              const std::size_t base = (ch * 2 * h + 2 * i) * 2 * w + 2 * j;
              xn->grad[(ch * h + i) * w + j] +=
                  self.grad[base] + self.grad[base + 1] +
                  self.grad[base + 2 * w] + self.grad[base + 2 * w + 1];
            }
          }
        }
      });
}

// Applies a fixed sparse linear operator to each channel of x.
// x: [C, in_size] or [in_size]; output matches with out_size.
template <class Real>
TensorT<Real> apply_linear_map(std::shared_ptr<const LinearMap> map, const TensorT<Real>& x) {
  const bool has_channels = x.rank() == 2;
  if (!has_channels && x.rank() != 1) throw ShapeError("apply_linear_map: expects [C,n] or [n]");
  const std::size_t c = has_channels ? x.extent(0) : 1;
  const std::size_t n = has_channels ? x.extent(1) : x.extent(0);
  if (n != map->in_size) throw ShapeError("apply_linear_map: input size mismatch");
  const auto& xv = x.values();
  std::vector<Real> out(c * map->out_size);
  std::vector<double> xin(n), yout(map->out_size);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < n; ++i) xin[i] = static_cast<double>(xv[ch * n + i]);
    map->apply(xin.data(), yout.data());
    for (std::size_t i = 0; i < map->out_size; ++i) out[ch * map->out_size + i] = static_cast<Real>(yout[i]);
  }
  Shape os = has_channels ? Shape{c, map->out_size} : Shape{map->out_size};
  auto xn = x.node();
  return detail::make_op<Real>(std::move(os), std::move(out), {x},
      [xn, map, c, n](const NodeT<Real>& self) {
        xn->ensure_grad();
        std::vector<double> gin(map->out_size), gout(n);
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t i = 0; i < map->out_size; ++i) {
            gin[i] = static_cast<double>(self.grad[ch * map->out_size + i]);
          }
          std::fill(gout.begin(), gout.end(), 0.0);
          map->apply_transpose_add(gin.data(), gout.data());
          for (std::size_t i = 0; i < n; ++i) xn->grad[ch * n + i] += static_cast<Real>(gout[i]);
        }
      });
}

}  // namespace omnisal::ag
