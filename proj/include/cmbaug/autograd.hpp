#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cmbaug/tensor.hpp"

namespace cmbaug::ad {

// ---------------------------------------------------------------------------
// Reverse-mode automatic differentiation over Tensor.
//
// Every primitive expresses its vector-Jacobian product in terms of other
// primitives, so running a backward pass with graph recording enabled yields
// gradients that are themselves differentiable. This closure property is what
// makes the WGAN gradient-penalty term (a function of an input gradient)
// trainable by a second backward pass.
// ---------------------------------------------------------------------------

class Var;
struct Node;

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
};

struct GradModeGuard {
    bool prev;
    explicit GradModeGuard(bool on) : prev(grad_mode()) { grad_mode() = on; }
    ~GradModeGuard() { grad_mode() = prev; }
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Var constant(Tensor value);
    static Var leaf(Tensor value, bool requires_grad);

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const;
    Tensor& mutable_value();
    const Shape& shape() const { return value().shape(); }
    long numel() const { return value().numel(); }
    double item() const { return value().item(); }

    bool requires_grad() const;
    void set_requires_grad(bool rg);

    /// Accumulated gradient after backward(); undefined Var if none.
    Var grad() const;
    void zero_grad();

    Node* node_ptr() const { return node_.get(); }
    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Returns per-parent gradient contributions. Entries for parents that do not
/// require grad may be left undefined.
using VjpFn = std::function<std::vector<Var>(const std::vector<Var>& parents, const Var& self,
                                             const Var& grad_out)>;

struct Node : std::enable_shared_from_this<Node> {
    Tensor value;
    bool requires_grad = false;
    std::vector<Var> parents;
    VjpFn vjp;                   // empty for leaves
    std::shared_ptr<Node> grad;  // set on leaves by backward()
};

inline Var Var::constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(std::move(n));
}

inline Var Var::leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
}

inline const Tensor& Var::value() const {
    if (!node_) throw std::logic_error("Var::value on undefined Var");
    return node_->value;
}

inline Tensor& Var::mutable_value() {
    if (!node_) throw std::logic_error("Var::mutable_value on undefined Var");
    return node_->value;
}

inline bool Var::requires_grad() const { return node_ && node_->requires_grad; }

inline void Var::set_requires_grad(bool rg) {
    if (!node_) throw std::logic_error("Var::set_requires_grad on undefined Var");
    if (node_->vjp && !rg)
        throw std::logic_error("cannot clear requires_grad on an interior node");
    node_->requires_grad = rg;
}

inline Var Var::grad() const {
    if (!node_ || !node_->grad) return Var();
    return Var(node_->grad);
}

inline void Var::zero_grad() {
    if (node_) node_->grad.reset();
}

inline Var make_op(Tensor value, std::vector<Var> parents, VjpFn vjp) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    if (grad_mode()) {
        bool rg = false;
        for (const auto& p : parents)
            if (p.requires_grad()) rg = true;
        if (rg) {
            n->requires_grad = true;
            n->parents = std::move(parents);
            n->vjp = std::move(vjp);
        }
    }
    return Var(std::move(n));
}

// -------------------------- elementwise primitives -------------------------

inline Var add(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    const double* bp = b.value().data();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) op[i] += bp[i];
    return make_op(std::move(out), {a, b},
                   [](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{g, g};
                   });
}

inline Var neg(const Var& a) {
    Tensor out = a.value();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) op[i] = -op[i];
    return make_op(std::move(out), {a},
                   [](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{neg(g)};
                   });
}

inline Var sub(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    const double* bp = b.value().data();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) op[i] -= bp[i];
    return make_op(std::move(out), {a, b},
                   [](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{g, neg(g)};
                   });
}

inline Var mul(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    const double* bp = b.value().data();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) op[i] *= bp[i];
    return make_op(std::move(out), {a, b},
                   [](const std::vector<Var>& ps, const Var&, const Var& g) {
                       std::vector<Var> gs(2);
                       if (ps[0].requires_grad()) gs[0] = mul(g, ps[1]);
                       if (ps[1].requires_grad()) gs[1] = mul(g, ps[0]);
                       return gs;
                   });
}

inline Var scale(const Var& a, double c) {
    Tensor out = a.value();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) op[i] *= c;
    return make_op(std::move(out), {a},
                   [c](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{scale(g, c)};
                   });
}

inline Var add_scalar(const Var& a, double c) {
    Tensor out = a.value();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) op[i] += c;
    return make_op(std::move(out), {a},
                   [](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{g};
                   });
}

inline Var abs(const Var& a) {
    Tensor out = a.value();
    Tensor sign(out.shape());
    double* op = out.data();
    double* sp = sign.data();
    for (long i = 0; i < out.numel(); ++i) {
        sp[i] = op[i] > 0.0 ? 1.0 : (op[i] < 0.0 ? -1.0 : 0.0);
        op[i] = std::abs(op[i]);
    }
    // |x| has zero curvature away from 0, so the sign factor is a constant.
    Var sgn = Var::constant(std::move(sign));
    return make_op(std::move(out), {a},
                   [sgn](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{mul(g, sgn)};
                   });
}

inline Var pow_const(const Var& a, double p) {
    Tensor out = a.value();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) op[i] = std::pow(op[i], p);
    return make_op(std::move(out), {a},
                   [p](const std::vector<Var>& ps, const Var&, const Var& g) {
                       return std::vector<Var>{mul(g, scale(pow_const(ps[0], p - 1.0), p))};
                   });
}

inline Var exp(const Var& a) {
    Tensor out = a.value();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) op[i] = std::exp(op[i]);
    return make_op(std::move(out), {a},
                   [](const std::vector<Var>&, const Var& self, const Var& g) {
                       return std::vector<Var>{mul(g, self)};
                   });
}

inline Var log(const Var& a) {
    Tensor out = a.value();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) op[i] = std::log(op[i]);
    return make_op(std::move(out), {a},
                   [](const std::vector<Var>& ps, const Var&, const Var& g) {
                       return std::vector<Var>{mul(g, pow_const(ps[0], -1.0))};
                   });
}

inline Var tanh(const Var& a) {
    Tensor out = a.value();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) op[i] = std::tanh(op[i]);
    return make_op(std::move(out), {a},
                   [](const std::vector<Var>&, const Var& self, const Var& g) {
                       // 1 - tanh^2
                       return std::vector<Var>{mul(g, add_scalar(neg(mul(self, self)), 1.0))};
                   });
}

inline Var sigmoid(const Var& a) {
    Tensor out = a.value();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) {
        const double x = op[i];
        op[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    return make_op(std::move(out), {a},
                   [](const std::vector<Var>&, const Var& self, const Var& g) {
                       return std::vector<Var>{mul(g, mul(self, add_scalar(neg(self), 1.0)))};
                   });
}

inline Var softplus(const Var& a) {
    Tensor out = a.value();
    double* op = out.data();
    for (long i = 0; i < out.numel(); ++i) {
        const double x = op[i];
        op[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    }
    return make_op(std::move(out), {a},
                   [](const std::vector<Var>& ps, const Var&, const Var& g) {
                       return std::vector<Var>{mul(g, sigmoid(ps[0]))};
                   });
}

inline Var leaky_relu(const Var& a, double slope) {
    Tensor out = a.value();
    Tensor factor(out.shape());
    double* op = out.data();
    double* fp = factor.data();
    for (long i = 0; i < out.numel(); ++i) {
        const bool pos = op[i] > 0.0;
        fp[i] = pos ? 1.0 : slope;
        if (!pos) op[i] *= slope;
    }
    Var fac = Var::constant(std::move(factor));
    return make_op(std::move(out), {a},
                   [fac](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{mul(g, fac)};
                   });
}

/// clamp(x, 0, 1); derivative taken as 1 on the closed interval [0, 1].
inline Var clamp01(const Var& a) {
    Tensor out = a.value();
    Tensor factor(out.shape());
    double* op = out.data();
    double* fp = factor.data();
    for (long i = 0; i < out.numel(); ++i) {
        const double x = op[i];
        fp[i] = (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0;
        op[i] = std::min(1.0, std::max(0.0, x));
    }
    Var fac = Var::constant(std::move(factor));
    return make_op(std::move(out), {a},
                   [fac](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{mul(g, fac)};
                   });
}

// ----------------------------- reductions ----------------------------------

inline Var broadcast_all(const Var& s, const Shape& target);

inline Var sum_all(const Var& a) {
    Tensor out = Tensor::scalar(a.value().sum());
    Shape in_shape = a.shape();
    return make_op(std::move(out), {a},
                   [in_shape](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{broadcast_all(g, in_shape)};
                   });
}

inline Var broadcast_all(const Var& s, const Shape& target) {
    if (s.numel() != 1) throw std::invalid_argument("broadcast_all: source must be scalar");
    Tensor out = Tensor::full(target, s.value()[0]);
    return make_op(std::move(out), {s},
                   [](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{sum_all(g)};
                   });
}

inline Var mean_all(const Var& a) {
    const long n = a.numel();
    return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

inline Var sample_broadcast(const Var& s, const Shape& target);

/// (N, ...) -> (N): sum over all but the leading dimension.
inline Var sample_sum(const Var& a) {
    const Shape& sh = a.shape();
    const long n = sh.at(0);
    const long per = a.numel() / n;
    Tensor out(Shape{n});
    const double* ap = a.value().data();
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (long j = 0; j < per; ++j) acc += ap[i * per + j];
        out[i] = acc;
    }
    Shape in_shape = sh;
    return make_op(std::move(out), {a},
                   [in_shape](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{sample_broadcast(g, in_shape)};
                   });
}

/// (N) -> (N, ...): replicate each sample's scalar across its block.
inline Var sample_broadcast(const Var& s, const Shape& target) {
    const long n = target.at(0);
    if (s.numel() != n) throw std::invalid_argument("sample_broadcast: size mismatch");
    Tensor out(target);
    const long per = out.numel() / n;
    const double* sp = s.value().data();
    double* op = out.data();
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < per; ++j) op[i * per + j] = sp[i];
    return make_op(std::move(out), {s},
                   [](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{sample_sum(g)};
                   });
}

inline Var sample_mean(const Var& a) {
    const long per = a.numel() / a.shape().at(0);
    return scale(sample_sum(a), 1.0 / static_cast<double>(per));
}

// --------------------------- channel ops (NCZYX) ---------------------------

inline void check_5d(const Var& a, const char* op) {
    if (a.shape().size() != 5)
        throw std::invalid_argument(std::string(op) + ": expected 5D NCZYX tensor, got " +
                                    shape_str(a.shape()));
}

inline Var slice_ch(const Var& a, long c0, long c1);

inline Var pad_ch(const Var& a, long c0, long c_total) {
    check_5d(a, "pad_ch");
    const Shape& sh = a.shape();
    Shape osh = sh;
    osh[1] = c_total;
    Tensor out(osh);
    const long spatial = sh[2] * sh[3] * sh[4];
    const double* ap = a.value().data();
    double* op = out.data();
    for (long n = 0; n < sh[0]; ++n)
        for (long c = 0; c < sh[1]; ++c) {
            const double* src = ap + (n * sh[1] + c) * spatial;
            double* dst = op + (n * c_total + c0 + c) * spatial;
            std::copy(src, src + spatial, dst);
        }
    const long c_in = sh[1];
    return make_op(std::move(out), {a},
                   [c0, c_in](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{slice_ch(g, c0, c0 + c_in)};
                   });
}

inline Var slice_ch(const Var& a, long c0, long c1) {
    check_5d(a, "slice_ch");
    const Shape& sh = a.shape();
    if (c0 < 0 || c1 > sh[1] || c0 >= c1) throw std::invalid_argument("slice_ch: bad range");
    Shape osh = sh;
    osh[1] = c1 - c0;
    Tensor out(osh);
    const long spatial = sh[2] * sh[3] * sh[4];
    const double* ap = a.value().data();
    double* op = out.data();
    for (long n = 0; n < sh[0]; ++n)
        for (long c = c0; c < c1; ++c) {
            const double* src = ap + (n * sh[1] + c) * spatial;
            double* dst = op + (n * (c1 - c0) + (c - c0)) * spatial;
            std::copy(src, src + spatial, dst);
        }
    const long c_total = sh[1];
    return make_op(std::move(out), {a},
                   [c0, c_total](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{pad_ch(g, c0, c_total)};
                   });
}

inline Var concat_ch(const Var& a, const Var& b) {
    check_5d(a, "concat_ch");
    check_5d(b, "concat_ch");
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3] || sa[4] != sb[4])
        throw std::invalid_argument("concat_ch: incompatible shapes " + shape_str(sa) + " vs " +
                                    shape_str(sb));
    Shape osh = sa;
    osh[1] = sa[1] + sb[1];
    Tensor out(osh);
    const long spatial = sa[2] * sa[3] * sa[4];
    double* op = out.data();
    const double* ap = a.value().data();
    const double* bp = b.value().data();
    for (long n = 0; n < sa[0]; ++n) {
        std::copy(ap + n * sa[1] * spatial, ap + (n + 1) * sa[1] * spatial,
                  op + n * osh[1] * spatial);
        std::copy(bp + n * sb[1] * spatial, bp + (n + 1) * sb[1] * spatial,
                  op + (n * osh[1] + sa[1]) * spatial);
    }
    const long ca = sa[1], cb = sb[1];
    return make_op(std::move(out), {a, b},
                   [ca, cb](const std::vector<Var>& ps, const Var&, const Var& g) {
                       std::vector<Var> gs(2);
                       if (ps[0].requires_grad()) gs[0] = slice_ch(g, 0, ca);
                       if (ps[1].requires_grad()) gs[1] = slice_ch(g, ca, ca + cb);
                       return gs;
                   });
}

inline Var channel_broadcast(const Var& b, const Shape& target);

/// (N,C,Z,Y,X) -> (C): sum over batch and spatial dims.
inline Var channel_sum(const Var& a) {
    check_5d(a, "channel_sum");
    const Shape& sh = a.shape();
    Tensor out(Shape{sh[1]});
    const long spatial = sh[2] * sh[3] * sh[4];
    const double* ap = a.value().data();
    for (long n = 0; n < sh[0]; ++n)
        for (long c = 0; c < sh[1]; ++c) {
            double acc = 0.0;
            const double* src = ap + (n * sh[1] + c) * spatial;
            for (long j = 0; j < spatial; ++j) acc += src[j];
            out[c] += acc;
        }
    Shape in_shape = sh;
    return make_op(std::move(out), {a},
                   [in_shape](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{channel_broadcast(g, in_shape)};
                   });
}

inline Var channel_broadcast(const Var& b, const Shape& target) {
    if (target.size() != 5 || b.numel() != target[1])
        throw std::invalid_argument("channel_broadcast: size mismatch");
    Tensor out(target);
    const long spatial = target[2] * target[3] * target[4];
    const double* bp = b.value().data();
    double* op = out.data();
    for (long n = 0; n < target[0]; ++n)
        for (long c = 0; c < target[1]; ++c) {
            double* dst = op + (n * target[1] + c) * spatial;
            std::fill(dst, dst + spatial, bp[c]);
        }
    return make_op(std::move(out), {b},
                   [](const std::vector<Var>&, const Var&, const Var& g) {
                       return std::vector<Var>{channel_sum(g)};
                   });
}

/// x + b with b broadcast per channel.
inline Var bias_add(const Var& x, const Var& b) {
    check_5d(x, "bias_add");
    const Shape& sh = x.shape();
    if (b.numel() != sh[1]) throw std::invalid_argument("bias_add: bias size mismatch");
    Tensor out = x.value();
    const long spatial = sh[2] * sh[3] * sh[4];
    const double* bp = b.value().data();
    double* op = out.data();
    for (long n = 0; n < sh[0]; ++n)
        for (long c = 0; c < sh[1]; ++c) {
            double* dst = op + (n * sh[1] + c) * spatial;
            const double bv = bp[c];
            for (long j = 0; j < spatial; ++j) dst[j] += bv;
        }
    return make_op(std::move(out), {x, b},
                   [](const std::vector<Var>& ps, const Var&, const Var& g) {
                       std::vector<Var> gs(2);
                       if (ps[0].requires_grad()) gs[0] = g;
                       if (ps[1].requires_grad()) gs[1] = channel_sum(g);
                       return gs;
                   });
}

inline Var detach(const Var& a) { return Var::constant(a.value()); }

// ----------------------------- backward engine -----------------------------

namespace detail {

inline std::vector<Node*> topo_order(Node* root) {
    // iterative post-order DFS over the requires_grad subgraph;
    // result lists parents before children
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    if (!root->requires_grad) return order;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        Frame& top = stack.back();
        if (top.next_parent < top.node->parents.size()) {
            Node* p = top.node->parents[top.next_parent].node_ptr();
            ++top.next_parent;  // advance before any push invalidates `top`
            if (p && p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(top.node);
            stack.pop_back();
        }
    }
    return order;
}

inline std::unordered_map<Node*, Var> run_backward(const Var& root, bool create_graph) {
    if (root.numel() != 1) throw std::invalid_argument("backward: root must be scalar");
    std::unordered_map<Node*, Var> grads;
    if (!root.requires_grad()) return grads;
    std::vector<Node*> order = topo_order(root.node_ptr());
    grads[root.node_ptr()] = Var::constant(Tensor::scalar(1.0));
    GradModeGuard guard(create_graph);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        auto git = grads.find(node);
        if (git == grads.end() || !node->vjp) continue;
        Var self(node->shared_from_this());
        std::vector<Var> contribs = node->vjp(node->parents, self, git->second);
        if (contribs.size() != node->parents.size())
            throw std::logic_error("vjp returned wrong number of gradients");
        for (std::size_t i = 0; i < node->parents.size(); ++i) {
            Node* p = node->parents[i].node_ptr();
            if (!p || !p->requires_grad) continue;
            if (!contribs[i].defined())
                throw std::logic_error("vjp missing gradient for parent that requires grad");
            auto pit = grads.find(p);
            if (pit == grads.end())
                grads[p] = contribs[i];
            else
                pit->second = add(pit->second, contribs[i]);
        }
    }
    return grads;
}

}  // namespace detail

/// Gradients of a scalar `root` w.r.t. each Var in `wrt`. With `create_graph`
/// the returned Vars are differentiable expressions themselves.
inline std::vector<Var> grad(const Var& root, const std::vector<Var>& wrt,
                             bool create_graph = false) {
    auto grads = detail::run_backward(root, create_graph);
    std::vector<Var> out;
    out.reserve(wrt.size());
    for (const auto& w : wrt) {
        auto it = grads.find(w.node_ptr());
        if (it != grads.end())
            out.push_back(it->second);
        else
            out.push_back(Var::constant(Tensor::zeros(w.shape())));
    }
    return out;
}

/// Backward pass accumulating gradients into every reachable leaf that
/// requires grad (training entry point).
inline void backward(const Var& root) {
    auto grads = detail::run_backward(root, /*create_graph=*/false);
    for (auto& [node, g] : grads) {
        if (node->vjp) continue;  // interior node
        if (!node->requires_grad) continue;
        if (node->grad) {
            NoGradGuard ng;
            node->grad = add(Var(node->grad), g).node();
        } else {
            node->grad = g.node();
        }
    }
}

}  // namespace cmbaug::ad
