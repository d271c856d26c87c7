#include "mvst/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mvst/rng.hpp"

namespace mvst {

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    bool leaf = true;
    bool consumed = false;
    std::uint64_t generation = 0;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;

    std::span<double> grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

struct Tape {
    std::vector<NodePtr> ops;
    std::uint64_t generation = 1;
    bool enabled = true;
};

thread_local Tape g_tape;

std::size_t product(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

std::size_t rows_of(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
std::size_t cols_of(const Shape& s) {
    if (s.size() == 2) return s[1];
    if (s.size() == 1) return s[0];
    return 1;
}

NodePtr make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
    for (auto e : shape)
        if (e == 0) throw TensorError("tensor extents must be positive, got " + shape_str(shape));
    if (product(shape) != data.size())
        throw TensorError("data length " + std::to_string(data.size()) + " does not match shape " +
                          shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    return n;
}

void check_finite(const char* op, const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) throw NonFiniteError(std::string(op) + ": non-finite value produced");
}

/// Wraps a freshly computed value; records it on the tape when any input
/// needs gradients.
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<NodePtr> inputs, std::function<void(Node&)> backward_fn) {
    check_finite(op, data);
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    const bool needs = g_tape.enabled &&
                       std::any_of(inputs.begin(), inputs.end(), [](const NodePtr& p) { return p->requires_grad; });
    if (needs) {
        n->requires_grad = true;
        n->leaf = false;
        n->inputs = std::move(inputs);
        n->backward_fn = std::move(backward_fn);
        n->generation = g_tape.generation;
        g_tape.ops.push_back(n);
    }
    return Tensor(std::move(n));
}

const NodePtr& node_of(const Tensor& t) {
    if (!t.defined()) throw TensorError("use of an undefined tensor");
    return t.node();
}

void require_matrix(const char* op, const Tensor& t) {
    if (t.dim() != 2) throw TensorError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw TensorError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
}

}  // namespace

// --- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = product(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    check_finite("Tensor::from", values);
    return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_of(*this)->shape; }
std::size_t Tensor::size() const { return node_of(*this)->data.size(); }
std::size_t Tensor::rows() const { return rows_of(shape()); }
std::size_t Tensor::cols() const { return cols_of(shape()); }
std::span<const double> Tensor::data() const { return node_of(*this)->data; }
std::span<double> Tensor::mutable_data() { return node_of(*this)->data; }

double Tensor::item() const {
    if (size() != 1) throw TensorError("item() on a tensor of shape " + shape_str(shape()));
    return data()[0];
}

bool Tensor::requires_grad() const { return node_of(*this)->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    auto& n = node_of(*this);
    if (!n->leaf) throw TensorError("requires_grad can only be changed on leaf tensors");
    n->requires_grad = on;
}

bool Tensor::has_grad() const { return !node_of(*this)->grad.empty(); }

std::vector<double> Tensor::grad() const {
    const auto& n = node_of(*this);
    return n->grad.empty() ? std::vector<double>(n->data.size(), 0.0) : n->grad;
}

std::span<double> Tensor::mutable_grad() { return node_of(*this)->grad_buffer(); }

void Tensor::zero_grad() {
    auto& g = node_of(*this)->grad;
    std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(make_leaf(shape(), node_of(*this)->data, false)); }

// --- tape ------------------------------------------------------------------

NoGradGuard::NoGradGuard() : previous_(g_tape.enabled) { g_tape.enabled = false; }
NoGradGuard::~NoGradGuard() { g_tape.enabled = previous_; }

bool grad_enabled() { return g_tape.enabled; }
std::size_t tape_size() { return g_tape.ops.size(); }

void clear_tape() {
    for (auto& op : g_tape.ops) {
        op->inputs.clear();
        op->backward_fn = nullptr;
        op->grad.clear();
        op->consumed = true;
    }
    g_tape.ops.clear();
    ++g_tape.generation;
}

void backward(const Tensor& loss) {
    const auto& root = node_of(loss);
    if (root->data.size() != 1) throw TensorError("backward: loss must be a scalar, got " + shape_str(root->shape));
    if (!root->requires_grad) throw TensorError("backward: loss does not depend on any requires_grad tensor");
    if (root->leaf) {
        root->grad_buffer()[0] += 1.0;
        return;
    }
    if (root->consumed || root->generation != g_tape.generation)
        throw TensorError("backward: tape already consumed");

    root->grad_buffer()[0] = 1.0;
    for (auto it = g_tape.ops.rbegin(); it != g_tape.ops.rend(); ++it) {
        Node& n = **it;
        if (n.grad.empty() || !n.backward_fn) continue;
        n.backward_fn(n);
    }
    clear_tape();
}

// --- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix("matmul", a);
    require_matrix("matmul", b);
    const auto m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw TensorError("matmul: inner dimensions differ " + shape_str(a.shape()) + " · " + shape_str(b.shape()));
    std::vector<double> out(m * n);
    Map(out.data(), m, n).noalias() = MapC(a.data().data(), m, k) * MapC(b.data().data(), k, n);
    auto pa = node_of(a), pb = node_of(b);
    return make_result("matmul", {m, n}, std::move(out), {pa, pb}, [pa, pb, m, k, n](Node& self) {
        MapC dc(self.grad.data(), m, n);
        if (pa->requires_grad)
            Map(pa->grad_buffer().data(), m, k).noalias() += dc * MapC(pb->data.data(), k, n).transpose();
        if (pb->requires_grad)
            Map(pb->grad_buffer().data(), k, n).noalias() += MapC(pa->data.data(), m, k).transpose() * dc;
    });
}

Tensor transpose(const Tensor& a) {
    require_matrix("transpose", a);
    const auto m = a.rows(), n = a.cols();
    std::vector<double> out(m * n);
    Map(out.data(), n, m) = MapC(a.data().data(), m, n).transpose();
    auto pa = node_of(a);
    return make_result("transpose", {n, m}, std::move(out), {pa}, [pa, m, n](Node& self) {
        Map(pa->grad_buffer().data(), m, n) += MapC(self.grad.data(), n, m).transpose();
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.size());
    const auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
    auto pa = node_of(a), pb = node_of(b);
    return make_result("add", a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        for (auto* p : {pa.get(), pb.get()}) {
            if (!p->requires_grad) continue;
            auto g = p->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
    const auto n = x.rows(), d = x.cols();
    if (bias.size() != d)
        throw TensorError("add_row: bias length " + std::to_string(bias.size()) + " does not match " +
                          shape_str(x.shape()));
    std::vector<double> out(x.data().begin(), x.data().end());
    const auto db = bias.data();
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) out[r * d + c] += db[c];
    auto px = node_of(x), pb = node_of(bias);
    return make_result("add_row", x.shape(), std::move(out), {px, pb}, [px, pb, n, d](Node& self) {
        if (px->requires_grad) {
            auto g = px->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            auto g = pb->grad_buffer();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < d; ++c) g[c] += self.grad[r * d + c];
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.data().begin(), a.data().end());
    for (auto& v : out) v *= s;
    auto pa = node_of(a);
    return make_result("scale", a.shape(), std::move(out), {pa}, [pa, s](Node& self) {
        auto g = pa->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape("hadamard", a, b);
    std::vector<double> out(a.size());
    const auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
    auto pa = node_of(a), pb = node_of(b);
    return make_result("hadamard", a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            auto g = pa->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->data[i];
        }
        if (pb->requires_grad) {
            auto g = pb->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->data[i];
        }
    });
}

Tensor sigmoid(const Tensor& x) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - 0x1.0p-53;
    std::vector<double> out(x.size());
    const auto dx = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = dx[i];
        const double y = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        out[i] = std::clamp(y, lo, hi);
    }
    auto px = node_of(x);
    return make_result("sigmoid", x.shape(), std::move(out), {px}, [px](Node& self) {
        auto g = px->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double y = self.data[i];
            g[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Tensor gelu(const Tensor& x) {
    std::vector<double> out(x.size());
    const auto dx = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dx[i] * 0.5 * std::erfc(-dx[i] * std::numbers::sqrt2 / 2.0);
    auto px = node_of(x);
    return make_result("gelu", x.shape(), std::move(out), {px}, [px](Node& self) {
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        auto g = px->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = px->data[i];
            const double cdf = 0.5 * std::erfc(-v * std::numbers::sqrt2 / 2.0);
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            g[i] += self.grad[i] * (cdf + v * pdf);
        }
    });
}

Tensor softmax_rows(const Tensor& x) {
    const auto n = x.rows(), d = x.cols();
    std::vector<double> out(x.size());
    const auto dx = x.data();
    for (std::size_t r = 0; r < n; ++r) {
        const double* in = dx.data() + r * d;
        double* o = out.data() + r * d;
        const double mx = *std::max_element(in, in + d);
        double z = 0.0;
        for (std::size_t c = 0; c < d; ++c) z += (o[c] = std::exp(in[c] - mx));
        for (std::size_t c = 0; c < d; ++c) o[c] /= z;
    }
    auto px = node_of(x);
    return make_result("softmax_rows", x.shape(), std::move(out), {px}, [px, n, d](Node& self) {
        auto g = px->grad_buffer();
        for (std::size_t r = 0; r < n; ++r) {
            const double* y = self.data.data() + r * d;
            const double* dy = self.grad.data() + r * d;
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) dot += dy[c] * y[c];
            for (std::size_t c = 0; c < d; ++c) g[r * d + c] += y[c] * (dy[c] - dot);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const auto n = x.rows(), d = x.cols();
    if (gain.size() != d || bias.size() != d)
        throw TensorError("layer_norm: gain/bias length must equal " + std::to_string(d));
    std::vector<double> out(x.size()), xhat(x.size()), rstd(n);
    const auto dx = x.data(), dg = gain.data(), db = bias.data();
    for (std::size_t r = 0; r < n; ++r) {
        const double* in = dx.data() + r * d;
        double mean = 0.0;
        for (std::size_t c = 0; c < d; ++c) mean += in[c];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) var += (in[c] - mean) * (in[c] - mean);
        var /= static_cast<double>(d);
        rstd[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c) {
            xhat[r * d + c] = (in[c] - mean) * rstd[r];
            out[r * d + c] = dg[c] * xhat[r * d + c] + db[c];
        }
    }
    auto px = node_of(x), pg = node_of(gain), pb = node_of(bias);
    return make_result("layer_norm", x.shape(), std::move(out), {px, pg, pb},
                       [px, pg, pb, n, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
                           const double inv_d = 1.0 / static_cast<double>(d);
                           if (pg->requires_grad) {
                               auto g = pg->grad_buffer();
                               for (std::size_t i = 0; i < n * d; ++i) g[i % d] += self.grad[i] * xhat[i];
                           }
                           if (pb->requires_grad) {
                               auto g = pb->grad_buffer();
                               for (std::size_t i = 0; i < n * d; ++i) g[i % d] += self.grad[i];
                           }
                           if (!px->requires_grad) return;
                           auto gx = px->grad_buffer();
                           std::vector<double> dxhat(d);
                           for (std::size_t r = 0; r < n; ++r) {
                               double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                               for (std::size_t c = 0; c < d; ++c) {
                                   dxhat[c] = self.grad[r * d + c] * pg->data[c];
                                   mean_dxhat += dxhat[c];
                                   mean_dxhat_xhat += dxhat[c] * xhat[r * d + c];
                               }
                               mean_dxhat *= inv_d;
                               mean_dxhat_xhat *= inv_d;
                               for (std::size_t c = 0; c < d; ++c)
                                   gx[r * d + c] +=
                                       rstd[r] * (dxhat[c] - mean_dxhat - xhat[r * d + c] * mean_dxhat_xhat);
                           }
                       });
}

Tensor mean_pool_rows(const Tensor& x) {
    const auto n = x.rows(), d = x.cols();
    std::vector<double> out(d, 0.0);
    const auto dx = x.data();
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) out[c] += dx[r * d + c];
    for (auto& v : out) v /= static_cast<double>(n);
    auto px = node_of(x);
    return make_result("mean_pool_rows", {1, d}, std::move(out), {px}, [px, n, d](Node& self) {
        auto g = px->grad_buffer();
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) g[r * d + c] += self.grad[c] * inv_n;
    });
}

Tensor sum(const Tensor& x) {
    const auto dx = x.data();
    const double s = std::accumulate(dx.begin(), dx.end(), 0.0);
    auto px = node_of(x);
    return make_result("sum", {}, {s}, {px}, [px](Node& self) {
        auto g = px->grad_buffer();
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t width) {
    require_matrix("slice_cols", x);
    const auto n = x.rows(), d = x.cols();
    if (width == 0 || start + width > d)
        throw TensorError("slice_cols: range [" + std::to_string(start) + ", " + std::to_string(start + width) +
                          ") outside " + shape_str(x.shape()));
    std::vector<double> out(n * width);
    const auto dx = x.data();
    for (std::size_t r = 0; r < n; ++r)
        std::copy_n(dx.data() + r * d + start, width, out.data() + r * width);
    auto px = node_of(x);
    return make_result("slice_cols", {n, width}, std::move(out), {px}, [px, n, d, start, width](Node& self) {
        auto g = px->grad_buffer();
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < width; ++c) g[r * d + start + c] += self.grad[r * width + c];
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw TensorError("concat_cols: no inputs");
    const auto n = parts[0].rows();
    std::size_t total = 0;
    std::vector<NodePtr> inputs;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        require_matrix("concat_cols", p);
        if (p.rows() != n) throw TensorError("concat_cols: row count mismatch");
        widths.push_back(p.cols());
        total += p.cols();
        inputs.push_back(node_of(p));
    }
    std::vector<double> out(n * total);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto dp = parts[k].data();
        for (std::size_t r = 0; r < n; ++r)
            std::copy_n(dp.data() + r * widths[k], widths[k], out.data() + r * total + offset);
        offset += widths[k];
    }
    auto captured = inputs;
    return make_result("concat_cols", {n, total}, std::move(out), std::move(inputs),
                       [captured, widths, n, total](Node& self) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < captured.size(); ++k) {
                               if (captured[k]->requires_grad) {
                                   auto g = captured[k]->grad_buffer();
                                   for (std::size_t r = 0; r < n; ++r)
                                       for (std::size_t c = 0; c < widths[k]; ++c)
                                           g[r * widths[k] + c] += self.grad[r * total + off + c];
                               }
                               off += widths[k];
                           }
                       });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw TensorError("dropout: rate must lie in [0, 1)");
    if (rate == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(x.size());
    for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
    std::vector<double> out(x.size());
    const auto dx = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dx[i] * mask[i];
    auto px = node_of(x);
    return make_result("dropout", x.shape(), std::move(out), {px}, [px, mask = std::move(mask)](Node& self) {
        auto g = px->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
    });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels, std::span<const double> class_weights) {
    require_matrix("cross_entropy", logits);
    const auto b = logits.rows(), c = logits.cols();
    if (labels.size() != b) throw TensorError("cross_entropy: label count does not match batch");
    if (!class_weights.empty() && class_weights.size() != c)
        throw TensorError("cross_entropy: class weight count does not match classes");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw TensorError("cross_entropy: label " + std::to_string(y) + " out of range");

    const auto dz = logits.data();
    std::vector<double> probs(b * c), w(b);
    double loss = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double* z = dz.data() + i * c;
        const double mx = *std::max_element(z, z + c);
        double s = 0.0;
        for (std::size_t k = 0; k < c; ++k) s += (probs[i * c + k] = std::exp(z[k] - mx));
        for (std::size_t k = 0; k < c; ++k) probs[i * c + k] /= s;
        const auto y = static_cast<std::size_t>(labels[i]);
        w[i] = class_weights.empty() ? 1.0 : class_weights[y];
        loss += w[i] * (std::log(s) + mx - z[y]);
        wsum += w[i];
    }
    if (wsum <= 0.0) throw TensorError("cross_entropy: class weights of the batch sum to zero");
    loss /= wsum;
    std::vector<int> ys(labels.begin(), labels.end());
    auto pl = node_of(logits);
    return make_result("cross_entropy", {}, {loss}, {pl},
                       [pl, b, c, wsum, ys = std::move(ys), w = std::move(w), probs = std::move(probs)](Node& self) {
                           auto g = pl->grad_buffer();
                           for (std::size_t i = 0; i < b; ++i) {
                               const double f = self.grad[0] * w[i] / wsum;
                               for (std::size_t k = 0; k < c; ++k)
                                   g[i * c + k] += f * (probs[i * c + k] - (static_cast<int>(k) == ys[i] ? 1.0 : 0.0));
                           }
                       });
}

}  // namespace mvst
