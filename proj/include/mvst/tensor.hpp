#pragma once

// Dense double-precision tensors with tape-based reverse-mode differentiation.
//
// Every op that touches a tensor with requires_grad() records itself on the
// calling thread's tape. `backward(loss)` replays the tape in reverse exactly
// once, accumulates into leaf gradients, and clears the tape.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvst {

class Rng;

using Shape = std::vector<std::size_t>;

class TensorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an op produces NaN or Inf.
class NonFiniteError : public TensorError {
public:
    using TensorError::TensorError;
};

namespace detail {
struct Node;
}

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }

    const Shape& shape() const;
    std::size_t dim() const { return shape().size(); }
    std::size_t size() const;
    /// Matrix view of the shape: rank 2 is [rows×cols], rank 1 is one row,
    /// rank 0 is 1×1.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const;
    /// Writable view; intended for leaves (parameters, inputs).
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t i) const { return data()[i]; }
    double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

    bool requires_grad() const;
    void set_requires_grad(bool on);

    bool has_grad() const;
    /// Gradient of the last backward pass(es); zeros if never touched.
    std::vector<double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    /// Deep copy of the values, detached from the tape.
    Tensor detach() const;

    bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

    // Internal: used by ops.
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

/// Disables recording on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// Number of ops currently recorded on this thread's tape.
std::size_t tape_size();
/// Drops every recorded op without propagating gradients.
void clear_tape();

/// Propagates d(loss)/d(leaf) into every requires_grad leaf, additively.
/// Throws if loss is not a scalar or its tape was already consumed.
void backward(const Tensor& loss);

// --- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
/// x[n×d] + bias[d] broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& a, double s);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& x);
/// Exact x·Φ(x).
Tensor gelu(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
/// Column means of x[n×d] as a [1×d] row.
Tensor mean_pool_rows(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t width);
Tensor concat_cols(std::span<const Tensor> parts);
/// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

/// Mean over rows of -log softmax(logits)[label]. With class_weights the
/// mean is weighted: Σ w_y·l / Σ w_y.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels,
                     std::span<const double> class_weights = {});

}  // namespace mvst
