#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "advaug/tensor.hpp"

namespace advaug {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t id = 0;
};

enum class OpKind : std::uint8_t {
    leaf,
    add,
    sub,
    mul,
    div,
    emax,
    emin,
    matmul,
    transpose,
    relu,
    sigmoid,
    softplus,
    exp,
    log,
    tanh,
    sqrt,
    abs,
    sum,
    sum_rows,
    sum_cols,
    broadcast_rows,
    broadcast_cols,
    take_column,
    put_column,
    reshape,
    lgamma,
    digamma,
    trigamma,
};

// Reverse-mode tape over dense tensors. Forward values are computed eagerly;
// backward emits ordinary tape operations, so an expression built from a
// first-order gradient (grad_var) stays differentiable, which is what the
// gradient-penalty loss needs.
//
// Single-writer: one thread records and differentiates a given tape.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }
    Var constant(double scalar) { return leaf(Tensor::scalar(scalar), false); }

    const Tensor& value(Var v) const;
    bool requires_grad(Var v) const;
    std::size_t size() const { return nodes_.size(); }

    // Final backward from a scalar loss. Populates gradients for every
    // recorded node reachable from the loss; a second call without
    // re-recording is rejected.
    void backward(Var loss);

    // d(loss)/d(wrt) as a new on-tape variable (create-graph backward).
    // Returns a zero constant when `wrt` does not influence `loss`.
    Var grad_var(Var loss, Var wrt);

    // Gradient value after backward(); exact zeros for untouched leaves.
    Tensor grad(Var v) const;

    // --- recording primitives (used by the free-function API below) ---
    Var record_binary(OpKind kind, Var a, Var b);
    Var record_unary(OpKind kind, Var x);
    Var record_reshape(Var x, Shape shape);
    Var record_broadcast(OpKind kind, Var x, std::size_t extent);
    Var record_column(OpKind kind, Var x, std::size_t column, std::size_t width);

private:
    struct Node {
        Tensor value;
        OpKind kind = OpKind::leaf;
        std::uint32_t in0 = kNone;
        std::uint32_t in1 = kNone;
        std::uint32_t aux0 = 0; // column index / broadcast extent
        std::uint32_t aux1 = 0; // put_column width
        bool requires_grad = false;
    };

    static constexpr std::uint32_t kNone = 0xffffffffu;

    std::uint32_t push(Node node);
    const Node& node(Var v) const;
    void check_owned(Var v) const;

    // Emits vjp ops for node `id` given its output gradient var; returns the
    // gradient var ids for (in0, in1) (kNone when absent).
    std::pair<std::uint32_t, std::uint32_t> emit_vjp(std::uint32_t id, std::uint32_t gout);

    std::unordered_map<std::uint32_t, std::uint32_t> run_backward(Var loss);

    std::vector<Node> nodes_;
    std::unordered_map<std::uint32_t, std::uint32_t> grad_ids_;
    bool finished_ = false;
};

// Elementwise; operands share a shape or one side is a scalar var.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var emax(Var a, Var b);
Var emin(Var a, Var b);

Var operator+(Var a, double s);
Var operator-(Var a, double s);
Var operator-(double s, Var a);
Var operator*(Var a, double s);
Var operator/(Var a, double s);
Var neg(Var a);

Var matmul(Var a, Var b);
Var transpose(Var m);

Var relu(Var x);
Var sigmoid(Var x);
Var softplus(Var x);
Var exp(Var x);
Var log(Var x);
Var tanh(Var x);
Var sqrt(Var x);
Var abs(Var x);
Var lgamma(Var x);
Var digamma_v(Var x);

Var sum(Var x);
Var mean(Var x);
Var l2_norm(Var x);

Var sum_rows(Var m);                       // [n,k] -> [k]
Var sum_cols(Var m);                       // [n,k] -> [n]
Var broadcast_rows(Var v, std::size_t n);  // [k] -> [n,k]
Var broadcast_cols(Var v, std::size_t k);  // [n] -> [n,k]
Var take_column(Var m, std::size_t j);     // [n,k] -> [n]
Var put_column(Var v, std::size_t j, std::size_t width); // [n] -> [n,width]
Var reshape(Var x, Shape shape);
Var add_rowvec(Var m, Var v);              // [n,k] + [k]
Var clamp(Var x, double lo, double hi);

} // namespace advaug
