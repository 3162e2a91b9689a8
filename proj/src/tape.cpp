#include "advaug/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "advaug/errors.hpp"
#include "advaug/special.hpp"

namespace advaug {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

double stable_softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Tensor unary_map(const Tensor& x, OpKind kind) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double v = x[i];
        switch (kind) {
            case OpKind::relu: out[i] = v > 0.0 ? v : 0.0; break;
            case OpKind::sigmoid: out[i] = stable_sigmoid(v); break;
            case OpKind::softplus: out[i] = stable_softplus(v); break;
            case OpKind::exp: out[i] = std::exp(v); break;
            case OpKind::log:
                if (!(v > 0.0)) {
                    throw NumericalError("log: non-positive entry at flat index " + std::to_string(i) +
                                         " (value " + std::to_string(v) + ")");
                }
                out[i] = std::log(v);
                break;
            case OpKind::tanh: out[i] = std::tanh(v); break;
            case OpKind::sqrt:
                if (v < 0.0) {
                    throw NumericalError("sqrt: negative entry at flat index " + std::to_string(i));
                }
                out[i] = std::sqrt(v);
                break;
            case OpKind::abs: out[i] = std::abs(v); break;
            case OpKind::lgamma:
                if (!(v > 0.0)) {
                    throw NumericalError("lgamma: non-positive entry at flat index " + std::to_string(i));
                }
                out[i] = std::lgamma(v);
                break;
            case OpKind::digamma: out[i] = digamma(v); break;
            case OpKind::trigamma: out[i] = trigamma(v); break;
            default: throw std::logic_error("unary_map: not a unary op");
        }
    }
    return Tensor::from(x.shape(), std::move(out));
}

} // namespace

std::uint32_t Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<std::uint32_t>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(Var v) const {
    check_owned(v);
    return nodes_[v.id];
}

void Tape::check_owned(Var v) const {
    if (v.tape != this || v.id >= nodes_.size()) {
        throw std::logic_error("tape: variable does not belong to this tape");
    }
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.kind = OpKind::leaf;
    n.requires_grad = requires_grad;
    return Var{this, push(std::move(n))};
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Var Tape::record_binary(OpKind kind, Var a, Var b) {
    check_owned(a);
    check_owned(b);
    const Tensor& av = nodes_[a.id].value;
    const Tensor& bv = nodes_[b.id].value;
    Node n;
    switch (kind) {
        case OpKind::add: n.value = av + bv; break;
        case OpKind::sub: n.value = av - bv; break;
        case OpKind::mul: n.value = av * bv; break;
        case OpKind::div: n.value = av / bv; break;
        case OpKind::emax: n.value = vmax(av, bv); break;
        case OpKind::emin: n.value = vmin(av, bv); break;
        case OpKind::matmul: n.value = matmul(av, bv); break;
        default: throw std::logic_error("record_binary: not a binary op");
    }
    n.kind = kind;
    n.in0 = a.id;
    n.in1 = b.id;
    n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    return Var{this, push(std::move(n))};
}

Var Tape::record_unary(OpKind kind, Var x) {
    check_owned(x);
    Node n;
    if (kind == OpKind::transpose) {
        n.value = transposed(nodes_[x.id].value);
    } else if (kind == OpKind::sum) {
        const Tensor& xv = nodes_[x.id].value;
        if (xv.size() == 0) throw std::invalid_argument("sum: empty tensor");
        n.value = Tensor::scalar(sum(xv));
    } else if (kind == OpKind::sum_rows || kind == OpKind::sum_cols) {
        const Tensor& m = nodes_[x.id].value;
        std::size_t r = m.rows(), c = m.cols();
        if (kind == OpKind::sum_rows) {
            std::vector<double> out(c, 0.0);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) out[j] += m[i * c + j];
            n.value = Tensor::from({c}, std::move(out));
        } else {
            std::vector<double> out(r, 0.0);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) out[i] += m[i * c + j];
            n.value = Tensor::from({r}, std::move(out));
        }
    } else {
        n.value = unary_map(nodes_[x.id].value, kind);
    }
    n.kind = kind;
    n.in0 = x.id;
    n.requires_grad = nodes_[x.id].requires_grad;
    return Var{this, push(std::move(n))};
}

Var Tape::record_reshape(Var x, Shape shape) {
    check_owned(x);
    const Tensor& xv = nodes_[x.id].value;
    if (shape_numel(shape) != xv.size()) {
        throw std::invalid_argument("reshape: cannot view " + format_shape(xv.shape()) + " as " +
                                    format_shape(shape));
    }
    Node n;
    n.value = Tensor::from(shape, std::vector<double>(xv.data().begin(), xv.data().end()));
    n.kind = OpKind::reshape;
    n.in0 = x.id;
    n.requires_grad = nodes_[x.id].requires_grad;
    return Var{this, push(std::move(n))};
}

Var Tape::record_broadcast(OpKind kind, Var x, std::size_t extent) {
    check_owned(x);
    const Tensor& v = nodes_[x.id].value;
    if (v.rank() != 1) {
        throw std::invalid_argument("broadcast: expected a vector, got " + format_shape(v.shape()));
    }
    std::size_t len = v.size();
    Node n;
    if (kind == OpKind::broadcast_rows) {
        std::vector<double> out(extent * len);
        for (std::size_t i = 0; i < extent; ++i)
            for (std::size_t j = 0; j < len; ++j) out[i * len + j] = v[j];
        n.value = Tensor::from({extent, len}, std::move(out));
    } else if (kind == OpKind::broadcast_cols) {
        std::vector<double> out(len * extent);
        for (std::size_t i = 0; i < len; ++i)
            for (std::size_t j = 0; j < extent; ++j) out[i * extent + j] = v[i];
        n.value = Tensor::from({len, extent}, std::move(out));
    } else {
        throw std::logic_error("record_broadcast: not a broadcast op");
    }
    n.kind = kind;
    n.in0 = x.id;
    n.aux0 = static_cast<std::uint32_t>(extent);
    n.requires_grad = nodes_[x.id].requires_grad;
    return Var{this, push(std::move(n))};
}

Var Tape::record_column(OpKind kind, Var x, std::size_t column, std::size_t width) {
    check_owned(x);
    const Tensor& v = nodes_[x.id].value;
    Node n;
    if (kind == OpKind::take_column) {
        std::size_t r = v.rows(), c = v.cols();
        if (column >= c) {
            throw std::invalid_argument("take_column: column " + std::to_string(column) +
                                        " out of range for " + format_shape(v.shape()));
        }
        std::vector<double> out(r);
        for (std::size_t i = 0; i < r; ++i) out[i] = v[i * c + column];
        n.value = Tensor::from({r}, std::move(out));
        width = c;
    } else if (kind == OpKind::put_column) {
        if (v.rank() != 1) {
            throw std::invalid_argument("put_column: expected a vector, got " + format_shape(v.shape()));
        }
        if (column >= width) {
            throw std::invalid_argument("put_column: column " + std::to_string(column) +
                                        " out of range for width " + std::to_string(width));
        }
        std::vector<double> out(v.size() * width, 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) out[i * width + column] = v[i];
        n.value = Tensor::from({v.size(), width}, std::move(out));
    } else {
        throw std::logic_error("record_column: not a column op");
    }
    n.kind = kind;
    n.in0 = x.id;
    n.aux0 = static_cast<std::uint32_t>(column);
    n.aux1 = static_cast<std::uint32_t>(width);
    n.requires_grad = nodes_[x.id].requires_grad;
    return Var{this, push(std::move(n))};
}

std::pair<std::uint32_t, std::uint32_t> Tape::emit_vjp(std::uint32_t id, std::uint32_t gout) {
    // Snapshot: emitting ops may reallocate nodes_.
    const OpKind kind = nodes_[id].kind;
    const std::uint32_t in0 = nodes_[id].in0;
    const std::uint32_t in1 = nodes_[id].in1;
    const std::uint32_t aux0 = nodes_[id].aux0;
    const bool need0 = in0 != kNone && nodes_[in0].requires_grad;
    const bool need1 = in1 != kNone && nodes_[in1].requires_grad;

    auto var = [this](std::uint32_t i) { return Var{this, i}; };
    Var g = var(gout);
    Var out = var(id);

    // Sum-reduce an elementwise gradient when the operand was a broadcast scalar.
    auto reduce_to = [&](Var grad, std::uint32_t operand) -> std::uint32_t {
        const Shape& target = nodes_[operand].value.shape();
        if (nodes_[grad.id].value.shape() == target) return grad.id;
        if (target.empty()) return sum(grad).id;
        throw std::logic_error("vjp: unexpected gradient shape");
    };

    // Detached 0/1 mask of the output's shape, from recorded forward values.
    auto mask_binary = [&](bool first_wins) {
        const Tensor& av = nodes_[in0].value;
        const Tensor& bv = nodes_[in1].value;
        const Tensor& ov = nodes_[id].value;
        std::vector<double> m(ov.size());
        for (std::size_t i = 0; i < ov.size(); ++i) {
            double a = av.is_scalar() ? av[0] : av[i];
            double b = bv.is_scalar() ? bv[0] : bv[i];
            bool take_a = first_wins ? (a >= b) : (a <= b);
            m[i] = take_a ? 1.0 : 0.0;
        }
        return constant(Tensor::from(ov.shape(), std::move(m)));
    };

    std::uint32_t g0 = kNone, g1 = kNone;
    switch (kind) {
        case OpKind::leaf:
            break;
        case OpKind::add:
            if (need0) g0 = reduce_to(g, in0);
            if (need1) g1 = reduce_to(g, in1);
            break;
        case OpKind::sub:
            if (need0) g0 = reduce_to(g, in0);
            if (need1) g1 = reduce_to(neg(g), in1);
            break;
        case OpKind::mul:
            if (need0) g0 = reduce_to(g * var(in1), in0);
            if (need1) g1 = reduce_to(g * var(in0), in1);
            break;
        case OpKind::div:
            if (need0) g0 = reduce_to(g / var(in1), in0);
            if (need1) g1 = reduce_to(neg(g * var(in0) / (var(in1) * var(in1))), in1);
            break;
        case OpKind::emax: {
            Var m = mask_binary(true);
            if (need0) g0 = reduce_to(g * m, in0);
            if (need1) g1 = reduce_to(g * (1.0 - m), in1);
            break;
        }
        case OpKind::emin: {
            Var m = mask_binary(false);
            if (need0) g0 = reduce_to(g * m, in0);
            if (need1) g1 = reduce_to(g * (1.0 - m), in1);
            break;
        }
        case OpKind::matmul:
            if (need0) g0 = matmul(g, transpose(var(in1))).id;
            if (need1) g1 = matmul(transpose(var(in0)), g).id;
            break;
        case OpKind::transpose:
            if (need0) g0 = transpose(g).id;
            break;
        case OpKind::relu: {
            const Tensor& xv = nodes_[in0].value;
            std::vector<double> m(xv.size());
            for (std::size_t i = 0; i < xv.size(); ++i) m[i] = xv[i] > 0.0 ? 1.0 : 0.0;
            if (need0) g0 = (g * constant(Tensor::from(xv.shape(), std::move(m)))).id;
            break;
        }
        case OpKind::sigmoid:
            if (need0) g0 = (g * (out * (1.0 - out))).id;
            break;
        case OpKind::softplus:
            if (need0) g0 = (g * sigmoid(var(in0))).id;
            break;
        case OpKind::exp:
            if (need0) g0 = (g * out).id;
            break;
        case OpKind::log:
            if (need0) g0 = (g / var(in0)).id;
            break;
        case OpKind::tanh:
            if (need0) g0 = (g * (1.0 - out * out)).id;
            break;
        case OpKind::sqrt:
            if (need0) g0 = (g / (out * 2.0)).id;
            break;
        case OpKind::abs: {
            const Tensor& xv = nodes_[in0].value;
            std::vector<double> m(xv.size());
            for (std::size_t i = 0; i < xv.size(); ++i) {
                m[i] = xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0);
            }
            if (need0) g0 = (g * constant(Tensor::from(xv.shape(), std::move(m)))).id;
            break;
        }
        case OpKind::sum:
            if (need0) {
                Var ones = constant(Tensor::ones(nodes_[in0].value.shape()));
                g0 = (ones * g).id;
            }
            break;
        case OpKind::sum_rows:
            if (need0) g0 = broadcast_rows(g, nodes_[in0].value.rows()).id;
            break;
        case OpKind::sum_cols:
            if (need0) g0 = broadcast_cols(g, nodes_[in0].value.cols()).id;
            break;
        case OpKind::broadcast_rows:
            if (need0) g0 = sum_rows(g).id;
            break;
        case OpKind::broadcast_cols:
            if (need0) g0 = sum_cols(g).id;
            break;
        case OpKind::take_column:
            if (need0) g0 = put_column(g, aux0, nodes_[in0].value.cols()).id;
            break;
        case OpKind::put_column:
            if (need0) g0 = take_column(g, aux0).id;
            break;
        case OpKind::reshape:
            if (need0) g0 = record_reshape(g, nodes_[in0].value.shape()).id;
            break;
        case OpKind::lgamma:
            if (need0) g0 = (g * record_unary(OpKind::digamma, var(in0))).id;
            break;
        case OpKind::digamma:
            if (need0) g0 = (g * record_unary(OpKind::trigamma, var(in0))).id;
            break;
        case OpKind::trigamma:
            throw std::logic_error("trigamma has no backward rule (third-order gradients unsupported)");
    }
    return {g0, g1};
}

std::unordered_map<std::uint32_t, std::uint32_t> Tape::run_backward(Var loss) {
    check_owned(loss);
    const Node& root = nodes_[loss.id];
    if (!root.value.is_scalar()) {
        throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                    format_shape(root.value.shape()));
    }
    std::unordered_map<std::uint32_t, std::uint32_t> grads;
    if (!root.requires_grad) return grads;

    std::vector<char> needed(loss.id + 1, 0);
    std::vector<std::uint32_t> stack{loss.id};
    needed[loss.id] = 1;
    while (!stack.empty()) {
        std::uint32_t id = stack.back();
        stack.pop_back();
        for (std::uint32_t in : {nodes_[id].in0, nodes_[id].in1}) {
            if (in == kNone || !nodes_[in].requires_grad) continue;
            if (!needed[in]) {
                needed[in] = 1;
                stack.push_back(in);
            }
        }
    }

    grads[loss.id] = constant(1.0).id;
    auto accumulate = [&](std::uint32_t in, std::uint32_t gid) {
        if (in == kNone || gid == kNone) return;
        auto it = grads.find(in);
        if (it == grads.end()) {
            grads[in] = gid;
        } else {
            it->second = record_binary(OpKind::add, Var{this, it->second}, Var{this, gid}).id;
        }
    };

    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
        if (!needed[id]) continue;
        auto it = grads.find(id);
        if (it == grads.end()) continue;
        if (nodes_[id].kind == OpKind::leaf) continue;
        const std::uint32_t in0 = nodes_[id].in0;
        const std::uint32_t in1 = nodes_[id].in1;
        auto [g0, g1] = emit_vjp(id, it->second);
        accumulate(in0, g0);
        accumulate(in1, g1);
    }
    return grads;
}

void Tape::backward(Var loss) {
    if (finished_) {
        throw std::logic_error("tape: backward already ran on this tape; re-record before differentiating");
    }
    grad_ids_ = run_backward(loss);
    finished_ = true;
}

Var Tape::grad_var(Var loss, Var wrt) {
    if (finished_) {
        throw std::logic_error("tape: grad_var on a finished tape; re-record before differentiating");
    }
    check_owned(wrt);
    auto grads = run_backward(loss);
    auto it = grads.find(wrt.id);
    if (it == grads.end()) {
        return constant(Tensor::zeros(nodes_[wrt.id].value.shape()));
    }
    return Var{this, it->second};
}

Tensor Tape::grad(Var v) const {
    check_owned(v);
    if (!finished_) throw std::logic_error("tape: grad queried before backward");
    auto it = grad_ids_.find(v.id);
    if (it == grad_ids_.end()) return Tensor::zeros(nodes_[v.id].value.shape());
    return nodes_[it->second].value;
}

namespace {
Tape* common_tape(Var a, Var b) {
    if (a.tape == nullptr || a.tape != b.tape) {
        throw std::logic_error("tape: operands recorded on different tapes");
    }
    return a.tape;
}
} // namespace

Var operator+(Var a, Var b) { return common_tape(a, b)->record_binary(OpKind::add, a, b); }
Var operator-(Var a, Var b) { return common_tape(a, b)->record_binary(OpKind::sub, a, b); }
Var operator*(Var a, Var b) { return common_tape(a, b)->record_binary(OpKind::mul, a, b); }
Var operator/(Var a, Var b) { return common_tape(a, b)->record_binary(OpKind::div, a, b); }
Var emax(Var a, Var b) { return common_tape(a, b)->record_binary(OpKind::emax, a, b); }
Var emin(Var a, Var b) { return common_tape(a, b)->record_binary(OpKind::emin, a, b); }

Var operator+(Var a, double s) { return a + a.tape->constant(s); }
Var operator-(Var a, double s) { return a - a.tape->constant(s); }
Var operator-(double s, Var a) { return a.tape->constant(s) - a; }
Var operator*(Var a, double s) { return a * a.tape->constant(s); }
Var operator/(Var a, double s) { return a / a.tape->constant(s); }
Var neg(Var a) { return a * -1.0; }

Var matmul(Var a, Var b) { return common_tape(a, b)->record_binary(OpKind::matmul, a, b); }
Var transpose(Var m) { return m.tape->record_unary(OpKind::transpose, m); }

Var relu(Var x) { return x.tape->record_unary(OpKind::relu, x); }
Var sigmoid(Var x) { return x.tape->record_unary(OpKind::sigmoid, x); }
Var softplus(Var x) { return x.tape->record_unary(OpKind::softplus, x); }
Var exp(Var x) { return x.tape->record_unary(OpKind::exp, x); }
Var log(Var x) { return x.tape->record_unary(OpKind::log, x); }
Var tanh(Var x) { return x.tape->record_unary(OpKind::tanh, x); }
Var sqrt(Var x) { return x.tape->record_unary(OpKind::sqrt, x); }
Var abs(Var x) { return x.tape->record_unary(OpKind::abs, x); }
Var lgamma(Var x) { return x.tape->record_unary(OpKind::lgamma, x); }
Var digamma_v(Var x) { return x.tape->record_unary(OpKind::digamma, x); }

Var sum(Var x) { return x.tape->record_unary(OpKind::sum, x); }

Var mean(Var x) {
    std::size_t n = x.tape->value(x).size();
    if (n == 0) throw std::invalid_argument("mean: empty tensor");
    return sum(x) / static_cast<double>(n);
}

Var l2_norm(Var x) { return sqrt(sum(x * x)); }

Var sum_rows(Var m) { return m.tape->record_unary(OpKind::sum_rows, m); }
Var sum_cols(Var m) { return m.tape->record_unary(OpKind::sum_cols, m); }
Var broadcast_rows(Var v, std::size_t n) { return v.tape->record_broadcast(OpKind::broadcast_rows, v, n); }
Var broadcast_cols(Var v, std::size_t k) { return v.tape->record_broadcast(OpKind::broadcast_cols, v, k); }
Var take_column(Var m, std::size_t j) { return m.tape->record_column(OpKind::take_column, m, j, 0); }
Var put_column(Var v, std::size_t j, std::size_t width) {
    return v.tape->record_column(OpKind::put_column, v, j, width);
}
Var reshape(Var x, Shape shape) { return x.tape->record_reshape(x, std::move(shape)); }

Var add_rowvec(Var m, Var v) {
    std::size_t n = m.tape->value(m).rows();
    return m + broadcast_rows(v, n);
}

Var clamp(Var x, double lo, double hi) {
    return emin(emax(x, x.tape->constant(lo)), x.tape->constant(hi));
}

} // namespace advaug
