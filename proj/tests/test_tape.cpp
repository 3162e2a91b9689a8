#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "advaug/errors.hpp"
#include "advaug/gradcheck.hpp"
#include "advaug/rng.hpp"
#include "advaug/special.hpp"
#include "advaug/tape.hpp"
#include "advaug/tensor.hpp"

using namespace advaug;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -3.0, double hi = 3.0) {
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(data));
}

// Keeps entries away from zero so kinked ops (relu/abs/max) and domain-limited
// ops (log/sqrt) stay finite-difference friendly.
Tensor random_tensor_away_from(Shape shape, Rng& rng, double lo, double hi, double exclusion) {
    Tensor t = random_tensor(std::move(shape), rng, lo, hi);
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (std::abs(t[i]) < exclusion) t[i] = t[i] < 0 ? -exclusion : exclusion;
    }
    return t;
}

} // namespace

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor::from({2}, {1.0, std::nan("")}), NumericalError);
    CHECK_THROWS_AS(Tensor::from({3}, {1.0, 2.0}), std::invalid_argument);
    Tensor s = Tensor::scalar(2.5);
    CHECK(s.is_scalar());
    CHECK(s.item() == 2.5);
    CHECK(shape_numel({}) == 1);
}

TEST_CASE("elementwise add and scalar mul") {
    Tape t;
    Var a = t.leaf(Tensor::vector({1, 2}));
    Var b = t.leaf(Tensor::vector({3, 4}));
    Var c = a + b;
    CHECK(t.value(c)[0] == 4.0);
    CHECK(t.value(c)[1] == 6.0);

    Var d = t.leaf(Tensor::vector({2, 3}));
    Var e = d * 0.0;
    CHECK(t.value(e)[0] == 0.0);
    CHECK(t.value(e)[1] == 0.0);
}

TEST_CASE("shape mismatch reports both shapes") {
    Tape t;
    Var a = t.leaf(Tensor::vector({1, 2}));
    Var b = t.leaf(Tensor::vector({1, 2, 3}));
    try {
        Var c = a + b;
        (void)c;
        FAIL("expected a shape mismatch");
    } catch (const std::invalid_argument& err) {
        std::string msg = err.what();
        CHECK(msg.find("[2]") != std::string::npos);
        CHECK(msg.find("[3]") != std::string::npos);
    }
}

TEST_CASE("product rule gradient") {
    Tape t;
    Var a = t.leaf(Tensor::vector({1, 2}));
    Var b = t.leaf(Tensor::vector({5, 7}), false);
    Var loss = sum(a * b);
    t.backward(loss);
    Tensor g = t.grad(a);
    CHECK(g[0] == 5.0);
    CHECK(g[1] == 7.0);
}

TEST_CASE("matmul identity and dot product") {
    Tape t;
    Var eye = t.leaf(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    Var m = t.leaf(Tensor::matrix(2, 2, {1.5, -2, 3, 4.25}));
    Tensor prod = t.value(matmul(eye, m));
    CHECK(prod == t.value(m));

    Var r = t.leaf(Tensor::matrix(1, 2, {1, 2}));
    Var c = t.leaf(Tensor::matrix(2, 1, {3, 4}));
    CHECK(t.value(matmul(r, c)).item() == 11.0);

    CHECK_THROWS_AS(matmul(r, r), std::invalid_argument);
}

TEST_CASE("activations forward") {
    Tape t;
    Var x = t.leaf(Tensor::vector({-1, 0, 2}));
    Tensor r = t.value(relu(x));
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
    CHECK(r[2] == 2.0);

    CHECK(t.value(sigmoid(t.constant(0.0))).item() == 0.5);

    // d softplus/dx at 0 equals sigmoid(0)
    Tape t2;
    Var z = t2.leaf(Tensor::scalar(0.0));
    Var sp = softplus(z);
    t2.backward(sp);
    CHECK(t2.grad(z).item() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("log domain error names the index") {
    Tape t;
    Var x = t.leaf(Tensor::vector({1.0, -0.5, 2.0}));
    try {
        Var l = log(x);
        (void)l;
        FAIL("expected a domain error");
    } catch (const NumericalError& err) {
        CHECK(std::string(err.what()).find("index 1") != std::string::npos);
    }
}

TEST_CASE("reductions") {
    Tape t;
    CHECK(t.value(mean(t.leaf(Tensor::vector({1, 2, 3})))).item() == doctest::Approx(2.0));
    CHECK(t.value(l2_norm(t.leaf(Tensor::vector({3, 4})))).item() == doctest::Approx(5.0).epsilon(1e-15));
    CHECK_THROWS_AS(sum(t.leaf(Tensor::zeros({0}))), std::invalid_argument);

    Tape t2;
    Var x = t2.leaf(Tensor::vector({1, 2, 3, 4}));
    t2.backward(mean(x));
    for (std::size_t i = 0; i < 4; ++i) CHECK(t2.grad(x)[i] == doctest::Approx(0.25));
}

TEST_CASE("backward basics") {
    Tape t;
    Var x = t.leaf(Tensor::vector({1, -2}));
    Var loss = sum(x * x);
    t.backward(loss);
    CHECK(t.grad(x)[0] == doctest::Approx(2.0));
    CHECK(t.grad(x)[1] == doctest::Approx(-4.0));

    // second backward without re-recording is rejected
    CHECK_THROWS_AS(t.backward(loss), std::logic_error);
}

TEST_CASE("non-scalar root rejected") {
    Tape t;
    Var x = t.leaf(Tensor::vector({1, 2}));
    CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
}

TEST_CASE("unused leaf gradient is exactly zero") {
    Tape t;
    Var x = t.leaf(Tensor::vector({1, 2}));
    Var unused = t.leaf(Tensor::vector({5, 6}));
    t.backward(sum(x));
    Tensor g = t.grad(unused);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
}

TEST_CASE("matmul gradient vs central differences") {
    Rng rng(7);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    // check grad wrt a with b fixed
    auto f = [&](Tape& tape, Var av) {
        Var bv = tape.constant(b);
        return sum(matmul(av, bv));
    };
    CHECK(finite_difference_check(f, a, 1e-5) < 1e-4);
}

TEST_CASE("two-layer MLP loss vs central differences") {
    Rng rng(11);
    Tensor w1 = random_tensor({5, 8}, rng, -0.8, 0.8);
    Tensor w2 = random_tensor({8, 1}, rng, -0.8, 0.8);
    Tensor x = random_tensor({4, 5}, rng);
    // differentiate wrt w1, everything else fixed
    auto f = [&](Tape& tape, Var w1v) {
        Var xv = tape.constant(x);
        Var w2v = tape.constant(w2);
        Var h = tanh(matmul(xv, w1v));
        Var out = sigmoid(matmul(h, w2v));
        return sum(out * out);
    };
    CHECK(finite_difference_check(f, w1, 1e-5) < 1e-4);
}

TEST_CASE("every primitive passes finite-difference checks on 10 seeds") {
    struct Case {
        const char* name;
        TapeFn fn;
        Tensor (*sample)(Rng&);
    };
    auto anywhere = [](Rng& rng) { return random_tensor({2, 3}, rng); };
    auto positive = [](Rng& rng) { return random_tensor({2, 3}, rng, 0.2, 3.0); };
    auto nonkink = [](Rng& rng) { return random_tensor_away_from({2, 3}, rng, -3.0, 3.0, 0.15); };

    const Tensor other = Tensor::matrix(2, 3, {0.4, -1.2, 2.0, 1.1, -0.3, 0.7});
    std::vector<Case> cases = {
        {"add", [&](Tape& t, Var x) { return sum(x + t.constant(other)); }, anywhere},
        {"sub", [&](Tape& t, Var x) { return sum(t.constant(other) - x); }, anywhere},
        {"mul", [&](Tape& t, Var x) { return sum(x * t.constant(other)); }, anywhere},
        {"div", [&](Tape& t, Var x) { return sum(t.constant(other) / x); }, nonkink},
        {"div_num", [&](Tape& t, Var x) { return sum(x / t.constant(other)); }, anywhere},
        {"mul_scalar", [&](Tape& t, Var x) { return sum(x) * t.constant(1.7); }, anywhere},
        {"emax", [&](Tape& t, Var x) { return sum(emax(x, t.constant(other))); }, nonkink},
        {"emin", [&](Tape& t, Var x) { return sum(emin(x, t.constant(0.1))); }, nonkink},
        {"matmul",
         [&](Tape& t, Var x) {
             Var w = t.constant(Tensor::matrix(3, 2, {0.3, -0.8, 1.2, 0.5, -0.4, 0.9}));
             return sum(matmul(x, w));
         },
         anywhere},
        {"transpose", [](Tape&, Var x) { return sum(transpose(x) * transpose(x)); }, anywhere},
        {"relu", [](Tape&, Var x) { return sum(relu(x)); }, nonkink},
        {"sigmoid", [](Tape&, Var x) { return sum(sigmoid(x)); }, anywhere},
        {"softplus", [](Tape&, Var x) { return sum(softplus(x)); }, anywhere},
        {"exp", [](Tape&, Var x) { return sum(exp(x)); }, anywhere},
        {"log", [](Tape&, Var x) { return sum(log(x)); }, positive},
        {"tanh", [](Tape&, Var x) { return sum(tanh(x)); }, anywhere},
        {"sqrt", [](Tape&, Var x) { return sum(sqrt(x)); }, positive},
        {"abs", [](Tape&, Var x) { return sum(abs(x)); }, nonkink},
        {"sum", [](Tape&, Var x) { return sum(x * x); }, anywhere},
        {"mean", [](Tape&, Var x) { return mean(x * x); }, anywhere},
        {"l2_norm", [](Tape&, Var x) { return l2_norm(x); }, nonkink},
        {"sum_rows", [](Tape&, Var x) { return sum(sum_rows(x) * sum_rows(x)); }, anywhere},
        {"sum_cols", [](Tape&, Var x) { return sum(sum_cols(x) * sum_cols(x)); }, anywhere},
        {"broadcast_rows",
         [](Tape&, Var x) {
             Var v = sum_rows(x);
             return sum(broadcast_rows(v, 4) * broadcast_rows(v, 4));
         },
         anywhere},
        {"broadcast_cols",
         [](Tape&, Var x) {
             Var v = sum_cols(x);
             return sum(broadcast_cols(v, 5) * broadcast_cols(v, 5));
         },
         anywhere},
        {"take_column", [](Tape&, Var x) { return sum(take_column(x, 1) * take_column(x, 1)); }, anywhere},
        {"put_column", [](Tape&, Var x) { return sum(put_column(sum_cols(x), 2, 4) * 1.5); }, anywhere},
        {"reshape", [](Tape&, Var x) { return sum(reshape(x, {6}) * reshape(x, {6})); }, anywhere},
        {"lgamma", [](Tape&, Var x) { return sum(lgamma(x)); }, positive},
        {"digamma", [](Tape&, Var x) { return sum(digamma_v(x)); }, positive},
    };

    for (const auto& c : cases) {
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Rng rng(seed * 31 + 1);
            Tensor x = c.sample(rng);
            worst = std::max(worst, finite_difference_check(c.fn, x, 1e-5));
        }
        INFO("primitive: " << c.name);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("gradient linearity: grad(sum of losses) == sum of grads") {
    Rng rng(3);
    Tensor x0 = random_tensor({4}, rng);

    auto f1 = [](Tape&, Var x) { return sum(x * x); };
    auto f2 = [](Tape&, Var x) { return sum(sigmoid(x)); };

    Tensor g1 = analytic_gradient(f1, x0);
    Tensor g2 = analytic_gradient(f2, x0);
    Tensor g12 = analytic_gradient([&](Tape& t, Var x) { return f1(t, x) + f2(t, x); }, x0);
    for (std::size_t i = 0; i < x0.size(); ++i) {
        CHECK(std::abs(g12[i] - (g1[i] + g2[i])) <= 1e-12);
    }
}

TEST_CASE("double backward through l2_norm of a gradient") {
    // f(w) = (||d/dx critic(x; w)|| - 1)^2 for a tiny 2-unit critic; the
    // outer derivative wrt w must match finite differences.
    Rng rng(5);
    Tensor w0 = random_tensor({3, 2}, rng, -1.0, 1.0);
    Tensor x0 = random_tensor({1, 3}, rng);
    Tensor v0 = random_tensor({2, 1}, rng, -1.0, 1.0);

    auto f = [&](Tape& t, Var w) {
        Var x = t.leaf(x0, true);
        Var v = t.constant(v0);
        Var score = sum(matmul(tanh(matmul(x, w)), v));
        Var gx = t.grad_var(score, x);
        Var n = l2_norm(gx);
        return (n - 1.0) * (n - 1.0);
    };
    CHECK(finite_difference_check(f, w0, 1e-5) < 1e-3);
}

TEST_CASE("replaying identical inputs is bitwise deterministic") {
    Rng rng(17);
    Tensor x0 = random_tensor({8}, rng);
    auto run = [&]() {
        Tape t;
        Var x = t.leaf(x0, true);
        Var loss = sum(sigmoid(x) * tanh(x)) + l2_norm(x);
        t.backward(loss);
        return std::pair{t.value(loss).item(), t.grad(x)};
    };
    auto [l1, g1] = run();
    auto [l2, g2] = run();
    CHECK(l1 == l2);
    CHECK(g1 == g2);
}

TEST_CASE("finite_difference_check on trivial cases") {
    Rng rng(23);
    // constant gradient: f = sum(x)
    Tensor x = random_tensor({5}, rng);
    CHECK(finite_difference_check([](Tape&, Var v) { return sum(v); }, x, 1e-5) < 1e-9);
    // f = sum(sigmoid(x)) on [-3,3]^5
    Tensor x2 = random_tensor({5}, rng);
    CHECK(finite_difference_check([](Tape&, Var v) { return sum(sigmoid(v)); }, x2, 1e-5) < 1e-4);
}

TEST_CASE("special function values") {
    // digamma(1) = -gamma, trigamma(1) = pi^2/6
    CHECK(digamma(1.0) == doctest::Approx(-0.57721566490153286).epsilon(1e-12));
    CHECK(trigamma(1.0) == doctest::Approx(1.6449340668482264).epsilon(1e-12));
    CHECK(digamma(5.5) == doctest::Approx(1.6110931485817511).epsilon(1e-10));
}

TEST_CASE("rng determinism and stats") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.u64() == b.u64());

    Rng r(1);
    double acc = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) acc += r.normal();
    CHECK(std::abs(acc / n) < 4.0 / std::sqrt(static_cast<double>(n)));

    Rng p(2);
    CHECK(p.poisson(0.0) == 0);
    double mean_p = 0.0;
    for (int i = 0; i < 20000; ++i) mean_p += static_cast<double>(p.poisson(3.5));
    mean_p /= 20000.0;
    CHECK(mean_p == doctest::Approx(3.5).epsilon(0.05));
}
