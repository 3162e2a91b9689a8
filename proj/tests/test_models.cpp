#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "advaug/checkpoint.hpp"
#include "advaug/errors.hpp"
#include "advaug/gradcheck.hpp"
#include "advaug/losses.hpp"
#include "advaug/synthesizer.hpp"
#include "support/oracles.hpp"

using namespace advaug;

namespace {

void zero_parameters(DenseNet& net) {
    for (Tensor* p : net.parameters()) {
        for (std::size_t i = 0; i < p->size(); ++i) (*p)[i] = 0.0;
    }
}

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    std::vector<double> data(r * c);
    for (auto& v : data) v = rng.normal(0.0, scale);
    return Tensor::from({r, c}, std::move(data));
}

} // namespace

TEST_CASE("zero-weight classifier outputs") {
    Rng rng(1);
    Classifier ce = Classifier::make({8, 4}, 2, HeadKind::cross_entropy, rng);
    zero_parameters(ce.net);
    CHECK(ce.confidence(Tensor::vector({0.3, -1.2})) == doctest::Approx(0.5).epsilon(1e-15));

    Classifier beta = Classifier::make({8, 4}, 2, HeadKind::beta, rng);
    zero_parameters(beta.net);
    auto r = beta.classify(Tensor::vector({0.7, 0.1}));
    REQUIRE(r.evidence.has_value());
    const double ln2 = std::log(2.0);
    CHECK(r.evidence->e_pos == doctest::Approx(ln2).epsilon(1e-12));
    CHECK(r.evidence->e_neg == doctest::Approx(ln2).epsilon(1e-12));
    CHECK(r.probability == doctest::Approx(0.5).epsilon(1e-12));

    // symmetric by construction: uncertainty is the max over any input batch
    double u0 = r.evidence->uncertainty();
    Rng probe(9);
    for (int i = 0; i < 32; ++i) {
        Tensor x = Tensor::vector({probe.normal(), probe.normal()});
        CHECK(beta.classify(x).evidence->uncertainty() == doctest::Approx(u0).epsilon(1e-12));
    }

    CHECK_THROWS_AS(ce.confidence(Tensor::vector({1.0, 2.0, 3.0})), std::invalid_argument);
}

TEST_CASE("confidence monotone in evidence") {
    EvidenceOutput base{1.0, 1.0};
    double prev = base.confidence();
    for (double ep = 1.5; ep < 10.0; ep += 0.5) {
        EvidenceOutput e{ep, 1.0};
        CHECK(e.confidence() > prev);
        prev = e.confidence();
    }
    prev = base.confidence();
    for (double en = 1.5; en < 10.0; en += 0.5) {
        EvidenceOutput e{1.0, en};
        CHECK(e.confidence() < prev);
        prev = e.confidence();
    }
}

TEST_CASE("cross-entropy loss values and gradient") {
    {
        Tape t;
        Var p = t.leaf(Tensor::scalar(0.5));
        CHECK(t.value(loss_cross_entropy(p, 1.0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    {
        Tape t;
        Var p = t.leaf(Tensor::scalar(1.0));
        CHECK(t.value(loss_cross_entropy(p, 1.0)).item() < 1e-6);
    }
    auto f = [](Tape& t, Var x) {
        (void)t;
        return loss_cross_entropy(sigmoid(sum(x * x)), 1.0);
    };
    Rng rng(4);
    Tensor x = random_matrix(1, 3, rng);
    CHECK(finite_difference_check(f, x, 1e-5) < 1e-4);
}

TEST_CASE("beta evidence loss: closed form at zero evidence") {
    // e = (0,0) -> Beta(1,1): expected MSE against a one-hot target is
    // (g-1/2)^2 + ((1-g)-1/2)^2 + 2*Var, Var = (1/2)(1/2)/(S+1) with S=2,
    // i.e. 0.25 + 0.25 + 2*(0.25/3) = 2/3; the adjusted KL vanishes.
    for (double g : {0.0, 1.0}) {
        for (double anneal : {0.0, 0.37, 1.0}) {
            Tape t;
            Var ep = t.leaf(Tensor::scalar(0.0));
            Var en = t.leaf(Tensor::scalar(0.0), false);
            double v = t.value(loss_beta_evidence(ep, en, g, anneal)).item();
            CHECK(v == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("beta evidence loss: confident-correct limit") {
    Tape t;
    Var ep = t.leaf(Tensor::scalar(1e6));
    Var en = t.leaf(Tensor::scalar(0.0), false);
    double v0 = t.value(loss_beta_evidence(ep, en, 1.0, 0.0)).item();
    CHECK(v0 < 1e-5);
    // with g=1 the adjusted parameters are (1, e_neg+1) = (1,1), so the KL
    // term stays zero at any anneal weight
    Tape t2;
    Var ep2 = t2.leaf(Tensor::scalar(1e6));
    Var en2 = t2.leaf(Tensor::scalar(0.0), false);
    double v1 = t2.value(loss_beta_evidence(ep2, en2, 1.0, 1.0)).item();
    CHECK(v1 < 1e-5);
}

TEST_CASE("beta evidence loss gradient vs finite differences") {
    for (double g : {0.0, 1.0}) {
        for (double anneal : {0.0, 0.5}) {
            auto f = [&](Tape& t, Var x) {
                Var ep = softplus(take_column(reshape(x, {1, 2}), 0));
                Var en = softplus(take_column(reshape(x, {1, 2}), 1));
                (void)t;
                return sum(loss_beta_evidence_vec(ep, en, {g}, anneal));
            };
            Rng rng(11 + static_cast<std::uint64_t>(g));
            Tensor x = Tensor::vector({rng.normal(), rng.normal()});
            CHECK(finite_difference_check(f, x, 1e-5) < 1e-4);
        }
    }
}

TEST_CASE("gaussian KL closed form") {
    {
        Tensor mu = Tensor::vector({0.0});
        Tensor sigma = Tensor::vector({1.0});
        CHECK(kl_to_standard_normal(mu, sigma) == doctest::Approx(0.0).epsilon(1e-15));
    }
    CHECK(kl_to_standard_normal(Tensor::vector({1.0}), Tensor::vector({1.0})) ==
          doctest::Approx(0.5).epsilon(1e-12));

    // non-negativity, zero only at (0,1)
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        Tensor mu = Tensor::vector({rng.uniform(-3, 3)});
        Tensor sigma = Tensor::vector({std::exp(rng.uniform(-2, 2))});
        double kl = kl_to_standard_normal(mu, sigma);
        CHECK(kl >= 0.0);
        if (std::abs(mu[0]) > 1e-3 || std::abs(sigma[0] - 1.0) > 1e-3) CHECK(kl > 0.0);
    }

    // quadrature oracle
    for (auto [m, s] : {std::pair{0.7, 1.3}, std::pair{-1.4, 0.5}, std::pair{2.0, 2.0}}) {
        double closed = kl_to_standard_normal(Tensor::vector({m}), Tensor::vector({s}));
        CHECK(std::abs(closed - oracles::gaussian_kl_quadrature(m, s)) < 1e-9);
    }

    // on-tape version matches and differentiates
    auto f = [](Tape& t, Var x) {
        Var mu = take_column(reshape(x, {1, 2}), 0);
        Var sigma = exp(take_column(reshape(x, {1, 2}), 1));
        (void)t;
        return kl_to_standard_normal(mu, sigma);
    };
    Tensor x = Tensor::vector({0.8, -0.4});
    CHECK(finite_difference_check(f, x, 1e-5) < 1e-4);
}

TEST_CASE("reparameterize") {
    // sigma = 0 -> deterministic
    {
        Tape t;
        Var mu = t.leaf(Tensor::vector({1.5, -2.0}));
        Var sigma = t.constant(Tensor::vector({0.0, 0.0}));
        Rng rng(3);
        Tensor u = standard_normal({2}, rng);
        Var z = reparameterize(mu, sigma, u);
        CHECK(t.value(z)[0] == 1.5);
        CHECK(t.value(z)[1] == -2.0);
        // gradient of sum(z) wrt mu is ones
        t.backward(sum(z));
        CHECK(t.grad(mu)[0] == 1.0);
        CHECK(t.grad(mu)[1] == 1.0);
    }
    // empirical mean of draws approaches mu
    {
        Rng rng(7);
        const int n = 100000;
        const double mu = 0.4, sigma = 1.7;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            Tensor z = reparameterize_value(Tensor::vector({mu}), Tensor::vector({sigma}), rng);
            acc += z[0];
        }
        double bound = 3.0 * sigma / std::sqrt(static_cast<double>(n));
        CHECK(std::abs(acc / n - mu) < bound);
    }
}

TEST_CASE("encode: zero-weight encoder gives mu=0 sigma=1") {
    Rng rng(2);
    SynthesizerBundle b = SynthesizerBundle::make(2, 2, 8, Activation::identity, rng);
    zero_parameters(b.encoder);
    auto [mu, sigma] = encode(b, Tensor::vector({0.3, -0.9}));
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(mu[i] == 0.0);
        CHECK(sigma[i] == 1.0);
    }
    // sigma positivity over random inputs
    Rng probe(8);
    SynthesizerBundle b2 = SynthesizerBundle::make(2, 2, 8, Activation::identity, probe);
    for (int i = 0; i < 1000; ++i) {
        auto [m2, s2] = encode(b2, Tensor::vector({probe.normal(), probe.normal()}));
        (void)m2;
        CHECK(s2[0] > 0.0);
        CHECK(s2[1] > 0.0);
    }
}

TEST_CASE("wgan-gp loss combiner") {
    Tensor d = Tensor::vector({0.3, -0.2, 1.1});
    Tensor ones = Tensor::ones({3});
    CHECK(wgan_gp_loss_value(d, d, ones, 10.0) == doctest::Approx(0.0).epsilon(1e-15));
    // constant critic: zero gradients -> penalty = lambda_gp * 1
    Tensor zeros = Tensor::zeros({3});
    Tensor dc = Tensor::full({3}, 0.7);
    CHECK(wgan_gp_loss_value(dc, dc, zeros, 10.0) == doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("wgan-gp full loss gradient vs finite differences") {
    Rng rng(13);
    Rng data_rng(14);
    Tensor real = random_matrix(3, 2, data_rng);
    Tensor fake = random_matrix(3, 2, data_rng);

    DenseNet critic = DenseNet::make({2, 4, 1}, {Activation::tanh, Activation::identity}, rng);
    // differentiate wrt the first-layer weight matrix
    auto f = [&](Tape& t, Var w0) {
        DenseNet::Binding binding;
        binding.weights.push_back(w0);
        binding.biases.push_back(t.constant(critic.layers()[0].b));
        binding.weights.push_back(t.constant(critic.layers()[1].w));
        binding.biases.push_back(t.constant(critic.layers()[1].b));
        Rng mix(99); // fixed interpolation draws keep f a pure function of w0
        return wgan_gp_critic_loss(t, critic, binding, real, fake, 10.0, mix).total;
    };
    CHECK(finite_difference_check(f, critic.layers()[0].w, 1e-5) < 1e-3);
}

TEST_CASE("spectral normalization") {
    // diag(3,1): exact top singular value 3
    Tensor w = Tensor::matrix(2, 2, {3, 0, 0, 1});
    Tensor n = spectral_normalize(w, 20);
    CHECK(std::abs(n[0] - 1.0) < 1e-6);
    CHECK(std::abs(n[3] - 1.0 / 3.0) < 1e-6);

    // identity stays identity
    Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
    Tensor ne = spectral_normalize(eye, 5);
    CHECK(max_abs_diff(ne, eye) < 1e-12);

    // zero matrix unchanged (sigma clamped)
    Tensor z = Tensor::zeros({3, 2});
    CHECK(max_abs_diff(spectral_normalize(z, 5), z) == 0.0);

    // operator norm <= 1 + 1e-3 after 5 iterations, SVD oracle
    Rng rng(21);
    for (int i = 0; i < 100; ++i) {
        std::size_t r = 2 + rng.below(5), c = 2 + rng.below(5);
        Tensor m = random_matrix(r, c, rng, 2.0);
        Tensor nm = spectral_normalize(m, 5);
        CHECK(oracles::largest_singular_value(nm) <= 1.0 + 1e-3);
    }
}

TEST_CASE("spectral layer gradient stays exact for frozen u,v") {
    Rng rng(31);
    DenseNet critic = DenseNet::make({3, 4, 1}, {Activation::tanh, Activation::identity}, rng,
                                     /*spectral=*/true);
    critic.update_spectral(3);
    Tensor x = random_matrix(2, 3, rng);
    auto f = [&](Tape& t, Var w0) {
        DenseNet::Binding binding;
        binding.weights.push_back(w0);
        binding.biases.push_back(t.constant(critic.layers()[0].b));
        binding.weights.push_back(t.constant(critic.layers()[1].w));
        binding.biases.push_back(t.constant(critic.layers()[1].b));
        return sum(critic.forward(t, binding, t.constant(x)));
    };
    CHECK(finite_difference_check(f, critic.layers()[0].w, 1e-5) < 1e-4);
}

TEST_CASE("synthesizer: degenerate generator loss is exactly zero") {
    Rng rng(41);
    SynthesizerBundle b = SynthesizerBundle::make(2, 2, 8, Activation::identity, rng);
    zero_parameters(b.encoder);
    zero_parameters(b.generator);
    b.lambda2 = 0.0;
    // zero generator reproduces the all-zero batch exactly; mu=0 sigma=1
    Tensor batch = Tensor::zeros({4, 2});
    Rng loss_rng(1);
    SynthesizerLosses l = synthesizer_total_loss(b, batch, loss_rng);
    CHECK(l.reconstruction == 0.0);
    CHECK(l.kl == 0.0);
    CHECK(l.gen_loss == 0.0);
}

TEST_CASE("synthesizer defaults carry the published weights") {
    Rng rng(5);
    SynthesizerBundle b = SynthesizerBundle::make(2, 2, 8, Activation::identity, rng);
    CHECK(b.lambda1 == doctest::Approx(1e-5));
    CHECK(b.lambda2 == doctest::Approx(0.1));
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    namespace fs = std::filesystem;
    Rng rng(77);
    Classifier model = Classifier::make({16, 8}, 2, HeadKind::beta, rng);
    CheckpointMeta meta;
    meta.seed_lineage = {77};

    fs::path dir = fs::temp_directory_path() / "advaug_ckpt_test";
    fs::create_directories(dir);
    std::string p1 = (dir / "m1.json").string();
    std::string p2 = (dir / "m2.json").string();
    save_classifier(p1, model, meta);
    CheckpointMeta meta2;
    Classifier loaded = load_classifier(p1, &meta2);
    save_classifier(p2, loaded, meta2);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
    CHECK(model_fingerprint(model) == model_fingerprint(loaded));
    CHECK(meta2.seed_lineage == meta.seed_lineage);

    CHECK_THROWS_AS(load_classifier((dir / "missing.json").string()), IoError);
    fs::remove_all(dir);
}

TEST_CASE("synthesizer checkpoint round-trip") {
    namespace fs = std::filesystem;
    Rng rng(78);
    SynthesizerBundle b = SynthesizerBundle::make(4, 2, 8, Activation::sigmoid, rng);
    b.critic.update_spectral(2);
    fs::path dir = fs::temp_directory_path() / "advaug_synth_test";
    fs::create_directories(dir);
    std::string p = (dir / "s.json").string();
    save_synthesizer(p, b, {});
    SynthesizerBundle loaded = load_synthesizer(p);
    CHECK(model_fingerprint(b) == model_fingerprint(loaded));
    Rng probe(3);
    Tensor z = standard_normal({2}, probe);
    CHECK(max_abs_diff(generate(b, z), generate(loaded, z)) == 0.0);
    fs::remove_all(dir);
}
