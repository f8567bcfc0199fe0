#include <random>

#include "doctest.h"
#include "htr/mlp.hpp"
#include "test_util.hpp"

using namespace htr;
using htr_test::grads_of;
using htr_test::max_rel_err_fd;
using htr_test::random_matrix;
using htr_test::zero_grads;

namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

}  // namespace

TEST_CASE("matmul matches a hand-rolled triple loop") {
    std::mt19937_64 rng(7);
    for (auto [m, k, n] : {std::array{3, 4, 5}, std::array{1, 7, 1}, std::array{6, 1, 3}}) {
        Matrix a = random_matrix(m, k, rng);
        Matrix b = random_matrix(k, n, rng);
        Matrix c = matmul(a, b);
        Matrix ref = naive_matmul(a, b);
        for (size_t i = 0; i < c.size(); ++i)
            CHECK(c.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("random 2-4-1 net matches an independent forward oracle") {
    std::mt19937_64 rng(42);
    Mlp net(MlpSpec{2, 1, {4}, Activation::relu}, "net", rng);
    std::mt19937_64 xrng(11);
    Matrix x = random_matrix(5, 2, xrng, 2.0);

    // params() lists weights first, then biases.
    auto ps = net.params();
    const Matrix& w0 = ps[0]->value;  // 2x4
    const Matrix& w1 = ps[1]->value;  // 4x1
    const Matrix& b0 = ps[2]->value;  // 1x4
    const Matrix& b1 = ps[3]->value;  // 1x1

    Matrix out = net.apply(x);
    REQUIRE(out.rows == 5);
    REQUIRE(out.cols == 1);
    for (int i = 0; i < x.rows; ++i) {
        double h[4];
        for (int j = 0; j < 4; ++j) {
            double s = b0(0, j);
            for (int k = 0; k < 2; ++k) s += x(i, k) * w0(k, j);
            h[j] = s > 0.0 ? s : 0.0;
        }
        double y = b1(0, 0);
        for (int j = 0; j < 4; ++j) y += h[j] * w1(j, 0);
        CHECK(out(i, 0) == doctest::Approx(y).epsilon(1e-12));
    }
}

TEST_CASE("tape forward agrees exactly with plain apply") {
    std::mt19937_64 rng(3);
    Mlp net(MlpSpec{3, 2, {8, 8}, Activation::tanh}, "net", rng);
    Matrix x = random_matrix(4, 3, rng);
    Tape t;
    Tape::Var y = net.forward(t, t.input(x));
    Matrix ref = net.apply(x);
    for (size_t i = 0; i < ref.size(); ++i)
        CHECK(t.value(y).data[i] == ref.data[i]);  // bitwise
}

TEST_CASE("identity linear layer passes inputs through") {
    std::mt19937_64 rng(1);
    Mlp net(MlpSpec{3, 3, {}, Activation::relu}, "net", rng);
    auto ps = net.params();
    for (size_t i = 0; i < ps[0]->value.size(); ++i) ps[0]->value.data[i] = 0.0;
    for (int i = 0; i < 3; ++i) ps[0]->value(i, i) = 1.0;
    Matrix x = random_matrix(6, 3, rng, 5.0);
    Matrix y = net.apply(x);
    for (size_t i = 0; i < x.size(); ++i) CHECK(y.data[i] == x.data[i]);
}

TEST_CASE("gradients of elementwise ops match central finite differences") {
    std::mt19937_64 rng(17);
    ParamTensor x("x", random_matrix(3, 4, rng, 0.8));
    // Keep values away from relu/clamp kinks and log domain edges.
    for (double& v : x.value.data)
        if (std::abs(v) < 0.05) v += 0.1;

    auto finish = [](Tape& t, Tape::Var v) { return t.mean(t.square(v)); };

    std::vector<std::pair<const char*, std::function<Tape::Var(Tape&, Tape::Var)>>> ops = {
        {"relu", [](Tape& t, Tape::Var a) { return t.relu(a); }},
        {"tanh", [](Tape& t, Tape::Var a) { return t.tanh(a); }},
        {"exp", [](Tape& t, Tape::Var a) { return t.exp(a); }},
        {"softplus", [](Tape& t, Tape::Var a) { return t.softplus(a); }},
        {"log(softplus)", [](Tape& t, Tape::Var a) { return t.log(t.softplus(a)); }},
        {"sqrt(exp)", [](Tape& t, Tape::Var a) { return t.sqrt(t.exp(a)); }},
        {"reciprocal(exp)", [](Tape& t, Tape::Var a) { return t.reciprocal(t.exp(a)); }},
        {"clamp", [](Tape& t, Tape::Var a) { return t.clamp(a, -0.5, 0.5); }},
        {"scale+add_scalar",
         [](Tape& t, Tape::Var a) { return t.add_scalar(t.scale(a, 2.5), -0.3); }},
        {"square", [](Tape& t, Tape::Var a) { return t.square(a); }},
        {"row_sum", [](Tape& t, Tape::Var a) { return t.row_sum(a); }},
        {"col_sum", [](Tape& t, Tape::Var a) { return t.col_sum(a); }},
    };

    for (auto& [name, op] : ops) {
        CAPTURE(name);
        auto loss_value = [&]() {
            Tape t;
            return t.value(finish(t, op(t, t.param(&x))))(0, 0);
        };
        x.zero_grad();
        Tape t;
        t.backward(finish(t, op(t, t.param(&x))));
        CHECK(max_rel_err_fd({&x}, grads_of({&x}), loss_value) < 1e-4);
    }
}

TEST_CASE("gradients of binary and shape ops match finite differences") {
    std::mt19937_64 rng(29);
    ParamTensor a("a", random_matrix(3, 4, rng, 0.9));
    ParamTensor b("b", random_matrix(3, 4, rng, 0.9));
    ParamTensor w("w", random_matrix(8, 2, rng, 0.9));
    ParamTensor bias("bias", random_matrix(1, 4, rng, 0.9));
    ParamTensor row("row", random_matrix(1, 4, rng, 0.9));
    // Avoid minimum() ties and kinks.
    for (size_t i = 0; i < a.value.size(); ++i)
        if (std::abs(a.value.data[i] - b.value.data[i]) < 0.05) b.value.data[i] += 0.1;

    Matrix mask = random_matrix(3, 4, rng, 1.0);

    auto build = [&](Tape& t) {
        Tape::Var av = t.param(&a);
        Tape::Var bv = t.param(&b);
        Tape::Var sum = t.add(av, bv);
        Tape::Var diff = t.sub(av, bv);
        Tape::Var prod = t.mul(t.tanh(av), t.tanh(bv));
        Tape::Var mn = t.minimum(av, bv);
        Tape::Var masked = t.mul_const(sum, mask);
        Tape::Var biased = t.add_rowvec(diff, t.param(&bias));
        Tape::Var rep = t.repeat_rows(t.param(&row), 3);
        Tape::Var cat = t.hconcat(t.add(prod, mn), t.add(masked, t.add(biased, rep)));
        Tape::Var proj = t.matmul(cat, t.param(&w));
        return t.mean(t.square(t.tanh(proj)));
    };
    std::vector<ParamTensor*> ps{&a, &b, &w, &bias, &row};
    zero_grads(ps);
    {
        Tape t;
        t.backward(build(t));
    }
    auto loss_value = [&]() {
        Tape t;
        return t.value(build(t))(0, 0);
    };
    CHECK(max_rel_err_fd(ps, grads_of(ps), loss_value) < 1e-4);
}

TEST_CASE("mlp gradients match finite differences") {
    std::mt19937_64 rng(5);
    for (Activation act : {Activation::relu, Activation::tanh}) {
        Mlp net(MlpSpec{3, 2, {5, 5}, act}, "net", rng);
        Matrix x = random_matrix(6, 3, rng);
        auto ps = net.params();
        auto build = [&](Tape& t) { return t.mean(t.square(net.forward(t, t.input(x)))); };
        zero_grads(ps);
        {
            Tape t;
            t.backward(build(t));
        }
        auto loss_value = [&]() {
            Tape t;
            return t.value(build(t))(0, 0);
        };
        CHECK(max_rel_err_fd(ps, grads_of(ps), loss_value) < 1e-4);
    }
}

TEST_CASE("forward_const_params gives gradients through inputs only") {
    std::mt19937_64 rng(13);
    Mlp net(MlpSpec{2, 1, {4}, Activation::tanh}, "net", rng);
    ParamTensor x("x", random_matrix(3, 2, rng));
    auto ps = net.params();
    zero_grads(ps);
    x.zero_grad();
    Tape t;
    t.backward(t.mean(t.square(net.forward_const_params(t, t.param(&x)))));
    for (auto* p : ps)
        for (double g : p->grad.data) CHECK(g == 0.0);
    double total = 0.0;
    for (double g : x.grad.data) total += std::abs(g);
    CHECK(total > 0.0);

    // And the input gradient itself is right.
    auto loss_value = [&]() {
        Tape t2;
        return t2.value(t2.mean(t2.square(net.forward_const_params(t2, t2.param(&x)))))(0, 0);
    };
    CHECK(max_rel_err_fd({&x}, grads_of({&x}), loss_value) < 1e-4);
}

TEST_CASE("stop_gradient and unused params receive no gradient") {
    std::mt19937_64 rng(23);
    ParamTensor x("x", random_matrix(2, 2, rng));
    ParamTensor unused("unused", random_matrix(2, 2, rng));
    x.zero_grad();
    unused.zero_grad();
    Tape t;
    Tape::Var live = t.param(&x);
    (void)t.param(&unused);
    Tape::Var frozen = t.stop_gradient(t.scale(live, 3.0));
    t.backward(t.sum(t.mul(frozen, frozen)));
    for (double g : x.grad.data) CHECK(g == 0.0);
    for (double g : unused.grad.data) CHECK(g == 0.0);
}

TEST_CASE("backward accumulates across params reused on the tape") {
    ParamTensor x("x", Matrix(1, 1, {2.0}));
    x.zero_grad();
    Tape t;
    // loss = x*x + 3x => d/dx = 2x + 3 = 7
    Tape::Var a = t.param(&x);
    Tape::Var b = t.param(&x);
    t.backward(t.sum(t.add(t.mul(a, b), t.scale(a, 3.0))));
    CHECK(x.grad(0, 0) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar losses") {
    Tape t;
    Tape::Var v = t.input(Matrix(2, 2));
    CHECK_THROWS_AS(t.backward(v), std::invalid_argument);
}

TEST_CASE("adam first step has the closed form lr*g/(|g|+eps)") {
    ParamTensor p("p", Matrix(1, 3, {1.0, -2.0, 0.5}));
    p.grad = Matrix(1, 3, {0.3, -0.7, 1.9});
    const AdamConfig cfg{1e-2};
    const Matrix before = p.value;
    const Matrix g = p.grad;
    adam_step({&p}, cfg);
    for (int j = 0; j < 3; ++j) {
        const double expect =
            before(0, j) - cfg.lr * g(0, j) / (std::abs(g(0, j)) + cfg.eps);
        CHECK(p.value(0, j) == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(p.adam_step == 1);
    for (double v : p.grad.data) CHECK(v == 0.0);  // grads cleared

    // Constant gradient: bias correction keeps every step at the same size.
    p.grad = g;
    const Matrix mid = p.value;
    adam_step({&p}, cfg);
    for (int j = 0; j < 3; ++j) {
        const double expect =
            mid(0, j) - cfg.lr * g(0, j) / (std::abs(g(0, j)) + cfg.eps);
        CHECK(p.value(0, j) == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("adam refuses non-finite gradients") {
    ParamTensor p("p", Matrix(1, 1, {1.0}));
    p.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step({&p}, AdamConfig{}), std::runtime_error);
}

TEST_CASE("adam descends a simple quadratic") {
    ParamTensor p("p", Matrix(1, 1, {5.0}));
    const AdamConfig cfg{5e-2};
    for (int i = 0; i < 4000; ++i) {
        p.grad(0, 0) = 2.0 * (p.value(0, 0) - 1.5);
        adam_step({&p}, cfg);
    }
    CHECK(p.value(0, 0) == doctest::Approx(1.5).epsilon(1e-4));
}

TEST_CASE("param_count matches the dense closed form") {
    std::mt19937_64 rng(2);
    Mlp net(MlpSpec{7, 3, {11, 13}, Activation::relu}, "net", rng);
    CHECK(net.param_count() == 7 * 11 + 11 + 11 * 13 + 13 + 13 * 3 + 3);
}

TEST_CASE("tanh-squashed sampling: shrinking std collapses to tanh(mean)") {
    DiagGaussianHead head{{0.4, -1.2}, {-40.0, -40.0}};  // clamps to -20
    std::mt19937_64 rng(9);
    SquashedSample s = sample_gaussian_tanh(head, rng);
    CHECK(s.action[0] == doctest::Approx(std::tanh(0.4)).epsilon(1e-7));
    CHECK(s.action[1] == doctest::Approx(std::tanh(-1.2)).epsilon(1e-7));
    CHECK(std::isfinite(s.log_prob));
    // Density of a near-deterministic action is enormous but finite.
    CHECK(s.log_prob > 0.0);
}

TEST_CASE("tanh-squashed sampling stays bounded with finite log_prob") {
    // Saturating pre-squash values may round tanh to exactly +-1; the eps
    // guard must still keep the log_prob finite.
    DiagGaussianHead head{{0.0, 10.0}, {2.0, 50.0}};  // log_std clamps to 2
    std::mt19937_64 rng(31);
    bool ok = true;
    for (int i = 0; i < 2000; ++i) {
        SquashedSample s = sample_gaussian_tanh(head, rng);
        for (double a : s.action) ok = ok && a >= -1.0 && a <= 1.0;
        ok = ok && std::isfinite(s.log_prob);
    }
    CHECK(ok);
}

TEST_CASE("pre-squash samples recover the Gaussian mean") {
    DiagGaussianHead head{{0.3}, {std::log(0.5)}};
    std::mt19937_64 rng(77);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        SquashedSample s = sample_gaussian_tanh(head, rng);
        sum += std::atanh(s.action[0]);
    }
    // 5 sigma of the mean estimator.
    CHECK(std::abs(sum / n - 0.3) < 5.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("squash_sample_vars matches the scalar sampler with shared noise") {
    const std::vector<double> mean{0.2, -0.6, 1.1};
    const std::vector<double> log_std{-0.5, 0.3, -1.7};
    std::mt19937_64 rng_scalar(101), rng_noise(101);
    DiagGaussianHead head{mean, log_std};
    SquashedSample ref = sample_gaussian_tanh(head, rng_scalar);

    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix noise(1, 3);
    for (double& v : noise.data) v = normal(rng_noise);

    Matrix raw(1, 6);
    for (int j = 0; j < 3; ++j) {
        raw(0, j) = mean[j];
        raw(0, 3 + j) = log_std[j];
    }
    Tape t;
    SquashedSampleVars s = squash_sample_vars(t, t.input(raw), noise);
    for (int j = 0; j < 3; ++j)
        CHECK(t.value(s.action)(0, j) == doctest::Approx(ref.action[j]).epsilon(1e-12));
    CHECK(t.value(s.log_prob)(0, 0) == doctest::Approx(ref.log_prob).epsilon(1e-12));
}

TEST_CASE("squash_sample_vars log_prob at the mode drops to the Gaussian terms") {
    // noise = 0, mean = 0: action = 0, tanh correction is -log(1 + eps) ~ 0.
    Matrix raw(1, 4);
    raw(0, 2) = -0.4;
    raw(0, 3) = 0.9;
    Tape t;
    SquashedSampleVars s = squash_sample_vars(t, t.input(raw), Matrix(1, 2));
    const double expect = -std::log(2.0 * M_PI) - (-0.4 + 0.9);
    CHECK(t.value(s.action)(0, 0) == 0.0);
    CHECK(t.value(s.log_prob)(0, 0) == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("squash_sample_vars gradients match finite differences") {
    std::mt19937_64 rng(55);
    ParamTensor raw("raw", random_matrix(2, 6, rng, 0.8));
    Matrix noise = random_matrix(2, 3, rng, 1.0);
    auto build = [&](Tape& t) {
        SquashedSampleVars s = squash_sample_vars(t, t.param(&raw), noise);
        return t.add(t.mean(s.log_prob), t.mean(t.square(s.action)));
    };
    raw.zero_grad();
    {
        Tape t;
        t.backward(build(t));
    }
    auto loss_value = [&]() {
        Tape t;
        return t.value(build(t))(0, 0);
    };
    CHECK(max_rel_err_fd({&raw}, grads_of({&raw}), loss_value) < 1e-4);
}
