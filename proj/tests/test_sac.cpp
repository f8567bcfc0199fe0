#include <random>
#include <stdexcept>

#include "doctest.h"
#include "htr/sac.hpp"
#include "test_util.hpp"

using namespace htr;
using htr_test::grads_of;
using htr_test::max_rel_err_fd;
using htr_test::zero_grads;

namespace {

constexpr int kStateDim = 2;
constexpr int kActionDim = 2;
constexpr int kLatentDim = 2;

AgentNets make_nets(SacConfig cfg, uint64_t seed, std::vector<int> hidden = {8, 8}) {
    std::mt19937_64 rng(seed);
    return AgentNets(kStateDim, kActionDim, kLatentDim, std::move(hidden), cfg, rng);
}

std::vector<Transition> make_batch(int n, uint64_t seed, bool done = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Transition> batch;
    for (int i = 0; i < n; ++i) {
        Transition t;
        for (int j = 0; j < kStateDim; ++j) t.state.push_back(u(rng));
        for (int j = 0; j < kActionDim; ++j) t.action.push_back(u(rng));
        t.reward = u(rng);
        for (int j = 0; j < kStateDim; ++j) t.next_state.push_back(u(rng));
        t.done = done;
        batch.push_back(std::move(t));
    }
    return batch;
}

void zero_all_weights(Mlp& net) {
    for (auto* p : net.params())
        for (double& v : p->value.data) v = 0.0;
}

void set_final_bias(Mlp& net, double v) {
    auto ps = net.params();
    ps.back()->value(0, 0) = v;  // params() = weights..., biases...; last bias is 1x1
}

std::vector<double> zeros_z() { return std::vector<double>(kLatentDim, 0.0); }

}  // namespace

TEST_CASE("gamma = 0 with zero critics: loss is the mean squared reward") {
    AgentNets nets = make_nets(SacConfig{0.2, 0.0, 0.005}, 1);
    zero_all_weights(nets.critic1);
    zero_all_weights(nets.critic2);
    auto batch = make_batch(16, 2);
    for (auto& t : batch) t.reward = 1.0;
    std::mt19937_64 rng(3);
    Tape t;
    Tape::Var z = t.input(Matrix(1, kLatentDim));
    Tape::Var loss = critic_loss(t, batch, z, nets, rng);
    CHECK(t.value(loss)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("terminal transitions ignore the bootstrap term") {
    AgentNets nets = make_nets(SacConfig{0.2, 0.99, 0.005}, 4);
    // Give the targets big constant outputs; done must mask them out.
    zero_all_weights(nets.target1);
    zero_all_weights(nets.target2);
    set_final_bias(nets.target1, 100.0);
    set_final_bias(nets.target2, 50.0);
    auto batch = make_batch(8, 5, /*done=*/true);
    std::mt19937_64 rng(6);
    Matrix y = critic_targets(batch, zeros_z(), nets, rng);
    for (int i = 0; i < y.rows; ++i)
        CHECK(y(i, 0) == batch[i].reward);  // exactly r
}

TEST_CASE("targets bootstrap from the min of the two target critics") {
    SacConfig cfg{0.2, 0.9, 0.005};
    AgentNets nets = make_nets(cfg, 7);
    zero_all_weights(nets.actor);  // mean 0, log_std 0
    zero_all_weights(nets.target1);
    zero_all_weights(nets.target2);
    set_final_bias(nets.target1, 5.0);
    set_final_bias(nets.target2, 3.0);
    auto batch = make_batch(6, 8);

    std::mt19937_64 rng(9), rng_oracle(9);
    Matrix y = critic_targets(batch, zeros_z(), nets, rng);
    for (int i = 0; i < y.rows; ++i) {
        // Replicate the next-action draw: head is N(0, 1) per dimension.
        DiagGaussianHead head{{0.0, 0.0}, {0.0, 0.0}};
        SquashedSample a = sample_gaussian_tanh(head, rng_oracle);
        const double expect =
            batch[i].reward + cfg.gamma * (std::min(5.0, 3.0) - cfg.alpha * a.log_prob);
        CHECK(y(i, 0) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("critic loss equals a scalar recomputation through plain applies") {
    AgentNets nets = make_nets(SacConfig{0.2, 0.95, 0.005}, 10);
    auto batch = make_batch(12, 11);
    std::vector<double> z{0.3, -0.8};
    std::mt19937_64 rng(12);
    Matrix y = critic_targets(batch, z, nets, rng);

    Tape t;
    Tape::Var zv = t.input(Matrix::row(z));
    Tape::Var loss = critic_loss_given_targets(t, batch, zv, nets, y);

    double acc1 = 0.0, acc2 = 0.0;
    Matrix in(1, kStateDim + kActionDim + kLatentDim);
    for (size_t i = 0; i < batch.size(); ++i) {
        int j = 0;
        for (double v : batch[i].state) in(0, j++) = v;
        for (double v : batch[i].action) in(0, j++) = v;
        for (double v : z) in(0, j++) = v;
        const double d1 = nets.critic1.apply(in)(0, 0) - y(static_cast<int>(i), 0);
        const double d2 = nets.critic2.apply(in)(0, 0) - y(static_cast<int>(i), 0);
        acc1 += d1 * d1;
        acc2 += d2 * d2;
    }
    const double expect = 0.5 * (acc1 + acc2) / static_cast<double>(batch.size());
    CHECK(t.value(loss)(0, 0) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("critic gradients match finite differences with frozen targets") {
    AgentNets nets = make_nets(SacConfig{0.2, 0.95, 0.005}, 13, {6, 6});
    auto batch = make_batch(8, 14);
    std::vector<double> z{0.2, -0.4};
    std::mt19937_64 rng(15);
    const Matrix y = critic_targets(batch, z, nets, rng);

    auto build = [&](Tape& t) {
        return critic_loss_given_targets(t, batch, t.input(Matrix::row(z)), nets, y);
    };
    std::vector<ParamTensor*> ps;
    for (auto* p : nets.critic1.params()) ps.push_back(p);
    for (auto* p : nets.critic2.params()) ps.push_back(p);
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

TEST_CASE("critic backward touches neither actor nor target parameters") {
    AgentNets nets = make_nets(SacConfig{}, 16);
    auto batch = make_batch(8, 17);
    std::mt19937_64 rng(18);
    for (auto* p : nets.trainable()) p->zero_grad();
    Tape t;
    Tape::Var z = t.input(Matrix::row({0.1, 0.2}));
    t.backward(critic_loss(t, batch, z, nets, rng));
    for (auto* p : nets.actor.params())
        for (double g : p->grad.data) CHECK(g == 0.0);
    for (auto* p : nets.target1.params())
        for (double g : p->grad.data) CHECK(g == 0.0);
    double critic_total = 0.0;
    for (auto* p : nets.critic1.params())
        for (double g : p->grad.data) critic_total += std::abs(g);
    CHECK(critic_total > 0.0);
}

TEST_CASE("actor gradients match finite differences; critics stay frozen") {
    AgentNets nets = make_nets(SacConfig{0.2, 0.99, 0.005}, 19, {6, 6});
    auto batch = make_batch(8, 20);
    std::vector<double> z{0.5, -0.1};

    auto build = [&](Tape& t) {
        std::mt19937_64 rng(21);  // same noise on every call
        return actor_loss(t, batch, z, nets, rng);
    };
    auto ps = nets.actor.params();
    for (auto* p : nets.trainable()) p->zero_grad();
    {
        Tape t;
        t.backward(build(t));
    }
    // Critic params are constants inside the actor loss.
    for (auto* p : nets.critic1.params())
        for (double g : p->grad.data) CHECK(g == 0.0);
    for (auto* p : nets.critic2.params())
        for (double g : p->grad.data) CHECK(g == 0.0);

    auto loss_value = [&]() {
        Tape t;
        return t.value(build(t))(0, 0);
    };
    CHECK(max_rel_err_fd(ps, grads_of(ps), loss_value) < 1e-4);
}

TEST_CASE("encoder-through-critic gradients match finite differences") {
    // The PEARL routing: z is reparameterized from the posterior, so the
    // critic loss + KL differentiates through the encoder network.
    std::mt19937_64 init(22);
    ContextEncoder enc(kStateDim, kActionDim, kLatentDim, {6}, init);
    AgentNets nets = make_nets(SacConfig{0.2, 0.9, 0.005}, 23, {6});
    auto batch = make_batch(6, 24);
    auto ctx = make_batch(10, 25);

    // Freeze y at the unperturbed encoder's z so the loss is a closed
    // function of the encoder parameters.
    Matrix y;
    {
        Tape t;
        auto post = enc.encode_vars(t, ctx);
        std::mt19937_64 zr(26);
        Tape::Var z = ContextEncoder::sample_z_var(t, post, zr);
        std::mt19937_64 tr(27);
        y = critic_targets(batch, t.value(z).data, nets, tr);
    }
    auto build = [&](Tape& t) {
        auto post = enc.encode_vars(t, ctx);
        std::mt19937_64 zr(26);
        Tape::Var z = ContextEncoder::sample_z_var(t, post, zr);
        Tape::Var closs = critic_loss_given_targets(t, batch, z, nets, y);
        return t.add(closs, t.scale(ContextEncoder::kl_loss_var(t, post), 0.1));
    };
    auto ps = enc.net().params();
    zero_grads(ps);
    for (auto* p : nets.trainable()) p->zero_grad();
    {
        Tape t;
        t.backward(build(t));
    }
    double enc_total = 0.0;
    for (auto* p : ps)
        for (double g : p->grad.data) enc_total += std::abs(g);
    CHECK(enc_total > 0.0);
    auto loss_value = [&]() {
        Tape t;
        return t.value(build(t))(0, 0);
    };
    CHECK(max_rel_err_fd(ps, grads_of(ps), loss_value) < 1e-4);
}

TEST_CASE("actor loss with detached z leaves the encoder untouched") {
    std::mt19937_64 init(28);
    ContextEncoder enc(kStateDim, kActionDim, kLatentDim, {6}, init);
    AgentNets nets = make_nets(SacConfig{}, 29);
    auto batch = make_batch(6, 30);
    auto eps = enc.net().params();
    zero_grads(eps);
    std::mt19937_64 rng(31);
    Tape t;
    t.backward(actor_loss(t, batch, zeros_z(), nets, rng));
    for (auto* p : eps)
        for (double g : p->grad.data) CHECK(g == 0.0);
    double actor_total = 0.0;
    for (auto* p : nets.actor.params())
        for (double g : p->grad.data) actor_total += std::abs(g);
    CHECK(actor_total > 0.0);
}

TEST_CASE("soft update: tau = 1 copies, tau = 0 freezes, otherwise geometric") {
    auto gap = [](AgentNets& n) {
        double d = 0.0;
        auto tp = n.target1.params();
        auto cp = n.critic1.params();
        for (size_t i = 0; i < tp.size(); ++i)
            for (size_t j = 0; j < tp[i]->value.size(); ++j)
                d += std::abs(tp[i]->value.data[j] - cp[i]->value.data[j]);
        return d;
    };
    auto perturb = [](AgentNets& n) {
        for (auto* p : n.target1.params())
            for (double& v : p->value.data) v += 1.0;
        for (auto* p : n.target2.params())
            for (double& v : p->value.data) v += 1.0;
    };

    AgentNets copy = make_nets(SacConfig{0.2, 0.99, 1.0}, 32);
    perturb(copy);
    soft_update(copy);
    CHECK(gap(copy) == doctest::Approx(0.0).epsilon(1e-12));

    AgentNets frozen = make_nets(SacConfig{0.2, 0.99, 0.0}, 33);
    perturb(frozen);
    const double before = gap(frozen);
    soft_update(frozen);
    CHECK(gap(frozen) == doctest::Approx(before).epsilon(1e-12));

    AgentNets geo = make_nets(SacConfig{0.2, 0.99, 0.005}, 34);
    perturb(geo);
    double prev = gap(geo);
    for (int i = 0; i < 5; ++i) {
        soft_update(geo);
        const double cur = gap(geo);
        CHECK(cur == doctest::Approx(prev * 0.995).epsilon(1e-9));
        prev = cur;
    }
}

TEST_CASE("alpha must be positive") {
    std::mt19937_64 rng(35);
    CHECK_THROWS_AS(
        AgentNets(kStateDim, kActionDim, kLatentDim, {4}, SacConfig{0.0, 0.99, 0.005}, rng),
        std::invalid_argument);
}

TEST_CASE("empty batches are rejected") {
    AgentNets nets = make_nets(SacConfig{}, 36);
    std::mt19937_64 rng(37);
    Tape t;
    Tape::Var z = t.input(Matrix(1, kLatentDim));
    CHECK_THROWS_AS(critic_loss(t, {}, z, nets, rng), std::invalid_argument);
    CHECK_THROWS_AS(actor_loss(t, {}, zeros_z(), nets, rng), std::invalid_argument);
}

TEST_CASE("critics learn a constant-reward bandit") {
    // gamma = 0 so the fixed point is Q = r = 1 everywhere on the data.
    AgentNets nets = make_nets(SacConfig{0.2, 0.0, 0.005}, 38, {16});
    auto batch = make_batch(32, 39);
    for (auto& t : batch) t.reward = 1.0;
    std::mt19937_64 rng(40);
    const AdamConfig adam{3e-3};
    double loss = 0.0;
    for (int i = 0; i < 2000; ++i) {
        for (auto* p : nets.trainable()) p->zero_grad();
        Tape t;
        Tape::Var z = t.input(Matrix(1, kLatentDim));
        Tape::Var l = critic_loss(t, batch, z, nets, rng);
        t.backward(l);
        loss = t.value(l)(0, 0);
        auto c1 = nets.critic1.params();
        auto c2 = nets.critic2.params();
        adam_step(c1, adam);
        adam_step(c2, adam);
    }
    CHECK(loss < 1e-4);
}
