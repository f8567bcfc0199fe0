#pragma once

#include "htr/context.hpp"

namespace htr {

struct SacConfig {
    double alpha = 0.2;  // fixed entropy coefficient
    double gamma = 0.99;
    double tau = 0.005;
};

// Actor, twin critics and their lagged targets, all conditioned on z.
struct AgentNets {
    Mlp actor;    // (s, z) -> [mean | log_std]
    Mlp critic1;  // (s, a, z) -> Q
    Mlp critic2;
    Mlp target1;
    Mlp target2;
    SacConfig cfg;
    int state_dim = 0;
    int action_dim = 0;
    int latent_dim = 0;

    AgentNets() = default;
    AgentNets(int state_dim_, int action_dim_, int latent_dim_,
              std::vector<int> hidden, SacConfig cfg_, std::mt19937_64& rng)
        : cfg(cfg_), state_dim(state_dim_), action_dim(action_dim_), latent_dim(latent_dim_) {
        if (cfg.alpha <= 0.0) throw std::invalid_argument("AgentNets: alpha must be > 0");
        MlpSpec actor_spec{state_dim + latent_dim, 2 * action_dim, hidden, Activation::relu};
        MlpSpec critic_spec{state_dim + action_dim + latent_dim, 1, hidden, Activation::relu};
        actor = Mlp(actor_spec, "actor", rng);
        critic1 = Mlp(critic_spec, "critic1", rng);
        critic2 = Mlp(critic_spec, "critic2", rng);
        target1 = critic1;  // targets start equal to critics
        target2 = critic2;
    }

    std::vector<ParamTensor*> trainable() {
        std::vector<ParamTensor*> out;
        for (auto* p : actor.params()) out.push_back(p);
        for (auto* p : critic1.params()) out.push_back(p);
        for (auto* p : critic2.params()) out.push_back(p);
        return out;
    }

    DiagGaussianHead policy_head(std::span<const double> state,
                                 std::span<const double> z) const {
        Matrix in(1, state_dim + latent_dim);
        for (int i = 0; i < state_dim; ++i) in(0, i) = state[i];
        for (int i = 0; i < latent_dim; ++i) in(0, state_dim + i) = z[i];
        Matrix raw = actor.apply(in);
        DiagGaussianHead head;
        head.mean.assign(raw.data.begin(), raw.data.begin() + action_dim);
        head.log_std.assign(raw.data.begin() + action_dim, raw.data.end());
        return head;
    }
};

namespace detail {

inline Matrix states_matrix(const std::vector<Transition>& batch, bool next) {
    const int sd = static_cast<int>(batch[0].state.size());
    Matrix m(static_cast<int>(batch.size()), sd);
    for (size_t i = 0; i < batch.size(); ++i) {
        const auto& s = next ? batch[i].next_state : batch[i].state;
        for (int j = 0; j < sd; ++j) m(static_cast<int>(i), j) = s[j];
    }
    return m;
}

inline Matrix actions_matrix(const std::vector<Transition>& batch) {
    const int ad = static_cast<int>(batch[0].action.size());
    Matrix m(static_cast<int>(batch.size()), ad);
    for (size_t i = 0; i < batch.size(); ++i)
        for (int j = 0; j < ad; ++j) m(static_cast<int>(i), j) = batch[i].action[j];
    return m;
}

}  // namespace detail

// Bellman targets y = r + gamma * (1-done) * (min target Q - alpha*logpi'),
// computed off-tape so they are constants in the loss.
inline Matrix critic_targets(const std::vector<Transition>& batch,
                             std::span<const double> z, AgentNets& nets,
                             std::mt19937_64& rng) {
    const int n = static_cast<int>(batch.size());
    Matrix y(n, 1);
    Matrix cin(1, nets.state_dim + nets.action_dim + nets.latent_dim);
    for (int i = 0; i < n; ++i) {
        const Transition& tr = batch[i];
        double target = tr.reward;
        if (!tr.done) {
            DiagGaussianHead head = nets.policy_head(tr.next_state, z);
            SquashedSample next_a = sample_gaussian_tanh(head, rng);
            int j = 0;
            for (double v : tr.next_state) cin(0, j++) = v;
            for (double v : next_a.action) cin(0, j++) = v;
            for (double v : z) cin(0, j++) = v;
            const double q1 = nets.target1.apply(cin)(0, 0);
            const double q2 = nets.target2.apply(cin)(0, 0);
            target += nets.cfg.gamma *
                      (std::min(q1, q2) - nets.cfg.alpha * next_a.log_prob);
        }
        y(i, 0) = target;
    }
    return y;
}

// Mean over batch and both critic heads of (Q_k(s,a,z) - y)^2 for fixed
// targets y. z is a live tape variable so encoder gradients flow through
// the critic inputs.
inline Tape::Var critic_loss_given_targets(Tape& t, const std::vector<Transition>& batch,
                                           Tape::Var z, AgentNets& nets,
                                           const Matrix& y_fixed) {
    if (batch.empty()) throw std::invalid_argument("critic_loss: empty batch");
    const int n = static_cast<int>(batch.size());
    Tape::Var y = t.input(y_fixed);
    Tape::Var sa = t.hconcat(t.input(detail::states_matrix(batch, false)),
                             t.input(detail::actions_matrix(batch)));
    Tape::Var in = t.hconcat(sa, t.repeat_rows(z, n));
    Tape::Var l1 = t.mean(t.square(t.sub(nets.critic1.forward(t, in), y)));
    Tape::Var l2 = t.mean(t.square(t.sub(nets.critic2.forward(t, in), y)));
    return t.scale(t.add(l1, l2), 0.5);
}

inline Tape::Var critic_loss(Tape& t, const std::vector<Transition>& batch,
                             Tape::Var z, AgentNets& nets, std::mt19937_64& rng) {
    if (batch.empty()) throw std::invalid_argument("critic_loss: empty batch");
    return critic_loss_given_targets(t, batch, z, nets,
                                     critic_targets(batch, t.value(z).data, nets, rng));
}

// Mean of alpha*logpi(a|s,z) - min Q(s,a,z), a reparameterized. Critic
// parameters enter as constants; z is a detached value.
inline Tape::Var actor_loss(Tape& t, const std::vector<Transition>& batch,
                            std::span<const double> z, AgentNets& nets,
                            std::mt19937_64& rng) {
    if (batch.empty()) throw std::invalid_argument("actor_loss: empty batch");
    const int n = static_cast<int>(batch.size());
    Matrix zrep(n, nets.latent_dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < nets.latent_dim; ++j) zrep(i, j) = z[j];
    Tape::Var zc = t.input(zrep);

    Tape::Var ain = t.hconcat(t.input(detail::states_matrix(batch, false)), zc);
    Tape::Var raw = nets.actor.forward(t, ain);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix noise(n, nets.action_dim);
    for (double& v : noise.data) v = normal(rng);
    SquashedSampleVars sample = squash_sample_vars(t, raw, std::move(noise));

    Tape::Var cin = t.hconcat(
        t.hconcat(t.input(detail::states_matrix(batch, false)), sample.action), zc);
    Tape::Var qmin = t.minimum(nets.critic1.forward_const_params(t, cin),
                               nets.critic2.forward_const_params(t, cin));
    return t.mean(t.sub(t.scale(sample.log_prob, nets.cfg.alpha), qmin));
}

// target <- (1 - tau) * target + tau * critic, elementwise.
inline void soft_update(AgentNets& nets) {
    const double tau = nets.cfg.tau;
    auto blend = [tau](Mlp& target, Mlp& critic) {
        auto tp = target.params();
        auto cp = critic.params();
        for (size_t i = 0; i < tp.size(); ++i)
            for (size_t j = 0; j < tp[i]->value.size(); ++j)
                tp[i]->value.data[j] =
                    (1.0 - tau) * tp[i]->value.data[j] + tau * cp[i]->value.data[j];
    };
    blend(nets.target1, nets.critic1);
    blend(nets.target2, nets.critic2);
}

}  // namespace htr
