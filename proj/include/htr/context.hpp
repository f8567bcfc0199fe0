#pragma once

#include "htr/buffer.hpp"
#include "htr/mlp.hpp"

namespace htr {

// Diagonal-Gaussian belief over the latent task variable.
struct LatentPosterior {
    std::vector<double> mean;
    std::vector<double> var;

    static LatentPosterior prior(int latent_dim) {
        return {std::vector<double>(latent_dim, 0.0), std::vector<double>(latent_dim, 1.0)};
    }
};

inline std::vector<double> sample_z(const LatentPosterior& p, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z(p.mean.size());
    for (size_t i = 0; i < z.size(); ++i)
        z[i] = p.mean[i] + std::sqrt(p.var[i]) * normal(rng);
    return z;
}

// KL( N(mean, var) || N(0, I) ), closed form.
inline double kl_to_prior(const LatentPosterior& p) {
    double kl = 0.0;
    for (size_t i = 0; i < p.mean.size(); ++i)
        kl += 0.5 * (p.var[i] + p.mean[i] * p.mean[i] - 1.0 - std::log(p.var[i]));
    return kl;
}

// Permutation-invariant context encoder q(z|c): each transition maps to a
// Gaussian factor, the posterior is the normalized product of factors.
class ContextEncoder {
  public:
    ContextEncoder() = default;
    ContextEncoder(int state_dim, int action_dim, int latent_dim,
                   std::vector<int> hidden, std::mt19937_64& rng)
        : latent_dim_(latent_dim),
          input_dim_(2 * state_dim + action_dim + 1),
          net_(MlpSpec{2 * state_dim + action_dim + 1, 2 * latent_dim,
                       std::move(hidden), Activation::relu},
               "encoder", rng) {}

    int latent_dim() const { return latent_dim_; }
    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

    // One row per transition: (s, a, r, s').
    Matrix context_matrix(const std::vector<Transition>& ctx) const {
        if (ctx.empty()) throw std::invalid_argument("encode: empty context");
        Matrix m(static_cast<int>(ctx.size()), input_dim_);
        for (size_t i = 0; i < ctx.size(); ++i) {
            int j = 0;
            for (double v : ctx[i].state) m(static_cast<int>(i), j++) = v;
            for (double v : ctx[i].action) m(static_cast<int>(i), j++) = v;
            m(static_cast<int>(i), j++) = ctx[i].reward;
            for (double v : ctx[i].next_state) m(static_cast<int>(i), j++) = v;
            if (j != input_dim_) throw std::invalid_argument("encode: transition dim mismatch");
        }
        return m;
    }

    LatentPosterior encode(const std::vector<Transition>& ctx) const {
        Matrix raw = net_.apply(context_matrix(ctx));
        LatentPosterior post;
        post.mean.assign(latent_dim_, 0.0);
        post.var.assign(latent_dim_, 0.0);
        std::vector<double> precision(latent_dim_, 0.0);
        std::vector<double> weighted_mean(latent_dim_, 0.0);
        for (int i = 0; i < raw.rows; ++i) {
            for (int k = 0; k < latent_dim_; ++k) {
                const double mu = raw(i, k);
                const double var = softplus(raw(i, latent_dim_ + k));
                precision[k] += 1.0 / var;
                weighted_mean[k] += mu / var;
            }
        }
        for (int k = 0; k < latent_dim_; ++k) {
            post.var[k] = 1.0 / precision[k];
            post.mean[k] = post.var[k] * weighted_mean[k];
        }
        return post;
    }

    struct PosteriorVars {
        Tape::Var mean;  // 1 x latent
        Tape::Var var;   // 1 x latent
    };

    // Tape version; gradients reach the encoder parameters.
    PosteriorVars encode_vars(Tape& t, const std::vector<Transition>& ctx) {
        const int m = static_cast<int>(ctx.size());
        Tape::Var raw = net_.forward(t, t.input(context_matrix(ctx)));
        Matrix sel_mu(2 * latent_dim_, latent_dim_), sel_var(2 * latent_dim_, latent_dim_);
        for (int k = 0; k < latent_dim_; ++k) {
            sel_mu(k, k) = 1.0;
            sel_var(latent_dim_ + k, k) = 1.0;
        }
        Tape::Var mu = t.matmul(raw, t.input(sel_mu));                     // m x d
        Tape::Var var = t.softplus(t.matmul(raw, t.input(sel_var)));      // m x d
        Tape::Var prec = t.reciprocal(var);                                // m x d
        Tape::Var post_var = t.reciprocal(t.col_sum(prec));                // 1 x d
        Tape::Var post_mean = t.mul(post_var, t.col_sum(t.mul(mu, prec))); // 1 x d
        (void)m;
        return {post_mean, post_var};
    }

    // 0.5 * sum(var + mean^2 - 1 - log var)
    static Tape::Var kl_loss_var(Tape& t, const PosteriorVars& p) {
        Tape::Var terms = t.add(p.var, t.square(p.mean));
        terms = t.sub(terms, t.log(p.var));
        terms = t.add_scalar(terms, -1.0);
        return t.scale(t.sum(terms), 0.5);
    }

    // Reparameterized z = mean + sqrt(var) * xi; gradients flow into the
    // posterior (and from there into the encoder).
    static Tape::Var sample_z_var(Tape& t, const PosteriorVars& p, std::mt19937_64& rng) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Matrix xi(1, t.value(p.mean).cols);
        for (double& v : xi.data) v = normal(rng);
        return t.add(p.mean, t.mul_const(t.sqrt(p.var), std::move(xi)));
    }

    static double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

  private:
    int latent_dim_ = 0;
    int input_dim_ = 0;
    Mlp net_;
};

}  // namespace htr
