#pragma once

#include <numeric>
#include <random>
#include <string>

#include "htr/tape.hpp"

namespace htr {

enum class Activation { relu, tanh };

struct MlpSpec {
    int input_dim = 0;
    int output_dim = 0;
    std::vector<int> hidden;
    Activation activation = Activation::relu;

    std::vector<int> widths() const {
        std::vector<int> w;
        w.push_back(input_dim);
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(output_dim);
        return w;
    }
};

// Fully-connected net. Weights are (in x out) so a batch is rows of inputs.
class Mlp {
  public:
    Mlp() = default;
    Mlp(MlpSpec spec, const std::string& name_prefix, std::mt19937_64& rng)
        : spec_(std::move(spec)) {
        for (int w : spec_.hidden)
            if (w < 1) throw std::invalid_argument("Mlp: hidden width must be >= 1");
        if (spec_.input_dim < 1 || spec_.output_dim < 1)
            throw std::invalid_argument("Mlp: input/output dims must be >= 1");
        const auto w = spec_.widths();
        for (size_t l = 0; l + 1 < w.size(); ++l) {
            // Uniform fan-in init, zero biases.
            const double bound = 1.0 / std::sqrt(static_cast<double>(w[l]));
            std::uniform_real_distribution<double> dist(-bound, bound);
            Matrix wm(w[l], w[l + 1]);
            for (double& v : wm.data) v = dist(rng);
            weights_.emplace_back(name_prefix + ".w" + std::to_string(l), std::move(wm));
            biases_.emplace_back(name_prefix + ".b" + std::to_string(l),
                                 Matrix(1, w[l + 1]));
        }
    }

    const MlpSpec& spec() const { return spec_; }

    // Tape forward with trainable parameters.
    Tape::Var forward(Tape& t, Tape::Var x) {
        for (size_t l = 0; l < weights_.size(); ++l) {
            x = t.add_rowvec(t.matmul(x, t.param(&weights_[l])), t.param(&biases_[l]));
            if (l + 1 < weights_.size()) x = activate(t, x);
        }
        return x;
    }

    // Tape forward with parameters as constants: gradients flow through the
    // input only (critics inside the actor loss, actor inside the target).
    Tape::Var forward_const_params(Tape& t, Tape::Var x) const {
        for (size_t l = 0; l < weights_.size(); ++l) {
            x = t.add_rowvec(t.matmul(x, t.input(weights_[l].value)),
                             t.input(biases_[l].value));
            if (l + 1 < weights_.size()) x = activate(t, x);
        }
        return x;
    }

    // Plain inference for rollouts; must agree with the tape path exactly.
    Matrix apply(const Matrix& x) const {
        if (x.cols != spec_.input_dim)
            throw std::invalid_argument("Mlp::apply: input dim mismatch");
        Matrix h = x;
        for (size_t l = 0; l < weights_.size(); ++l) {
            Matrix z = htr::matmul(h, weights_[l].value);
            for (int i = 0; i < z.rows; ++i)
                for (int j = 0; j < z.cols; ++j) z(i, j) += biases_[l].value(0, j);
            if (l + 1 < weights_.size()) {
                for (double& v : z.data)
                    v = spec_.activation == Activation::relu ? (v > 0.0 ? v : 0.0)
                                                             : std::tanh(v);
            }
            h = std::move(z);
        }
        return h;
    }

    std::vector<ParamTensor*> params() {
        std::vector<ParamTensor*> out;
        for (auto& w : weights_) out.push_back(&w);
        for (auto& b : biases_) out.push_back(&b);
        return out;
    }
    std::vector<const ParamTensor*> params() const {
        std::vector<const ParamTensor*> out;
        for (auto& w : weights_) out.push_back(&w);
        for (auto& b : biases_) out.push_back(&b);
        return out;
    }

    size_t param_count() const {
        size_t n = 0;
        for (const auto& w : weights_) n += w.value.size();
        for (const auto& b : biases_) n += b.value.size();
        return n;
    }

  private:
    Tape::Var activate(Tape& t, Tape::Var x) const {
        return spec_.activation == Activation::relu ? t.relu(x) : t.tanh(x);
    }

    MlpSpec spec_;
    std::vector<ParamTensor> weights_;
    std::vector<ParamTensor> biases_;
};

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;
constexpr double kTanhEps = 1e-6;

// Diagonal Gaussian over actions, pre-squash.
struct DiagGaussianHead {
    std::vector<double> mean;
    std::vector<double> log_std;  // clamped to [kLogStdMin, kLogStdMax]
};

struct SquashedSample {
    std::vector<double> action;  // in (-1, 1)^d
    double log_prob = 0.0;
};

// a = tanh(mean + std * xi), xi ~ N(0, I); log_prob carries the
// change-of-variables correction -sum log(1 - a^2 + eps).
inline SquashedSample sample_gaussian_tanh(const DiagGaussianHead& head,
                                           std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    SquashedSample out;
    const size_t d = head.mean.size();
    out.action.resize(d);
    static const double kLogSqrt2Pi = 0.5 * std::log(2.0 * M_PI);
    for (size_t i = 0; i < d; ++i) {
        const double ls =
            std::clamp(head.log_std[i], kLogStdMin, kLogStdMax);
        const double std_i = std::exp(ls);
        const double xi = normal(rng);
        const double pre = head.mean[i] + std_i * xi;
        const double a = std::tanh(pre);
        out.action[i] = a;
        out.log_prob += -kLogSqrt2Pi - ls - 0.5 * xi * xi;
        out.log_prob -= std::log(1.0 - a * a + kTanhEps);
    }
    return out;
}

// Tape variant used inside the actor/critic losses. `raw` is a batch of
// actor outputs laid out as [mean | log_std] per row; noise must be a
// pre-drawn N(0,1) matrix of the mean's shape (reparameterization).
struct SquashedSampleVars {
    Tape::Var action;    // N x d
    Tape::Var log_prob;  // N x 1
};

inline SquashedSampleVars squash_sample_vars(Tape& t, Tape::Var raw, Matrix noise) {
    const int d = t.value(raw).cols / 2;
    const int n = t.value(raw).rows;
    if (noise.rows != n || noise.cols != d)
        throw std::invalid_argument("squash_sample_vars: noise shape mismatch");

    // Split [mean | log_std] into N x d halves via constant selection matrices.
    Matrix sel_mean(2 * d, d), sel_ls(2 * d, d);
    for (int j = 0; j < d; ++j) {
        sel_mean(j, j) = 1.0;
        sel_ls(d + j, j) = 1.0;
    }
    Tape::Var mean = t.matmul(raw, t.input(sel_mean));
    Tape::Var log_std = t.clamp(t.matmul(raw, t.input(sel_ls)), kLogStdMin, kLogStdMax);

    Tape::Var std_v = t.exp(log_std);
    Tape::Var pre = t.add(mean, t.mul_const(std_v, noise));
    Tape::Var action = t.tanh(pre);

    static const double kLogSqrt2Pi = 0.5 * std::log(2.0 * M_PI);
    // Gaussian density at pre: -0.5*xi^2 - log_std - 0.5*log(2pi), xi constant.
    Matrix half_sq(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            half_sq(i, j) = -0.5 * noise(i, j) * noise(i, j) - kLogSqrt2Pi;
    Tape::Var gauss = t.add(t.scale(log_std, -1.0), t.input(half_sq));
    // tanh correction: -log(1 - a^2 + eps)
    Tape::Var corr =
        t.scale(t.log(t.add_scalar(t.scale(t.square(action), -1.0), 1.0 + kTanhEps)), -1.0);
    Tape::Var log_prob = t.row_sum(t.add(gauss, corr));
    return {action, log_prob};
}

}  // namespace htr
