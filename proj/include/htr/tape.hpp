#pragma once

#include <functional>
#include <string>

#include "htr/matrix.hpp"

namespace htr {

// Named trainable tensor with an accumulated-gradient slot and Adam state.
struct ParamTensor {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix adam_m;
    Matrix adam_v;
    long adam_step = 0;

    ParamTensor() = default;
    ParamTensor(std::string n, Matrix v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(value.rows, value.cols),
          adam_m(value.rows, value.cols),
          adam_v(value.rows, value.cols) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One bias-corrected Adam update over the accumulated grads; zeroes grads after.
inline void adam_step(const std::vector<ParamTensor*>& params, const AdamConfig& cfg) {
    for (ParamTensor* p : params) {
        if (!p->grad.all_finite())
            throw std::runtime_error("adam_step: non-finite gradient in " + p->name);
        p->adam_step += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->adam_step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->adam_step));
        for (size_t i = 0; i < p->value.size(); ++i) {
            const double g = p->grad.data[i];
            double& m = p->adam_m.data[i];
            double& v = p->adam_v.data[i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            p->value.data[i] -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
        }
        if (!p->value.all_finite())
            throw std::runtime_error("adam_step: non-finite value in " + p->name);
        p->zero_grad();
    }
}

// Reverse-mode tape over dense matrix ops. Build a scalar loss through the
// op methods, then call backward(); leaf params receive accumulated grads.
// Node ids are indices into the tape, valid until reset().
class Tape {
  public:
    using Var = int;

    Var input(Matrix m) { return push(std::move(m), nullptr, {}); }

    Var param(ParamTensor* p) {
        Var id = push(p->value, nullptr, {});
        nodes_[id].param = p;
        return id;
    }

    const Matrix& value(Var id) const { return nodes_[id].value; }
    const Matrix& grad(Var id) const { return nodes_[id].grad; }

    Var matmul(Var a, Var b) {
        Var id = push(htr::matmul(val(a), val(b)), nullptr, {a, b});
        nodes_[id].back = [this, id, a, b] {
            matmul_a_bt_acc(nodes_[id].grad, val(b), nodes_[a].grad);
            matmul_at_b_acc(val(a), nodes_[id].grad, nodes_[b].grad);
        };
        return id;
    }

    Var add(Var a, Var b) {
        check_same(a, b, "add");
        Matrix out = val(a);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] += val(b).data[i];
        Var id = push(std::move(out), nullptr, {a, b});
        nodes_[id].back = [this, id, a, b] {
            acc(a, nodes_[id].grad);
            acc(b, nodes_[id].grad);
        };
        return id;
    }

    Var sub(Var a, Var b) {
        check_same(a, b, "sub");
        Matrix out = val(a);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] -= val(b).data[i];
        Var id = push(std::move(out), nullptr, {a, b});
        nodes_[id].back = [this, id, a, b] {
            acc(a, nodes_[id].grad);
            for (size_t i = 0; i < nodes_[b].grad.size(); ++i)
                nodes_[b].grad.data[i] -= nodes_[id].grad.data[i];
        };
        return id;
    }

    Var mul(Var a, Var b) {
        check_same(a, b, "mul");
        Matrix out = val(a);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] *= val(b).data[i];
        Var id = push(std::move(out), nullptr, {a, b});
        nodes_[id].back = [this, id, a, b] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i) {
                nodes_[a].grad.data[i] += nodes_[id].grad.data[i] * val(b).data[i];
                nodes_[b].grad.data[i] += nodes_[id].grad.data[i] * val(a).data[i];
            }
        };
        return id;
    }

    // Broadcast a 1xC bias over every row of a.
    Var add_rowvec(Var a, Var bias) {
        if (val(bias).rows != 1 || val(bias).cols != val(a).cols)
            throw std::invalid_argument("add_rowvec: bias must be 1 x cols(a)");
        Matrix out = val(a);
        for (int i = 0; i < out.rows; ++i)
            for (int j = 0; j < out.cols; ++j) out(i, j) += val(bias)(0, j);
        Var id = push(std::move(out), nullptr, {a, bias});
        nodes_[id].back = [this, id, a, bias] {
            acc(a, nodes_[id].grad);
            for (int i = 0; i < nodes_[id].grad.rows; ++i)
                for (int j = 0; j < nodes_[id].grad.cols; ++j)
                    nodes_[bias].grad(0, j) += nodes_[id].grad(i, j);
        };
        return id;
    }

    Var scale(Var a, double c) {
        Matrix out = val(a);
        for (double& v : out.data) v *= c;
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a, c] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i)
                nodes_[a].grad.data[i] += c * nodes_[id].grad.data[i];
        };
        return id;
    }

    Var add_scalar(Var a, double c) {
        Matrix out = val(a);
        for (double& v : out.data) v += c;
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] { acc(a, nodes_[id].grad); };
        return id;
    }

    // Elementwise product with a constant matrix (masks, noise, (1-done), ...).
    Var mul_const(Var a, Matrix m) {
        if (!val(a).same_shape(m)) throw std::invalid_argument("mul_const: shape mismatch");
        Matrix out = val(a);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] *= m.data[i];
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].aux = std::move(m);
        nodes_[id].back = [this, id, a] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i)
                nodes_[a].grad.data[i] += nodes_[id].grad.data[i] * nodes_[id].aux.data[i];
        };
        return id;
    }

    Var relu(Var a) {
        Matrix out = val(a);
        for (double& v : out.data) v = v > 0.0 ? v : 0.0;
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i)
                if (val(a).data[i] > 0.0) nodes_[a].grad.data[i] += nodes_[id].grad.data[i];
        };
        return id;
    }

    Var tanh(Var a) {
        Matrix out = val(a);
        for (double& v : out.data) v = std::tanh(v);
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i) {
                const double t = nodes_[id].value.data[i];
                nodes_[a].grad.data[i] += nodes_[id].grad.data[i] * (1.0 - t * t);
            }
        };
        return id;
    }

    Var exp(Var a) {
        Matrix out = val(a);
        for (double& v : out.data) v = std::exp(v);
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i)
                nodes_[a].grad.data[i] += nodes_[id].grad.data[i] * nodes_[id].value.data[i];
        };
        return id;
    }

    Var log(Var a) {
        Matrix out = val(a);
        for (double& v : out.data) v = std::log(v);
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i)
                nodes_[a].grad.data[i] += nodes_[id].grad.data[i] / val(a).data[i];
        };
        return id;
    }

    Var sqrt(Var a) {
        Matrix out = val(a);
        for (double& v : out.data) v = std::sqrt(v);
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i)
                nodes_[a].grad.data[i] +=
                    nodes_[id].grad.data[i] * 0.5 / nodes_[id].value.data[i];
        };
        return id;
    }

    Var square(Var a) { return mul(a, a); }

    // log(1 + exp(x)), numerically stable; grad is the sigmoid.
    Var softplus(Var a) {
        Matrix out = val(a);
        for (double& v : out.data) v = v > 30.0 ? v : std::log1p(std::exp(v));
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i) {
                const double s = 1.0 / (1.0 + std::exp(-val(a).data[i]));
                nodes_[a].grad.data[i] += nodes_[id].grad.data[i] * s;
            }
        };
        return id;
    }

    Var reciprocal(Var a) {
        Matrix out = val(a);
        for (double& v : out.data) v = 1.0 / v;
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i) {
                const double r = nodes_[id].value.data[i];
                nodes_[a].grad.data[i] -= nodes_[id].grad.data[i] * r * r;
            }
        };
        return id;
    }

    // Hard clamp; grad passes through only inside (lo, hi).
    Var clamp(Var a, double lo, double hi) {
        Matrix out = val(a);
        for (double& v : out.data) v = v < lo ? lo : (v > hi ? hi : v);
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a, lo, hi] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i) {
                const double v = val(a).data[i];
                if (v > lo && v < hi) nodes_[a].grad.data[i] += nodes_[id].grad.data[i];
            }
        };
        return id;
    }

    // Elementwise min; ties route the grad to a.
    Var minimum(Var a, Var b) {
        check_same(a, b, "minimum");
        Matrix out = val(a);
        for (size_t i = 0; i < out.size(); ++i)
            out.data[i] = std::min(out.data[i], val(b).data[i]);
        Var id = push(std::move(out), nullptr, {a, b});
        nodes_[id].back = [this, id, a, b] {
            for (size_t i = 0; i < nodes_[id].grad.size(); ++i) {
                if (val(a).data[i] <= val(b).data[i])
                    nodes_[a].grad.data[i] += nodes_[id].grad.data[i];
                else
                    nodes_[b].grad.data[i] += nodes_[id].grad.data[i];
            }
        };
        return id;
    }

    // N x C -> N x 1
    Var row_sum(Var a) {
        Matrix out(val(a).rows, 1);
        for (int i = 0; i < val(a).rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < val(a).cols; ++j) s += val(a)(i, j);
            out(i, 0) = s;
        }
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] {
            for (int i = 0; i < nodes_[a].grad.rows; ++i)
                for (int j = 0; j < nodes_[a].grad.cols; ++j)
                    nodes_[a].grad(i, j) += nodes_[id].grad(i, 0);
        };
        return id;
    }

    // N x C -> 1 x C
    Var col_sum(Var a) {
        Matrix out(1, val(a).cols);
        for (int i = 0; i < val(a).rows; ++i)
            for (int j = 0; j < val(a).cols; ++j) out(0, j) += val(a)(i, j);
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] {
            for (int i = 0; i < nodes_[a].grad.rows; ++i)
                for (int j = 0; j < nodes_[a].grad.cols; ++j)
                    nodes_[a].grad(i, j) += nodes_[id].grad(0, j);
        };
        return id;
    }

    Var sum(Var a) {
        Matrix out(1, 1);
        for (double v : val(a).data) out(0, 0) += v;
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] {
            for (double& g : nodes_[a].grad.data) g += nodes_[id].grad(0, 0);
        };
        return id;
    }

    Var mean(Var a) {
        const double n = static_cast<double>(val(a).size());
        return scale(sum(a), 1.0 / n);
    }

    // 1 x C -> N x C, grad sums over rows.
    Var repeat_rows(Var a, int n) {
        if (val(a).rows != 1) throw std::invalid_argument("repeat_rows: expected a row");
        Matrix out(n, val(a).cols);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < out.cols; ++j) out(i, j) = val(a)(0, j);
        Var id = push(std::move(out), nullptr, {a});
        nodes_[id].back = [this, id, a] {
            for (int i = 0; i < nodes_[id].grad.rows; ++i)
                for (int j = 0; j < nodes_[id].grad.cols; ++j)
                    nodes_[a].grad(0, j) += nodes_[id].grad(i, j);
        };
        return id;
    }

    Var hconcat(Var a, Var b) {
        if (val(a).rows != val(b).rows) throw std::invalid_argument("hconcat: row mismatch");
        Matrix out(val(a).rows, val(a).cols + val(b).cols);
        for (int i = 0; i < out.rows; ++i) {
            for (int j = 0; j < val(a).cols; ++j) out(i, j) = val(a)(i, j);
            for (int j = 0; j < val(b).cols; ++j) out(i, val(a).cols + j) = val(b)(i, j);
        }
        Var id = push(std::move(out), nullptr, {a, b});
        nodes_[id].back = [this, id, a, b] {
            const int ca = val(a).cols;
            for (int i = 0; i < nodes_[id].grad.rows; ++i) {
                for (int j = 0; j < ca; ++j) nodes_[a].grad(i, j) += nodes_[id].grad(i, j);
                for (int j = 0; j < val(b).cols; ++j)
                    nodes_[b].grad(i, j) += nodes_[id].grad(i, ca + j);
            }
        };
        return id;
    }

    Var stop_gradient(Var a) { return input(val(a)); }

    // Seeds d(loss)/d(loss)=1 and sweeps the tape in reverse; accumulates leaf
    // grads into their ParamTensors. The loss must be 1x1.
    void backward(Var loss) {
        if (nodes_.empty()) throw std::logic_error("backward: empty tape");
        if (val(loss).rows != 1 || val(loss).cols != 1)
            throw std::invalid_argument("backward: loss must be scalar");
        nodes_[loss].grad(0, 0) = 1.0;
        for (int id = loss; id >= 0; --id)
            if (nodes_[id].back) nodes_[id].back();
        for (auto& n : nodes_)
            if (n.param)
                for (size_t i = 0; i < n.grad.size(); ++i)
                    n.param->grad.data[i] += n.grad.data[i];
    }

    void reset() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Matrix value;
        Matrix grad;
        Matrix aux;
        std::function<void()> back;
        ParamTensor* param = nullptr;
    };

    Var push(Matrix v, std::function<void()> back, std::initializer_list<Var>) {
        Node n;
        n.grad = Matrix(v.rows, v.cols);
        n.value = std::move(v);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<Var>(nodes_.size()) - 1;
    }

    const Matrix& val(Var id) const { return nodes_[id].value; }
    void acc(Var id, const Matrix& g) {
        for (size_t i = 0; i < g.size(); ++i) nodes_[id].grad.data[i] += g.data[i];
    }
    void check_same(Var a, Var b, const char* op) const {
        if (!val(a).same_shape(val(b)))
            throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }

    std::vector<Node> nodes_;
};

}  // namespace htr
