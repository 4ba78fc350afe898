#pragma once

#include "babrl/agent/features.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace babrl::agent {

/// Per-candidate scorer: an MLP with ReLU hidden layers and one linear output.
/// Candidates are columns of the input, so one call scores a whole node.
template <typename Scalar>
struct BasicQNet {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    struct Layer {
        Matrix w; // out x in
        Vector b;
    };
    std::vector<Layer> layers;

    /// He-uniform weights, zero biases. dims = {input, hidden..., 1}.
    static BasicQNet make(const std::vector<int>& dims, Rng& rng)
    {
        if (dims.size() < 2 || dims.back() != 1)
            throw std::invalid_argument("QNet dims must end in a single output");
        BasicQNet net;
        for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
            const double limit = std::sqrt(6.0 / dims[k]);
            std::uniform_real_distribution<double> u(-limit, limit);
            Layer l{Matrix(dims[k + 1], dims[k]), Vector::Zero(dims[k + 1])};
            for (Eigen::Index i = 0; i < l.w.size(); ++i)
                l.w.data()[i] = static_cast<Scalar>(u(rng));
            net.layers.push_back(std::move(l));
        }
        return net;
    }

    BasicQNet zeros_like() const
    {
        BasicQNet z;
        for (const auto& l : layers)
            z.layers.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size())});
        return z;
    }

    Eigen::Index input_dim() const { return layers.front().w.cols(); }

    std::vector<int> dims() const
    {
        std::vector<int> d{static_cast<int>(input_dim())};
        for (const auto& l : layers)
            d.push_back(static_cast<int>(l.w.rows()));
        return d;
    }

    Eigen::Index parameter_count() const
    {
        Eigen::Index n = 0;
        for (const auto& l : layers)
            n += l.w.size() + l.b.size();
        return n;
    }

    /// Visits every parameter block as a flat array, in a fixed order.
    template <typename F>
    void for_each_block(F&& f)
    {
        for (auto& l : layers) {
            f(l.w.data(), l.w.size());
            f(l.b.data(), l.b.size());
        }
    }
    template <typename F>
    void for_each_block(F&& f) const
    {
        for (const auto& l : layers) {
            f(l.w.data(), l.w.size());
            f(l.b.data(), l.b.size());
        }
    }
};

using QNet = BasicQNet<double>;

template <typename Scalar>
struct ForwardCache {
    std::vector<typename BasicQNet<Scalar>::Matrix> inputs; // input to each layer
    std::vector<typename BasicQNet<Scalar>::Matrix> pre;    // pre-activation of each layer
};

template <typename Scalar, typename Derived>
typename BasicQNet<Scalar>::Vector q_forward(const BasicQNet<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                                             ForwardCache<Scalar>* cache = nullptr)
{
    if (x.rows() != net.input_dim())
        throw std::invalid_argument("q_forward: feature width " + std::to_string(x.rows()) + ", network expects " +
                                    std::to_string(net.input_dim()));
    typename BasicQNet<Scalar>::Matrix a = x;
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        typename BasicQNet<Scalar>::Matrix z = (l.w * a).colwise() + l.b;
        if (cache) {
            cache->inputs.push_back(a);
            cache->pre.push_back(z);
        }
        a = k + 1 < net.layers.size() ? typename BasicQNet<Scalar>::Matrix(z.cwiseMax(Scalar(0))) : z;
    }
    return a.row(0).transpose();
}

inline Eigen::VectorXd q_forward(const QNet& net, const StateFeatures& s)
{
    return q_forward(net, s.x);
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/dq for every column of
/// the cached forward pass.
template <typename Scalar>
void q_backward(const BasicQNet<Scalar>& net, const ForwardCache<Scalar>& cache,
                const typename BasicQNet<Scalar>::Vector& dq, BasicQNet<Scalar>& grad)
{
    typename BasicQNet<Scalar>::Matrix delta = dq.transpose();
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        if (k + 1 < net.layers.size())
            delta = delta.cwiseProduct((cache.pre[k].array() > Scalar(0)).template cast<Scalar>().matrix());
        grad.layers[k].w.noalias() += delta * cache.inputs[k].transpose();
        grad.layers[k].b += delta.rowwise().sum();
        if (k > 0)
            delta = net.layers[k].w.transpose() * delta;
    }
}

/// Index of the largest entry; the lowest index wins ties.
Eigen::Index argmax_first(const Eigen::VectorXd& q);

/// epsilon-greedy: argmax with probability 1 - epsilon, else uniform.
Eigen::Index act(const QNet& net, const StateFeatures& s, double epsilon, Rng& rng);

/// max(0.05, 0.95^iter)
double epsilon_schedule(std::uint64_t iter);

/// r if terminal, else r + gamma * q_target_next[argmax q_online_next].
double double_dqn_target(double r, const Eigen::VectorXd& q_online_next, const Eigen::VectorXd& q_target_next,
                         bool terminal, double gamma);
double double_dqn_target(double r, const StateFeatures* next, bool terminal, const QNet& online, const QNet& target,
                         double gamma);

/// max_a [q(a) + m * 1(a != expert)] - q(expert). Throws std::out_of_range on a bad index.
double margin_loss(const Eigen::VectorXd& q, Eigen::Index expert, double m);
/// Subgradient of margin_loss with respect to q; the lowest maximising index is used.
Eigen::VectorXd margin_loss_gradient(const Eigen::VectorXd& q, Eigen::Index expert, double m);

class Adam {
public:
    Adam() = default;
    Adam(const QNet& shape, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(QNet& net, const QNet& grad);
    std::uint64_t steps() const { return t_; }

private:
    QNet m_, v_;
    double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
    std::uint64_t t_ = 0;
};

} // namespace babrl::agent
