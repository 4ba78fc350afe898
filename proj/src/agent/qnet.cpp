#include "babrl/agent/qnet.hpp"

#include <algorithm>

namespace babrl::agent {

Eigen::Index argmax_first(const Eigen::VectorXd& q)
{
    if (q.size() == 0)
        throw std::invalid_argument("argmax of an empty vector");
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < q.size(); ++i)
        if (q[i] > q[best])
            best = i;
    return best;
}

Eigen::Index act(const QNet& net, const StateFeatures& s, double epsilon, Rng& rng)
{
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (epsilon > 0.0 && coin(rng) < epsilon) {
        std::uniform_int_distribution<Eigen::Index> pick(0, s.size() - 1);
        return pick(rng);
    }
    return argmax_first(q_forward(net, s));
}

double epsilon_schedule(std::uint64_t iter)
{
    return std::max(0.05, std::pow(0.95, static_cast<double>(iter)));
}

double double_dqn_target(double r, const Eigen::VectorXd& q_online_next, const Eigen::VectorXd& q_target_next,
                         bool terminal, double gamma)
{
    if (terminal)
        return r;
    return r + gamma * q_target_next[argmax_first(q_online_next)];
}

double double_dqn_target(double r, const StateFeatures* next, bool terminal, const QNet& online, const QNet& target,
                         double gamma)
{
    if (terminal || !next)
        return r;
    return double_dqn_target(r, q_forward(online, *next), q_forward(target, *next), false, gamma);
}

namespace {

Eigen::Index margin_argmax(const Eigen::VectorXd& q, Eigen::Index expert, double m)
{
    if (expert < 0 || expert >= q.size())
        throw std::out_of_range("margin_loss: expert index " + std::to_string(expert) + " outside " +
                                std::to_string(q.size()) + " candidates");
    Eigen::Index best = 0;
    double best_value = q[0] + (expert == 0 ? 0.0 : m);
    for (Eigen::Index a = 1; a < q.size(); ++a) {
        const double v = q[a] + (a == expert ? 0.0 : m);
        if (v > best_value) {
            best = a;
            best_value = v;
        }
    }
    return best;
}

} // namespace

double margin_loss(const Eigen::VectorXd& q, Eigen::Index expert, double m)
{
    const Eigen::Index a = margin_argmax(q, expert, m);
    return q[a] + (a == expert ? 0.0 : m) - q[expert];
}

Eigen::VectorXd margin_loss_gradient(const Eigen::VectorXd& q, Eigen::Index expert, double m)
{
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q.size());
    const Eigen::Index a = margin_argmax(q, expert, m);
    g[a] += 1.0;
    g[expert] -= 1.0;
    return g;
}

Adam::Adam(const QNet& shape, double learning_rate, double beta1, double beta2, double eps)
    : m_(shape.zeros_like()), v_(shape.zeros_like()), lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps)
{
}

void Adam::step(QNet& net, const QNet& grad)
{
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
            m = b1_ * m + (1.0 - b1_) * g;
            v = b2_ * v + (1.0 - b2_) * g.cwiseAbs2();
            p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
        };
        update(net.layers[k].w, grad.layers[k].w, m_.layers[k].w, v_.layers[k].w);
        update(net.layers[k].b, grad.layers[k].b, m_.layers[k].b, v_.layers[k].b);
    }
}

} // namespace babrl::agent
