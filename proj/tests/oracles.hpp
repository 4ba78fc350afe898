#pragma once

// Reference implementations used only by tests. They deliberately avoid the
// library's batched code paths.

#include "babrl/agent/trainer.hpp"
#include "babrl/search.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <vector>

namespace babrl::testing {

/// Scalar Q of one candidate column, computed neuron by neuron. Appends the
/// ReLU sign pattern to `pattern` when given.
inline double naive_q(const agent::QNet& net, const Eigen::VectorXd& feat, std::vector<char>* pattern = nullptr)
{
    std::vector<double> a(feat.data(), feat.data() + feat.size());
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        std::vector<double> z(static_cast<std::size_t>(l.w.rows()));
        for (Eigen::Index i = 0; i < l.w.rows(); ++i) {
            double s = l.b[i];
            for (Eigen::Index j = 0; j < l.w.cols(); ++j)
                s += l.w(i, j) * a[static_cast<std::size_t>(j)];
            const bool hidden = k + 1 < net.layers.size();
            if (hidden && pattern)
                pattern->push_back(s > 0);
            z[static_cast<std::size_t>(i)] = hidden ? std::max(s, 0.0) : s;
        }
        a = std::move(z);
    }
    return a[0];
}

struct NaiveLoss {
    double value = 0.0;
    std::vector<char> pattern; // ReLU signs plus every argmax taken
};

inline NaiveLoss naive_batch_loss(const agent::QNet& online, const agent::QNet& target,
                                  const std::vector<const agent::Transition*>& batch, const std::vector<double>& weights,
                                  double lambda, const agent::TrainerConfig& cfg)
{
    NaiveLoss out;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const agent::Transition& t = *batch[j];
        std::vector<double> q;
        for (Eigen::Index c = 0; c < t.state->size(); ++c)
            q.push_back(naive_q(online, t.state->x.col(c), &out.pattern));
        double y = t.reward;
        if (!t.terminal) {
            std::size_t best = 0;
            std::vector<double> qn;
            for (Eigen::Index c = 0; c < t.next->size(); ++c)
                qn.push_back(naive_q(online, t.next->x.col(c), &out.pattern));
            for (std::size_t c = 1; c < qn.size(); ++c)
                if (qn[c] > qn[best])
                    best = c;
            out.pattern.push_back(static_cast<char>(best));
            y += cfg.gamma * naive_q(target, t.next->x.col(static_cast<Eigen::Index>(best)));
        }
        const double td = q[static_cast<std::size_t>(t.action)] - y;
        out.value += weights[j] * td * td;
        if (t.is_demo) {
            double worst = -1e300;
            std::size_t arg = 0;
            for (std::size_t a = 0; a < q.size(); ++a) {
                const double v = q[a] + (static_cast<Eigen::Index>(a) == t.action ? 0.0 : cfg.margin);
                if (v > worst) {
                    worst = v;
                    arg = a;
                }
            }
            out.pattern.push_back(static_cast<char>(arg));
            out.value += lambda * (worst - q[static_cast<std::size_t>(t.action)]);
        }
    }
    return out;
}

struct GradCheck {
    double rel_error = 0.0; // ||g_analytic - g_numeric||_inf / max of both inf-norms
    std::size_t params = 0;
    std::size_t kinks = 0; // parameters whose +-h probes changed a ReLU sign or an argmax
};

/// Central differences of naive_batch_loss against the library gradient.
/// Probes that cross a kink of the piecewise-linear loss are excluded.
inline GradCheck gradient_check(const agent::QNet& online, const agent::QNet& target,
                                const std::vector<const agent::Transition*>& batch, const std::vector<double>& weights,
                                double lambda, const agent::TrainerConfig& cfg, double h = 1e-5)
{
    agent::QNet analytic = online.zeros_like();
    agent::batch_loss(online, target, batch, weights, lambda, cfg, &analytic);
    const NaiveLoss base = naive_batch_loss(online, target, batch, weights, lambda, cfg);

    std::vector<double> ga, gn;
    analytic.for_each_block([&](const double* p, Eigen::Index n) { ga.insert(ga.end(), p, p + n); });
    agent::QNet probe = online;
    std::vector<std::pair<double*, Eigen::Index>> blocks;
    probe.for_each_block([&](double* p, Eigen::Index n) { blocks.emplace_back(p, n); });

    GradCheck out;
    std::vector<double> ga_kept;
    for (auto& [p, n] : blocks)
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::size_t flat = out.params++;
            const double saved = p[i];
            p[i] = saved + h;
            const NaiveLoss up = naive_batch_loss(probe, target, batch, weights, lambda, cfg);
            p[i] = saved - h;
            const NaiveLoss down = naive_batch_loss(probe, target, batch, weights, lambda, cfg);
            p[i] = saved;
            if (up.pattern != base.pattern || down.pattern != base.pattern) {
                ++out.kinks;
                continue;
            }
            gn.push_back((up.value - down.value) / (2 * h));
            ga_kept.push_back(ga[flat]);
        }
    double diff = 0, na = 0, nn = 0;
    for (std::size_t k = 0; k < gn.size(); ++k) {
        diff = std::max(diff, std::abs(ga_kept[k] - gn[k]));
        na = std::max(na, std::abs(ga_kept[k]));
        nn = std::max(nn, std::abs(gn[k]));
    }
    out.rel_error = diff / std::max({na, nn, 1e-12});
    return out;
}

inline std::shared_ptr<agent::StateFeatures> random_state(std::mt19937_64& rng, int candidates)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto s = std::make_shared<agent::StateFeatures>();
    s->x.resize(agent::kFeatureWidth, candidates);
    for (Eigen::Index i = 0; i < s->x.size(); ++i)
        s->x.data()[i] = u(rng);
    for (int c = 0; c < candidates; ++c)
        s->candidates.push_back({{0, static_cast<std::size_t>(c / 2)}, c % 2 ? Phase::Inactive : Phase::Active});
    return s;
}

inline std::vector<agent::Transition> random_transitions(std::mt19937_64& rng, std::size_t count)
{
    std::uniform_int_distribution<int> cands(1, 6);
    std::uniform_real_distribution<double> r(-1.0, -1e-3);
    std::bernoulli_distribution coin(0.5);
    std::vector<agent::Transition> out;
    for (std::size_t k = 0; k < count; ++k) {
        agent::Transition t;
        t.state = random_state(rng, cands(rng));
        t.action = std::uniform_int_distribution<Eigen::Index>(0, t.state->size() - 1)(rng);
        t.reward = r(rng);
        t.terminal = coin(rng);
        if (!t.terminal)
            t.next = random_state(rng, cands(rng));
        t.is_demo = coin(rng);
        out.push_back(std::move(t));
    }
    return out;
}

/// Splits inside each split node's subtree, itself included, recounted from
/// parent links alone.
inline std::map<std::uint64_t, std::uint64_t> recount_subtree_splits(const EventLog& log)
{
    std::map<std::uint64_t, std::int64_t> parent;
    std::vector<std::uint64_t> splits;
    for (const auto& e : log)
        if (e.kind == SearchEvent::Kind::Node) {
            parent[e.id] = e.parent;
            if (e.outcome == NodeOutcome::Split)
                splits.push_back(e.id);
        }
    std::map<std::uint64_t, std::uint64_t> count;
    for (std::uint64_t s : splits) {
        for (std::int64_t a = static_cast<std::int64_t>(s); a >= 0; a = parent.at(static_cast<std::uint64_t>(a)))
            ++count[static_cast<std::uint64_t>(a)];
    }
    return count;
}

} // namespace babrl::testing
