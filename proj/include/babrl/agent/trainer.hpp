#pragma once

#include "babrl/agent/qnet.hpp"
#include "babrl/agent/replay.hpp"
#include "babrl/agent/rewards.hpp"
#include "babrl/search.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace babrl::agent {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainerConfig {
    std::vector<int> hidden{64, 64};
    double learning_rate = 1e-3;
    double gamma = 0.9;
    double margin = 0.8;
    double lambda_start = 1.0;
    double per_alpha = 0.6;
    double per_beta_start = 0.4;
    double per_beta_end = 1.0;
    double per_epsilon = 1e-6;
    std::size_t target_sync = 500;
    std::size_t batch_size = 32;
    std::size_t buffer_capacity = 100'000;
    std::size_t demo_epochs = 5;
    std::size_t demo_steps = 1000;
    std::size_t finetune_epochs = 40;
    std::size_t finetune_steps = 1000;
    std::uint64_t seed = 0;
    /// Budget of every demonstration and self-play verify run.
    std::chrono::milliseconds episode_timeout{10'000};
    std::uint64_t episode_max_iterations = 5000;
    bool lp_tightening = true;
    /// Directory for per-epoch checkpoints; empty keeps everything in memory.
    std::string checkpoint_dir;

    std::vector<int> dims() const;
    std::size_t total_steps() const { return demo_epochs * demo_steps + finetune_epochs * finetune_steps; }
};

/// One agent (or demonstrator) decision captured during a verify run.
struct Decision {
    std::uint64_t node_id = 0;
    std::shared_ptr<const StateFeatures> state;
    Eigen::Index action = 0;
};

/// Pairs decisions with their delayed rewards. The next state of each
/// transition is the following decision in DFS order; the last is terminal.
/// Throws TrainingError if a decision has no reward record.
std::vector<Transition> build_transitions(const std::vector<Decision>& decisions,
                                          const std::vector<RewardRecord>& rewards, bool is_demo);

/// Greedy (or epsilon-greedy) Q-network policy for the Agent strategy.
/// Not shareable between concurrent runs; the network itself may be shared.
class AgentPolicy : public SplitPolicy {
public:
    explicit AgentPolicy(std::shared_ptr<const QNet> net, double epsilon = 0.0, std::vector<Decision>* record = nullptr);
    void start(const Network& net, const NodeState& root) override;
    SplitAction choose(const Network& net, const NodeState& node, const HeuristicScores& scores, Rng& rng) override;

private:
    std::shared_ptr<const QNet> net_;
    double epsilon_;
    std::vector<Decision>* record_;
    std::optional<FeatureContext> ctx_;
};

Strategy make_agent_strategy(std::shared_ptr<const QNet> net, double epsilon = 0.0,
                             std::vector<Decision>* record = nullptr);

struct LossComponents {
    double td = 0.0;
    double margin = 0.0;
    double total = 0.0;
};

/// sum_j w_j (Q(s_j, a_j) - y_j)^2 + lambda * sum_{demo j} margin_loss(Q(s_j), a_j, m)
/// with Double-DQN targets y_j. Adds d(loss)/d(online) into `grad` when given
/// and writes the TD errors when `td_errors` is given.
LossComponents batch_loss(const QNet& online, const QNet& target, const std::vector<const Transition*>& batch,
                          const std::vector<double>& weights, double lambda, const TrainerConfig& config,
                          QNet* grad = nullptr, std::vector<double>* td_errors = nullptr);

/// Online and target networks plus the optimizer.
class Learner {
public:
    Learner(const TrainerConfig& config, QNet init);

    /// Samples a batch, takes one Adam step, refreshes priorities and syncs
    /// the target network every `target_sync` steps. Throws TrainingError on a
    /// non-finite loss.
    LossComponents train_step(ReplayBuffer& buffer, Rng& rng, double lambda, double beta);

    const QNet& online() const { return *online_; }
    std::shared_ptr<const QNet> online_ptr() const { return online_; }
    const QNet& target() const { return target_; }
    std::uint64_t steps() const { return steps_; }

private:
    TrainerConfig config_;
    std::shared_ptr<QNet> online_;
    QNet target_;
    Adam adam_;
    std::uint64_t steps_ = 0;
};

struct DemoSet {
    std::vector<Transition> transitions;
    std::vector<std::optional<StrategyKind>> experts; // per query; empty if no heuristic solved it
};

/// Runs every static heuristic on each query, keeps the one with the fewest
/// iterations among those that solved it, and turns its decisions below the
/// shared initial-split depth into demonstration transitions.
DemoSet collect_demonstrations(const std::vector<Instance>& queries, const TrainerConfig& config);

/// Decisions and transitions of one static-heuristic run.
struct RecordedRun {
    SearchRun run;
    std::vector<Decision> decisions;
};
RecordedRun record_heuristic_run(const Instance& inst, StrategyKind kind, const TrainerConfig& config);

struct TrainResult {
    QNet net;
    std::vector<LossComponents> loss_trace;
    std::vector<std::string> checkpoints;
    std::size_t demo_transitions = 0;
    std::size_t self_transitions = 0;
    std::size_t episodes = 0;
};

/// Phase 1: demo_epochs x demo_steps gradient steps on demonstrations only.
/// Phase 2: finetune_epochs x finetune_steps steps, one per agent decision made
/// in epsilon-greedy self-play over `train_queries`, with lambda decaying
/// linearly to zero. Throws TrainingError if there are no demonstrations.
TrainResult train(const TrainerConfig& config, const DemoSet& demos, const std::vector<Instance>& train_queries,
                  const std::function<void(const std::string&)>& log = {});

} // namespace babrl::agent
