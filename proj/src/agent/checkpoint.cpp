#include "babrl/agent/checkpoint.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace babrl::agent {

using nlohmann::json;

namespace {

json config_to_json(const TrainerConfig& c)
{
    return {{"hidden", c.hidden},
            {"learning_rate", c.learning_rate},
            {"gamma", c.gamma},
            {"margin", c.margin},
            {"lambda_start", c.lambda_start},
            {"per_alpha", c.per_alpha},
            {"per_beta_start", c.per_beta_start},
            {"per_beta_end", c.per_beta_end},
            {"per_epsilon", c.per_epsilon},
            {"target_sync", c.target_sync},
            {"batch_size", c.batch_size},
            {"buffer_capacity", c.buffer_capacity},
            {"demo_epochs", c.demo_epochs},
            {"demo_steps", c.demo_steps},
            {"finetune_epochs", c.finetune_epochs},
            {"finetune_steps", c.finetune_steps},
            {"seed", c.seed},
            {"episode_timeout_ms", c.episode_timeout.count()},
            {"episode_max_iterations", c.episode_max_iterations},
            {"lp_tightening", c.lp_tightening}};
}

TrainerConfig config_from_json(const json& j)
{
    TrainerConfig c;
    j.at("hidden").get_to(c.hidden);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("gamma").get_to(c.gamma);
    j.at("margin").get_to(c.margin);
    j.at("lambda_start").get_to(c.lambda_start);
    j.at("per_alpha").get_to(c.per_alpha);
    j.at("per_beta_start").get_to(c.per_beta_start);
    j.at("per_beta_end").get_to(c.per_beta_end);
    j.at("per_epsilon").get_to(c.per_epsilon);
    j.at("target_sync").get_to(c.target_sync);
    j.at("batch_size").get_to(c.batch_size);
    j.at("buffer_capacity").get_to(c.buffer_capacity);
    j.at("demo_epochs").get_to(c.demo_epochs);
    j.at("demo_steps").get_to(c.demo_steps);
    j.at("finetune_epochs").get_to(c.finetune_epochs);
    j.at("finetune_steps").get_to(c.finetune_steps);
    j.at("seed").get_to(c.seed);
    c.episode_timeout = std::chrono::milliseconds(j.at("episode_timeout_ms").get<std::int64_t>());
    j.at("episode_max_iterations").get_to(c.episode_max_iterations);
    j.at("lp_tightening").get_to(c.lp_tightening);
    return c;
}

} // namespace

std::string checkpoint_to_string(const Checkpoint& c)
{
    json layers = json::array();
    for (const auto& l : c.net.layers) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.w.size()));
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index k = 0; k < l.w.cols(); ++k)
                w.push_back(l.w(r, k));
        layers.push_back({{"rows", l.w.rows()},
                          {"cols", l.w.cols()},
                          {"weights", w},
                          {"bias", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
    }
    std::vector<std::string> layout(feature_layout().begin(), feature_layout().end());
    const json doc = {{"format", "babrl-qnet"},
                      {"version", kCheckpointVersion},
                      {"label", c.label},
                      {"steps", c.steps},
                      {"feature_layout", layout},
                      {"dims", c.net.dims()},
                      {"layers", layers},
                      {"config", config_to_json(c.config)}};
    return doc.dump(1);
}

Checkpoint checkpoint_from_string(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        if (doc.at("format") != "babrl-qnet")
            throw CheckpointError("not a babrl Q-network checkpoint");
        if (doc.at("version").get<int>() != kCheckpointVersion)
            throw CheckpointError("unsupported checkpoint version " + doc.at("version").dump());
        const auto layout = doc.at("feature_layout").get<std::vector<std::string>>();
        if (layout.size() != feature_layout().size())
            throw CheckpointError("feature layout has " + std::to_string(layout.size()) + " entries, expected " +
                                  std::to_string(feature_layout().size()));
        for (std::size_t i = 0; i < layout.size(); ++i)
            if (layout[i] != feature_layout()[i])
                throw CheckpointError("feature " + std::to_string(i) + " is '" + layout[i] + "', expected '" +
                                      std::string(feature_layout()[i]) + "'");

        Checkpoint c;
        c.config = config_from_json(doc.at("config"));
        c.steps = doc.at("steps").get<std::uint64_t>();
        c.label = doc.value("label", "");
        const auto dims = doc.at("dims").get<std::vector<int>>();
        const auto& layers = doc.at("layers");
        if (dims.size() != layers.size() + 1 || dims.front() != kFeatureWidth || dims.back() != 1)
            throw CheckpointError("layer dimensions do not describe a per-candidate Q-network");
        for (std::size_t k = 0; k < layers.size(); ++k) {
            const auto& l = layers[k];
            const auto rows = l.at("rows").get<Eigen::Index>();
            const auto cols = l.at("cols").get<Eigen::Index>();
            const auto w = l.at("weights").get<std::vector<double>>();
            const auto b = l.at("bias").get<std::vector<double>>();
            if (rows != dims[k + 1] || cols != dims[k] || static_cast<Eigen::Index>(w.size()) != rows * cols ||
                static_cast<Eigen::Index>(b.size()) != rows)
                throw CheckpointError("layer " + std::to_string(k) + " has inconsistent shape");
            QNet::Layer layer{Eigen::MatrixXd(rows, cols), Eigen::Map<const Eigen::VectorXd>(b.data(), rows)};
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index col = 0; col < cols; ++col)
                    layer.w(r, col) = w[static_cast<std::size_t>(r * cols + col)];
            c.net.layers.push_back(std::move(layer));
        }
        return c;
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const Checkpoint& c)
{
    std::ofstream out(path);
    if (!out)
        throw CheckpointError("cannot write checkpoint " + path);
    out << checkpoint_to_string(c) << "\n";
    if (!out)
        throw CheckpointError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw CheckpointError("cannot read checkpoint " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return checkpoint_from_string(s.str());
}

} // namespace babrl::agent
