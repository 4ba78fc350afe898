#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace babrl {

/// One affine layer, optionally followed by an elementwise ReLU.
template <typename Scalar>
struct BasicLayer {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weights; // out x in
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;
    bool relu = true;

    Eigen::Index in_dim() const { return weights.cols(); }
    Eigen::Index out_dim() const { return weights.rows(); }
};

/// Per-input (mean, range) pairs from an NNet header, plus the output pair.
/// Raw inputs map to network coordinates as (x - mean) / range.
struct Normalization {
    Eigen::VectorXd input_mean;
    Eigen::VectorXd input_range;
    double output_mean = 0.0;
    double output_range = 1.0;
};

/// Addresses a ReLU by its layer and its row within that layer.
struct NeuronId {
    std::size_t layer = 0;
    std::size_t index = 0;

    auto operator<=>(const NeuronId&) const = default;
};

std::string to_string(const NeuronId& id);

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NNetParseError : public ModelError {
public:
    NNetParseError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Feed-forward network: affine layers with ReLU on every layer but the last.
template <typename Scalar>
class BasicNetwork {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    BasicNetwork() = default;
    BasicNetwork(std::vector<BasicLayer<Scalar>> layers, Vector input_lower, Vector input_upper,
                 std::optional<Normalization> normalization = std::nullopt)
        : layers_(std::move(layers)),
          input_lower_(std::move(input_lower)),
          input_upper_(std::move(input_upper)),
          normalization_(std::move(normalization))
    {
        validate();
        index_relus();
    }

    const std::vector<BasicLayer<Scalar>>& layers() const { return layers_; }
    const BasicLayer<Scalar>& layer(std::size_t k) const { return layers_.at(k); }
    std::size_t layer_count() const { return layers_.size(); }

    Eigen::Index input_dim() const { return input_lower_.size(); }
    Eigen::Index output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

    const Vector& input_lower() const { return input_lower_; }
    const Vector& input_upper() const { return input_upper_; }
    const std::optional<Normalization>& normalization() const { return normalization_; }

    /// ReLUs are numbered layer by layer; this is the flat index space used
    /// for phase maps and heuristic tables.
    std::size_t relu_count() const { return relu_ids_.size(); }
    const NeuronId& relu_id(std::size_t flat) const { return relu_ids_.at(flat); }
    const std::vector<NeuronId>& relu_ids() const { return relu_ids_; }
    std::size_t flat_index(const NeuronId& id) const
    {
        if (id.layer >= layers_.size() || !layers_[id.layer].relu ||
            static_cast<Eigen::Index>(id.index) >= layers_[id.layer].out_dim())
            throw ModelError("neuron " + to_string(id) + " is not a ReLU of this network");
        return layer_offset_[id.layer] + id.index;
    }
    std::size_t layer_offset(std::size_t k) const { return layer_offset_.at(k); }

private:
    void validate() const
    {
        if (layers_.empty())
            throw ModelError("network has no layers");
        if (input_lower_.size() != input_upper_.size())
            throw ModelError("input bound vectors differ in length");
        if (layers_.front().in_dim() != input_lower_.size())
            throw ModelError("first layer width does not match input dimension");
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            const auto& l = layers_[k];
            if (l.bias.size() != l.out_dim())
                throw ModelError("layer " + std::to_string(k) + ": bias length mismatch");
            if (k + 1 < layers_.size() && layers_[k + 1].in_dim() != l.out_dim())
                throw ModelError("layer " + std::to_string(k + 1) + ": input width does not chain");
        }
        if (layers_.back().relu)
            throw ModelError("final layer must be linear");
        for (Eigen::Index i = 0; i < input_lower_.size(); ++i)
            if (!(input_lower_[i] <= input_upper_[i]))
                throw ModelError("input " + std::to_string(i) + ": lower bound exceeds upper bound");
    }

    void index_relus()
    {
        layer_offset_.assign(layers_.size(), 0);
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            layer_offset_[k] = relu_ids_.size();
            if (!layers_[k].relu)
                continue;
            for (Eigen::Index i = 0; i < layers_[k].out_dim(); ++i)
                relu_ids_.push_back({k, static_cast<std::size_t>(i)});
        }
    }

    std::vector<BasicLayer<Scalar>> layers_;
    Vector input_lower_;
    Vector input_upper_;
    std::optional<Normalization> normalization_;
    std::vector<NeuronId> relu_ids_;
    std::vector<std::size_t> layer_offset_;
};

using Layer = BasicLayer<double>;
using Network = BasicNetwork<double>;

/// Exact forward pass. The input box is not enforced.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> evaluate(const BasicNetwork<Scalar>& net,
                                                   const Eigen::MatrixBase<Derived>& x)
{
    if (x.size() != net.input_dim())
        throw ModelError("evaluate: expected " + std::to_string(net.input_dim()) + " inputs, got " +
                         std::to_string(x.size()));
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> a = x.template cast<Scalar>();
    for (const auto& layer : net.layers()) {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z = layer.weights * a + layer.bias;
        a = layer.relu ? Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(z.cwiseMax(Scalar(0))) : z;
    }
    return a;
}

/// All pre-activation vectors of a forward pass, one per layer.
std::vector<Eigen::VectorXd> pre_activations(const Network& net, const Eigen::VectorXd& x);

/// The two-input, two-ReLU running example:
/// n1 = 2*x1, n2 = x1 - x2, y = -relu(n1) + relu(n2), x1 in [-1,1], x2 in [0,1].
Network toy_network();

Network load_nnet(std::istream& in);
Network load_nnet_file(const std::string& path);
/// Writes the NNet layout with round-trip (17 significant digit) precision.
void emit_nnet(const Network& net, std::ostream& out);
void emit_nnet_file(const Network& net, const std::string& path);

} // namespace babrl
