#pragma once

#include "babrl/query.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace babrl::harness {

struct GenSpec {
    std::size_t count = 200;
    int min_inputs = 2;
    int max_inputs = 5;
    int min_relus = 6;
    int max_relus = 12;
    int max_hidden_layers = 2;
    /// Threshold = m + s * (median - m) with s uniform in [-spread, spread], m the
    /// exact minimum (or a local-search estimate above exact_relu_limit) and median the
    /// median of sampled outputs. Negative s gives UNSAT, positive s SAT.
    double spread = 0.5;
    std::size_t samples = 256;
    /// Above this many ReLUs the minimum is estimated instead of enumerated.
    std::size_t exact_relu_limit = 14;
};

struct GeneratedSuite {
    std::vector<Instance> instances;
    /// Fraction of SAT instances by construction (threshold above the exact
    /// minimum); NaN when some network exceeds exact_relu_limit.
    double sat_fraction = 0.0;
};

/// Reproducible for a fixed seed: weights and biases uniform in [-1, 1],
/// single output, input box [-1, 1]^n, property y <= threshold.
GeneratedSuite gen_random_suite(std::uint64_t seed, const GenSpec& spec);

/// Writes <dir>/net_XXX.nnet, <dir>/prop_XXX.txt and <dir>/index.txt with lines `id net prop`.
void write_suite(const GeneratedSuite& suite, const std::string& dir);

/// Reads an index written by write_suite; paths are relative to the index.
std::vector<Instance> load_suite_index(const std::string& index_path);

} // namespace babrl::harness
