#pragma once

#include "babrl/agent/trainer.hpp"

#include <stdexcept>
#include <string>

namespace babrl::agent {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    QNet net;
    TrainerConfig config;
    std::uint64_t steps = 0;
    std::string label;
};

std::string checkpoint_to_string(const Checkpoint& c);
/// Validates the version, the feature layout and every matrix shape.
Checkpoint checkpoint_from_string(const std::string& text);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

} // namespace babrl::agent
