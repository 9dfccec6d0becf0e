#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "softmod/baselines.hpp"

namespace softmod {

class Trainer;

// Binary container: magic "SMCKPT\0\0", u32 version, a text header holding
// the ModelSpec as key=value lines, then named sections of named tensors.
// Tensor names follow `component/layer/index` inside each section
// ("policy", "q1", "q2", "q1_target", "q2_target", "temperature").
// All integers and values are little-endian; values are row-major float64.
struct Checkpoint {
    ModelSpec spec;
    std::vector<std::pair<std::string, ParamSet>> sections;

    const ParamSet& section(const std::string& name) const;
    bool has_section(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

Checkpoint make_checkpoint(const Trainer& trainer);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::string model_spec_header(const ModelSpec& spec);
ModelSpec parse_model_spec_header(const std::string& text);

}  // namespace softmod
