#pragma once

#include <string>

#include "cg/network.hpp"

namespace cg {

// Writes one heat overlay per (type, fine-grained class) attention map and
// one per type for the relation maps, upsampled to image resolution.
// Returns the number of files written (K*sum-free: K*N_k + K).
int dump_attention(const GroundingModel& model, const Dataset& data,
                   const GroundingSample& sample, const Vocabulary& vocab,
                   const std::string& out_dir);

}  // namespace cg
