#pragma once

#include <string>

#include "htr/context.hpp"
#include "htr/sac.hpp"

namespace htr {

// Versioned textual checkpoint: key, shape, Adam state, then hexfloat values
// (bit-exact round trip for doubles).
void save_checkpoint(const std::string& path, AgentNets& nets, ContextEncoder& encoder);

// Networks must already have matching architecture (built from the config).
void load_checkpoint(const std::string& path, AgentNets& nets, ContextEncoder& encoder);

// Order-stable digest of all parameter values; used to assert that
// evaluation never mutates parameters.
std::string params_checksum(AgentNets& nets, ContextEncoder& encoder);

}  // namespace htr
