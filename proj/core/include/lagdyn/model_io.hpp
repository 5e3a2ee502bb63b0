#pragma once

#include <memory>
#include <string>

#include "lagdyn/clnn.hpp"
#include "lagdyn/lgnn.hpp"

namespace lagdyn {

/// Checkpoint JSON: {model, config, seed, <named parameter arrays>}.
/// The graph network stores two streams under "potential_net" and
/// "kinetic_net"; the feed-forward baseline stores one under "net".
void save_checkpoint(const LgnnParams& params, const std::string& path);
void save_checkpoint(const ClnnParams& params, const std::string& path);

std::string checkpoint_to_json(const LgnnParams& params);
std::string checkpoint_to_json(const ClnnParams& params);

/// Loads either family; family() on the result tells which.
std::unique_ptr<LagrangianModel> load_checkpoint(const std::string& path);

}  // namespace lagdyn
