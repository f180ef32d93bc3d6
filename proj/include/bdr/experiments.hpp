#pragma once

#include "bdr/config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace bdr {

/// Runs one named experiment (gap_map | eig_decay | cmi_curves |
/// goal_oriented | mcmc_study), writing CSV reports plus manifest.json into
/// out_dir. Returns the number of data files written.
int run_experiment(const std::string& name, const ValidatedConfig& cfg,
                   const std::filesystem::path& out_dir, std::uint64_t seed);

}  // namespace bdr
