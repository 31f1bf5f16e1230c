#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "csp/subspace.hpp"

namespace csp {

// Binary container for a subspace and its per-task policies. Layout, all
// little-endian:
//   magic "CSPC" | u32 version | u32 n_widths | u32 widths[] |
//   u32 n_acts | u8 act_ids[] | u32 m | f64 anchors[m][P] |
//   u32 N | f64 alphas[N][m] | N x (u32 name_len | bytes | f64 reference)
// A critic sidecar reuses the container with one anchor and zero tasks.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ArchSignature signature;
  std::vector<std::vector<double>> anchors;
  std::vector<PolicyEntry> tasks;
};

Checkpoint checkpoint_from(const Subspace& subspace,
                           const PolicyRegistry& registry);
void apply_checkpoint(const Checkpoint& c, Subspace& subspace,
                      PolicyRegistry& registry);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c);
// Throws ParseError naming the byte offset on any corruption.
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Single-network sidecar helpers (e.g. a trained critic).
void save_params(const std::filesystem::path& path, const ParamVector& params);
ParamVector load_params(const std::filesystem::path& path);

}  // namespace csp
