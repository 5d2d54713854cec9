#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hgp/train.hpp"

namespace hgp {

inline constexpr char kCheckpointMagic[4] = {'H', 'G', 'P', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian layout: magic, u32 version, then five sections each
/// prefixed by its u64 byte length: config text, parameter index, parameter
/// blob, optimizer state, RNG state.
std::string serialize_checkpoint(const TrainState& state);
/// Throws VersionError on a foreign magic or version, ParseError on a
/// truncated or inconsistent file.
TrainState deserialize_checkpoint(const std::string& bytes);

/// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model a checkpoint describes.
Model model_from_state(const TrainState& state);

}  // namespace hgp
