#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "gamenet/parameters.hpp"

namespace gamenet {

/// Checkpoint container: one line of JSON manifest, then the raw payload.
///
///   {"format":"gamenet-checkpoint","version":1,"metadata":{...},
///    "payload_bytes":N,"tensors":[{"name":..,"shape":[r,c],"offset":o},..]}\n
///   <N bytes: little-endian IEEE-754 binary64, each tensor row-major>
///
/// Offsets are relative to the first payload byte.
struct Checkpoint {
  ParameterSet<double> tensors;
  nlohmann::ordered_json metadata;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gamenet
