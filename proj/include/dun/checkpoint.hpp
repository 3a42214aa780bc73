// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dun/model.hpp"

#include <filesystem>
#include <string>

namespace dun {

/// Binary layout:
///   "DUNCKPT1"
///   uint64 LE header length, then the header: `key=value` lines
///   payload: little-endian float64 values in declaration order
/// Declaration order is input W, b; per hidden block W, b and (with BN)
/// scale, shift, running mean, running var; output W, b; prior logits;
/// variational logits; noise log-std.
inline constexpr char kCheckpointMagic[] = "DUNCKPT1";

std::string serialize_checkpoint(const DunModel& model);
DunModel deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const DunModel& model, const std::filesystem::path& path);
/// Throws std::runtime_error on I/O failure or malformed content.
DunModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dun
