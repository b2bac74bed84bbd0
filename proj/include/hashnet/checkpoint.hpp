#pragma once

#include <string>

#include "hashnet/network.hpp"

namespace hashnet {

/// Checkpoint file layout (little-endian):
///   magic "HNETCKPT" (8 bytes)
///   u64 format version (currently 1)
///   u64 training step
///   u64 config text length, followed by that many bytes of canonical
///       config text
///   u64 tensor count, then each state tensor in layer order using the
///       tensor wire format (rank, extents, f32 data)
///
/// Parameters are stored as f32 and kept on the f32 grid in memory, so a
/// save/load round trip is bit-exact.
void save_checkpoint(const Network& net, const std::string& path);

Network load_checkpoint(const std::string& path);

} // namespace hashnet
