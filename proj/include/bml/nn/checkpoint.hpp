#pragma once

#include "bml/io.hpp"
#include "bml/nn/model.hpp"

namespace bml::nn {

/// Checkpoint layout (all integers little-endian):
///
///   bytes 0..7    magic "BMLFFCIN"
///   bytes 8..11   u32 format version (1)
///   bytes 12..15  u32 reserved (0)
///   bytes 16..23  u64 header length L
///   next L bytes  UTF-8 JSON header: architecture, init seed, training
///                 record, and the ordered tensor table {name, shape, count}
///   remainder     parameters as f32le, concatenated in table order
///
/// Float models round-trip bit-exactly.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const InpainterModel<float>& model, const fs::path& path);
InpainterModel<float> load_checkpoint(const fs::path& path);

}  // namespace bml::nn
