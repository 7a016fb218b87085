#pragma once

#include <string>

#include "smoa/registry.hpp"

namespace smoa {

// Checkpoint file: magic "SMOA1" | u32 entry count | manifest | payloads.
// Manifest entry: u16 name length, name bytes, u8 trainable flag, u8 rank,
// rank u32 extents. Payloads are little-endian f64, concatenated in manifest
// order. Manifest order is registry registration order.
void save_checkpoint(const ParamRegistry& reg, const std::string& path);

// Full restore: the file must cover every registry entry with matching
// shapes, and nothing else. Trainable flags in the file are informational.
void load_checkpoint(ParamRegistry& reg, const std::string& path);

// Partial restore for adapting a pretrained backbone: copies every matching
// non-head entry and requires all frozen entries to be covered. Entries only
// in the file (its head, its own adapter modules) are ignored; trainable
// target entries missing from the file keep their fresh initialization.
void load_backbone(ParamRegistry& reg, const std::string& path);

}  // namespace smoa
