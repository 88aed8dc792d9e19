#pragma once

#include <string>

#include "cage/network.hpp"

namespace cage {

/// Portable weight container, bit-exact and little-endian throughout:
///   magic "CAGE", u32 version = 1, u32 tensor count,
///   then per tensor: u16 name length, UTF-8 name, u8 rank,
///   u32 dims[rank], rank-product f32 values (IEEE-754).
/// Tensors are written in ascending name order so identical stores
/// serialize to identical bytes.
void save_weights(const std::string& path, const WeightStore& store);
WeightStore load_weights(const std::string& path);

constexpr std::uint32_t kWeightFormatVersion = 1;

}  // namespace cage
