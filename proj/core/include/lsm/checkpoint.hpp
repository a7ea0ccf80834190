#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lsm/network.hpp"

namespace lsm {

// Binary checkpoint layout, all integers little-endian:
//
//   "LSM1"
//   u32 layer count
//   u32 input rank, u32 input dims...
//   per layer:
//     u8  tag: bits 0-3 kind (0 dense, 1 conv3x3, 2 strided conv3x3),
//              bit 4 relu, bit 5 residual, bit 6 conv renormalization,
//              bit 7 global average pool before a dense layer
//     u8  weight rank, u32 weight dims...
//     f32 weights (row-major), f32 biases (one per output)
//     f32 residual alpha (residual layers only)

std::vector<std::uint8_t> serialize_checkpoint(const NetworkModel<float>& model);
NetworkModel<float> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const NetworkModel<float>& model, const std::filesystem::path& path);
NetworkModel<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace lsm
