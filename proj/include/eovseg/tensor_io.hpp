#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "eovseg/tensor.hpp"

namespace eovseg {

// EOVT binary tensor format (all integers little-endian):
//   "EOVT" | u8 version = 1 | u8 rank | rank x u32 extents | f32 payload (row-major)
inline constexpr std::uint8_t kEovtVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace eovseg
