#pragma once

#include <filesystem>
#include <iosfwd>

#include "edict/tensor.hpp"

namespace edict {

// EDT1 layout: "EDT1", rank as u32 LE, each dim as u64 LE, then the payload
// as IEEE-754 binary64 LE in row-major order.
inline constexpr char kTensorMagic[4] = {'E', 'D', 'T', '1'};

void write_tensor(const Tensor& t, std::ostream& out);
void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(std::istream& in);
Tensor read_tensor(const std::filesystem::path& path);

std::size_t encoded_size(const Shape& shape);

// 8-bit binary PGM (P5) of a 2-D tensor, or the first channel of a
// [C, H, W] tensor, mapping [-1, 1] to [0, 255] with clamping.
void write_pgm(const Tensor& t, const std::filesystem::path& path);
// Inverse mapping of write_pgm; returns a [H, W] tensor in [-1, 1].
Tensor read_pgm(const std::filesystem::path& path);

}  // namespace edict
