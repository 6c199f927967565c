#include "edict/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "edict/error.hpp"

namespace edict {

namespace {

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError(IoErrorKind::truncated, std::string("while reading ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

// Sanity bound on decoded element counts so a corrupt header cannot request
// an absurd allocation.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

}  // namespace

std::size_t encoded_size(const Shape& shape) { return 4 + 4 + 8 * shape.size() + 8 * element_count(shape); }

void write_tensor(const Tensor& t, std::ostream& out) {
  if (t.rank() == 0) throw IoError(IoErrorKind::zero_rank, "cannot encode a rank-0 tensor");
  out.write(kTensorMagic, 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
  for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw IoError(IoErrorKind::write_failed, "stream error while writing tensor");
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path.string());
  write_tensor(t, out);
}

Tensor read_tensor(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4) throw IoError(IoErrorKind::truncated, "missing magic");
  if (std::memcmp(magic, kTensorMagic, 4) != 0) throw IoError(IoErrorKind::bad_magic, "expected EDT1");
  const auto rank = get_le<std::uint32_t>(in, "rank");
  if (rank == 0) throw IoError(IoErrorKind::zero_rank, "rank-0 tensor in file");
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& d : shape) {
    const auto dim = get_le<std::uint64_t>(in, "dimension");
    if (dim == 0) throw IoError(IoErrorKind::bad_header, "zero-sized dimension");
    if (count > kMaxElements / dim) throw IoError(IoErrorKind::bad_header, "element count overflow");
    count *= dim;
    d = static_cast<std::size_t>(dim);
  }
  std::vector<double> data(static_cast<std::size_t>(count));
  for (double& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "payload"));
  return Tensor(std::move(shape), std::move(data));
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::open_failed, path.string());
  return read_tensor(in);
}

void write_pgm(const Tensor& t, const std::filesystem::path& path) {
  std::size_t h = 0;
  std::size_t w = 0;
  if (t.rank() == 2) {
    h = t.shape()[0];
    w = t.shape()[1];
  } else if (t.rank() == 3) {
    h = t.shape()[1];
    w = t.shape()[2];
  } else {
    throw ShapeError("PGM export needs a [H, W] or [C, H, W] tensor, got " + shape_string(t.shape()));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, path.string());
  out << "P5\n" << w << ' ' << h << "\n255\n";
  for (std::size_t i = 0; i < h * w; ++i) {
    const double v = std::isnan(t[i]) ? 0.0 : std::clamp(t[i], -1.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround((v + 1.0) * 127.5))));
  }
  if (!out) throw IoError(IoErrorKind::write_failed, path.string());
}

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::open_failed, path.string());
  auto next_token = [&in]() {
    std::string tok;
    while (in) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        continue;
      }
      in >> tok;
      break;
    }
    return tok;
  };
  if (next_token() != "P5") throw IoError(IoErrorKind::bad_magic, "expected binary PGM (P5)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token());
    h = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw IoError(IoErrorKind::bad_header, "malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval != 255) throw IoError(IoErrorKind::bad_header, "only 8-bit PGM is supported");
  in.get();  // single whitespace before the raster
  std::vector<double> data(w * h);
  for (double& v : data) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw IoError(IoErrorKind::truncated, "PGM raster");
    v = static_cast<double>(c) / 127.5 - 1.0;
  }
  return Tensor({h, w}, std::move(data));
}

}  // namespace edict
