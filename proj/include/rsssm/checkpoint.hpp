#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rsssm/format_error.hpp"
#include "rsssm/tensor.hpp"

namespace rsssm {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

template <typename T> constexpr DType dtype_of();
template <> constexpr DType dtype_of<float>() { return DType::F32; }
template <> constexpr DType dtype_of<double>() { return DType::F64; }
/// Extended precision is stored rounded to 64-bit.
template <> constexpr DType dtype_of<long double>() { return DType::F64; }

/// One named tensor as stored on disk. The payload keeps the exact
/// little-endian bytes so a read/write cycle is bit-exact.
struct CheckpointEntry {
  std::string name;
  DType dtype = DType::F32;
  Shape shape;
  std::vector<std::uint8_t> payload;

  template <typename T>
  static CheckpointEntry from_tensor(std::string name, const Tensor<T>& t);

  /// Converts to the requested precision when the stored dtype differs.
  template <typename T>
  Tensor<T> to_tensor() const;

  bool operator==(const CheckpointEntry&) const = default;
};

inline constexpr char kCheckpointMagic[4] = {'R', 'S', 'S', 'M'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

// Layout: "RSSM", u16 version, then per entry: u16 name length, utf-8 name,
// u8 dtype, u8 rank, rank x u32 extents, raw scalars. All little-endian.
void write_checkpoint(std::ostream& out, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> load_checkpoint(const std::filesystem::path& path);

}  // namespace rsssm
