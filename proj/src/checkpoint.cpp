#include "rsssm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>

namespace rsssm {

namespace {

std::size_t scalar_bytes(DType d) { return d == DType::F32 ? 4 : 8; }

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

class Cursor {
 public:
  explicit Cursor(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what, pos_);
    }
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename T>
CheckpointEntry CheckpointEntry::from_tensor(std::string name, const Tensor<T>& t) {
  CheckpointEntry e;
  e.name = std::move(name);
  e.dtype = dtype_of<T>();
  e.shape = t.shape();
  e.payload.reserve(t.numel() * scalar_bytes(e.dtype));
  for (T v : t.data()) {
    if constexpr (std::is_same_v<T, float>) {
      put_le(e.payload, std::bit_cast<std::uint32_t>(v));
    } else {
      put_le(e.payload, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
    }
  }
  return e;
}

template <typename T>
Tensor<T> CheckpointEntry::to_tensor() const {
  const std::size_t n = numel(shape);
  std::vector<T> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (dtype == DType::F32) {
      data[i] = static_cast<T>(std::bit_cast<float>(get_le<std::uint32_t>(payload.data() + 4 * i)));
    } else {
      data[i] = static_cast<T>(std::bit_cast<double>(get_le<std::uint64_t>(payload.data() + 8 * i)));
    }
  }
  return Tensor<T>(shape, std::move(data));
}

void write_checkpoint(std::ostream& out, const std::vector<CheckpointEntry>& entries) {
  std::vector<std::uint8_t> buf(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_le(buf, kCheckpointVersion);
  for (const auto& e : entries) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw std::invalid_argument("checkpoint entry name too long: " + e.name.substr(0, 32));
    }
    if (e.shape.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw std::invalid_argument("checkpoint entry rank too large: " + e.name);
    }
    if (e.payload.size() != numel(e.shape) * scalar_bytes(e.dtype)) {
      throw std::invalid_argument("checkpoint entry payload does not match its shape: " + e.name);
    }
    put_le(buf, static_cast<std::uint16_t>(e.name.size()));
    buf.insert(buf.end(), e.name.begin(), e.name.end());
    buf.push_back(static_cast<std::uint8_t>(e.dtype));
    buf.push_back(static_cast<std::uint8_t>(e.shape.size()));
    for (auto extent : e.shape) {
      if (extent > std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("checkpoint extent exceeds u32: " + e.name);
      }
      put_le(buf, static_cast<std::uint32_t>(extent));
    }
    buf.insert(buf.end(), e.payload.begin(), e.payload.end());
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("failed to write checkpoint stream");
}

std::vector<CheckpointEntry> read_checkpoint(std::istream& in) {
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  Cursor cur(bytes);
  const auto* magic = cur.take(4, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("bad checkpoint magic", 0);
  const auto version = get_le<std::uint16_t>(cur.take(2, "version"));
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  std::vector<CheckpointEntry> entries;
  while (!cur.done()) {
    CheckpointEntry e;
    const auto name_len = get_le<std::uint16_t>(cur.take(2, "name length"));
    const auto* name = cur.take(name_len, "name");
    e.name.assign(reinterpret_cast<const char*>(name), name_len);
    const std::size_t dtype_at = cur.pos();
    const auto tag = *cur.take(1, "dtype tag");
    if (tag > 1) throw FormatError("unknown dtype tag " + std::to_string(tag), dtype_at);
    e.dtype = static_cast<DType>(tag);
    const auto rank = *cur.take(1, "rank");
    for (std::size_t i = 0; i < rank; ++i) e.shape.push_back(get_le<std::uint32_t>(cur.take(4, "extent")));
    const std::size_t n = numel(e.shape) * scalar_bytes(e.dtype);
    const auto* payload = cur.take(n, "payload");
    e.payload.assign(payload, payload + n);
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  write_checkpoint(out, entries);
}

std::vector<CheckpointEntry> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  return read_checkpoint(in);
}

template CheckpointEntry CheckpointEntry::from_tensor(std::string, const Tensor<float>&);
template CheckpointEntry CheckpointEntry::from_tensor(std::string, const Tensor<double>&);
template Tensor<float> CheckpointEntry::to_tensor() const;
template Tensor<double> CheckpointEntry::to_tensor() const;
template CheckpointEntry CheckpointEntry::from_tensor(std::string, const Tensor<long double>&);
template Tensor<long double> CheckpointEntry::to_tensor() const;

}  // namespace rsssm
