#pragma once

// KBA1 array container.
//
// Layout (all integers little-endian):
//   "KBA1"                      4-byte magic
//   u32 version                 currently 1
//   u32 kind_len, kind bytes    e.g. "body_rig", "face_asset", "map_stack"
//   u32 array_count
//   per array:
//     u32 name_len, name bytes
//     u8  dtype                 0 = f64 (IEEE-754 binary64), 1 = u32
//     u32 ndim
//     u64 dims[ndim]
//     payload                   product(dims) elements, row-major
//
// A text manifest (`<file>.manifest`) lists kind and array shapes for humans;
// readers never consult it.

#include "kinebody/types.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace kinebody {

enum class DType : std::uint8_t { F64 = 0, U32 = 1 };

struct KbaArray {
  std::string name;
  DType dtype = DType::F64;
  std::vector<std::uint64_t> dims;
  std::vector<double> f64;
  std::vector<std::uint32_t> u32;

  std::uint64_t element_count() const {
    return std::accumulate(dims.begin(), dims.end(), std::uint64_t{1}, std::multiplies<>());
  }

  std::string shape_string() const {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (i) s += 'x';
      s += std::to_string(dims[i]);
    }
    return s.empty() ? "scalar" : s;
  }
};

inline constexpr std::uint32_t kKbaVersion = 1;

class KbaFile {
 public:
  KbaFile() = default;
  explicit KbaFile(std::string kind) : kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }
  void set_kind(std::string kind) { kind_ = std::move(kind); }
  const std::vector<KbaArray>& arrays() const { return arrays_; }

  void add_f64(std::string name, std::vector<std::uint64_t> dims, std::vector<double> data) {
    KbaArray a{std::move(name), DType::F64, std::move(dims), std::move(data), {}};
    require(a.element_count() == a.f64.size(), ErrorKind::DimensionMismatch,
            "array '" + a.name + "' payload does not match dims");
    push(std::move(a));
  }

  void add_u32(std::string name, std::vector<std::uint64_t> dims, std::vector<std::uint32_t> data) {
    KbaArray a{std::move(name), DType::U32, std::move(dims), {}, std::move(data)};
    require(a.element_count() == a.u32.size(), ErrorKind::DimensionMismatch,
            "array '" + a.name + "' payload does not match dims");
    push(std::move(a));
  }

  bool has(std::string_view name) const { return find(name) != nullptr; }

  const KbaArray* find(std::string_view name) const {
    for (const auto& a : arrays_)
      if (a.name == name) return &a;
    return nullptr;
  }

  /// Array lookup with dtype and rank checks; diagnostics name the field.
  const KbaArray& get(std::string_view name, DType dtype, std::size_t ndim) const {
    const KbaArray* a = find(name);
    if (!a) throw Error(ErrorKind::SchemaMismatch, "missing array '" + std::string(name) + "' in " + kind_);
    if (a->dtype != dtype)
      throw Error(ErrorKind::SchemaMismatch, "array '" + a->name + "' has wrong dtype");
    if (a->dims.size() != ndim)
      throw Error(ErrorKind::SchemaMismatch, "array '" + a->name + "' has rank " +
                                                 std::to_string(a->dims.size()) + ", expected " +
                                                 std::to_string(ndim));
    return *a;
  }

  std::string manifest() const {
    std::ostringstream os;
    os << "format KBA1\nversion " << kKbaVersion << "\nkind " << kind_ << '\n';
    for (const auto& a : arrays_)
      os << "array " << a.name << ' ' << (a.dtype == DType::F64 ? "f64" : "u32") << ' '
         << a.shape_string() << '\n';
    return os.str();
  }

 private:
  void push(KbaArray a) {
    require(!has(a.name), ErrorKind::SchemaMismatch, "duplicate array '" + a.name + "'");
    arrays_.push_back(std::move(a));
  }

  std::string kind_;
  std::vector<KbaArray> arrays_;
};

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.append(s);
  }
  void raw(std::string_view s) { bytes_.append(s); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorKind::SchemaMismatch, "truncated KBA1 stream at byte " + std::to_string(pos_));
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_kba(const KbaFile& file) {
  detail::ByteWriter w;
  w.raw("KBA1");
  w.u32(kKbaVersion);
  w.str(file.kind());
  w.u32(static_cast<std::uint32_t>(file.arrays().size()));
  for (const auto& a : file.arrays()) {
    w.str(a.name);
    w.u8(static_cast<std::uint8_t>(a.dtype));
    w.u32(static_cast<std::uint32_t>(a.dims.size()));
    for (auto d : a.dims) w.u64(d);
    if (a.dtype == DType::F64)
      for (double v : a.f64) w.f64(v);
    else
      for (auto v : a.u32) w.u32(v);
  }
  return w.bytes();
}

inline KbaFile decode_kba(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.raw(4) != "KBA1") throw Error(ErrorKind::SchemaMismatch, "bad magic, expected KBA1");
  const auto version = r.u32();
  if (version != kKbaVersion)
    throw Error(ErrorKind::SchemaMismatch, "unsupported KBA1 version " + std::to_string(version));
  KbaFile file(r.str());
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto dtype = r.u8();
    if (dtype > 1) throw Error(ErrorKind::SchemaMismatch, "array '" + name + "' has unknown dtype");
    const auto ndim = r.u32();
    if (ndim > 8) throw Error(ErrorKind::SchemaMismatch, "array '" + name + "' has rank > 8");
    std::vector<std::uint64_t> dims(ndim);
    std::uint64_t n = 1;
    for (auto& d : dims) {
      d = r.u64();
      n *= d;
    }
    const std::uint64_t width = dtype == 0 ? 8 : 4;
    if (n > r.remaining() / width)
      throw Error(ErrorKind::SchemaMismatch, "array '" + name + "' payload exceeds file size");
    if (dtype == 0) {
      std::vector<double> data(n);
      for (auto& v : data) v = r.f64();
      file.add_f64(std::move(name), std::move(dims), std::move(data));
    } else {
      std::vector<std::uint32_t> data(n);
      for (auto& v : data) v = r.u32();
      file.add_u32(std::move(name), std::move(dims), std::move(data));
    }
  }
  if (r.remaining() != 0) throw Error(ErrorKind::SchemaMismatch, "trailing bytes after last array");
  return file;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes the container and its `.manifest` sidecar.
inline void write_kba(const std::string& path, const KbaFile& file) {
  write_text_file(path, encode_kba(file));
  write_text_file(path + ".manifest", file.manifest());
}

inline KbaFile read_kba(const std::string& path) { return decode_kba(read_text_file(path)); }

// Eigen <-> array helpers.

inline void put_matrix(KbaFile& f, std::string name, const MatX3& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  f.add_f64(std::move(name), {static_cast<std::uint64_t>(m.rows()), 3}, std::move(data));
}

inline void put_matrix(KbaFile& f, std::string name, const MatX& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  f.add_f64(std::move(name), {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
            std::move(data));
}

inline void put_stack(KbaFile& f, std::string name, const std::vector<MatX3>& stack, std::size_t rows) {
  std::vector<double> data;
  data.reserve(stack.size() * rows * 3);
  for (const auto& m : stack) data.insert(data.end(), m.data(), m.data() + m.size());
  f.add_f64(std::move(name), {stack.size(), rows, 3}, std::move(data));
}

inline void put_indices(KbaFile& f, std::string name, const std::vector<int>& ids) {
  std::vector<std::uint32_t> data(ids.begin(), ids.end());
  f.add_u32(std::move(name), {ids.size()}, std::move(data));
}

inline MatX3 get_points(const KbaFile& f, std::string_view name) {
  const auto& a = f.get(name, DType::F64, 2);
  if (a.dims[1] != 3) throw Error(ErrorKind::DimensionMismatch, "array '" + a.name + "' must be Nx3");
  MatX3 m(static_cast<Eigen::Index>(a.dims[0]), 3);
  std::copy(a.f64.begin(), a.f64.end(), m.data());
  return m;
}

inline MatX get_matrix(const KbaFile& f, std::string_view name) {
  const auto& a = f.get(name, DType::F64, 2);
  MatX m(static_cast<Eigen::Index>(a.dims[0]), static_cast<Eigen::Index>(a.dims[1]));
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a.f64[k++];
  return m;
}

inline std::vector<MatX3> get_stack(const KbaFile& f, std::string_view name) {
  const auto& a = f.get(name, DType::F64, 3);
  if (a.dims[2] != 3) throw Error(ErrorKind::DimensionMismatch, "array '" + a.name + "' must be KxNx3");
  std::vector<MatX3> out;
  const auto rows = static_cast<Eigen::Index>(a.dims[1]);
  for (std::uint64_t k = 0; k < a.dims[0]; ++k) {
    MatX3 m(rows, 3);
    std::copy_n(a.f64.begin() + static_cast<std::ptrdiff_t>(k * a.dims[1] * 3), rows * 3, m.data());
    out.push_back(std::move(m));
  }
  return out;
}

inline std::vector<int> get_indices(const KbaFile& f, std::string_view name) {
  const auto& a = f.get(name, DType::U32, 1);
  std::vector<int> out;
  out.reserve(a.u32.size());
  for (auto v : a.u32) out.push_back(v == 0xFFFFFFFFu ? kNoParent : static_cast<int>(v));
  return out;
}

inline double get_scalar(const KbaFile& f, std::string_view name) {
  const auto& a = f.get(name, DType::F64, 1);
  if (a.dims[0] != 1) throw Error(ErrorKind::DimensionMismatch, "array '" + a.name + "' must hold one value");
  return a.f64[0];
}

}  // namespace kinebody
