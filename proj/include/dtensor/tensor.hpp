#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "dtensor/error.hpp"

namespace dtensor {

using Index = std::int64_t;

// ----------------------------------------------------------------------
// Shape

class Shape {
 public:
  explicit Shape(std::vector<Index> dims) : dims_(std::move(dims)) { validate(); }
  Shape(std::initializer_list<Index> dims) : dims_(dims) { validate(); }

  std::size_t rank() const { return dims_.size(); }
  const std::vector<Index>& dims() const { return dims_; }
  Index operator[](std::size_t j) const { return dims_[j]; }
  Index element_count() const { return count_; }

  /// Row-major strides: stride[N-1] = 1, stride[j] = stride[j+1] * dims[j+1].
  std::vector<Index> strides() const {
    std::vector<Index> s(dims_.size(), 1);
    for (std::size_t j = dims_.size() - 1; j > 0; --j) s[j - 1] = s[j] * dims_[j];
    return s;
  }

  bool contains(std::span<const Index> idx) const {
    if (idx.size() != dims_.size()) return false;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (idx[j] < 0 || idx[j] >= dims_[j]) return false;
    }
    return true;
  }

  Index linear_offset(std::span<const Index> idx) const {
    Index off = 0;
    for (std::size_t j = 0; j < dims_.size(); ++j) off = off * dims_[j] + idx[j];
    return off;
  }

  void unravel(Index offset, std::span<Index> out) const {
    for (std::size_t j = dims_.size(); j-- > 0;) {
      out[j] = offset % dims_[j];
      offset /= dims_[j];
    }
  }

  std::string to_string() const {
    std::string s = "[";
    for (std::size_t j = 0; j < dims_.size(); ++j) {
      if (j) s += ",";
      s += std::to_string(dims_[j]);
    }
    return s + "]";
  }

  friend bool operator==(const Shape& a, const Shape& b) { return a.dims_ == b.dims_; }

 private:
  void validate() {
    if (dims_.empty()) fail(ErrorCode::InvalidShape, "shape must have at least one dimension");
    count_ = 1;
    for (Index d : dims_) {
      if (d < 1) fail(ErrorCode::InvalidShape, "dimension sizes must be >= 1, got " + std::to_string(d));
      if (__builtin_mul_overflow(count_, d, &count_)) {
        fail(ErrorCode::InvalidShape, "element count overflows 64 bits");
      }
    }
  }

  std::vector<Index> dims_;
  Index count_ = 0;
};

// ----------------------------------------------------------------------
// ElementType

enum class ElementType : std::uint8_t { U8 = 0, F32 = 1, F64 = 2 };

constexpr std::size_t byte_width(ElementType t) {
  switch (t) {
    case ElementType::U8: return 1;
    case ElementType::F32: return 4;
    case ElementType::F64: return 8;
  }
  return 0;
}

inline std::string to_string(ElementType t) {
  switch (t) {
    case ElementType::U8: return "U8";
    case ElementType::F32: return "F32";
    case ElementType::F64: return "F64";
  }
  return "?";
}

inline ElementType element_type_from_string(const std::string& s) {
  if (s == "U8") return ElementType::U8;
  if (s == "F32") return ElementType::F32;
  if (s == "F64") return ElementType::F64;
  fail(ErrorCode::ParseError, "unknown element type '" + s + "'");
}

inline ElementType element_type_from_tag(std::int64_t tag) {
  if (tag < 0 || tag > 2) fail(ErrorCode::InconsistentMeta, "bad dtype tag " + std::to_string(tag));
  return static_cast<ElementType>(tag);
}

// ----------------------------------------------------------------------
// DenseTensor

/// Row-major dense tensor. Immutable once built; the buffer alternative
/// determines the element type.
class DenseTensor {
 public:
  using Buffer = std::variant<std::vector<std::uint8_t>, std::vector<float>, std::vector<double>>;

  DenseTensor(Shape shape, Buffer data) : shape_(std::move(shape)), data_(std::move(data)) {
    const auto n = std::visit([](const auto& v) { return v.size(); }, data_);
    if (static_cast<Index>(n) != shape_.element_count()) {
      fail(ErrorCode::LengthMismatch, "buffer has " + std::to_string(n) + " elements, shape " +
                                          shape_.to_string() + " needs " +
                                          std::to_string(shape_.element_count()));
    }
  }

  static DenseTensor zeros(const Shape& shape, ElementType dtype) {
    const auto n = static_cast<std::size_t>(shape.element_count());
    switch (dtype) {
      case ElementType::U8: return {shape, std::vector<std::uint8_t>(n)};
      case ElementType::F32: return {shape, std::vector<float>(n)};
      case ElementType::F64: break;
    }
    return {shape, std::vector<double>(n)};
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.rank(); }
  Index size() const { return shape_.element_count(); }
  ElementType dtype() const { return static_cast<ElementType>(data_.index()); }
  const Buffer& buffer() const { return data_; }

  template <typename T>
  std::span<const T> data() const {
    const auto* v = std::get_if<std::vector<T>>(&data_);
    if (!v) fail(ErrorCode::ShapeMismatch, "tensor dtype is " + to_string(dtype()));
    return *v;
  }

  /// Element at a linear row-major offset, widened to double.
  double value(Index linear) const {
    return std::visit([linear](const auto& v) { return static_cast<double>(v[static_cast<std::size_t>(linear)]); },
                      data_);
  }

  double at(std::span<const Index> idx) const {
    if (!shape_.contains(idx)) fail(ErrorCode::OutOfBounds, "index outside " + shape_.to_string());
    return value(shape_.linear_offset(idx));
  }
  double at(std::initializer_list<Index> idx) const { return at(std::span<const Index>(idx.begin(), idx.size())); }

  /// Raw little-endian payload (host order is assumed little-endian).
  std::span<const std::uint8_t> raw_bytes() const {
    return std::visit(
        [](const auto& v) {
          return std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(v.data()),
                                               v.size() * sizeof(v[0]));
        },
        data_);
  }

  /// Bitwise comparison of shape, dtype and payload.
  friend bool operator==(const DenseTensor& a, const DenseTensor& b) {
    if (!(a.shape_ == b.shape_) || a.dtype() != b.dtype()) return false;
    auto ra = a.raw_bytes();
    auto rb = b.raw_bytes();
    return ra.size() == rb.size() && std::memcmp(ra.data(), rb.data(), ra.size()) == 0;
  }

 private:
  Shape shape_;
  Buffer data_;
};

inline DenseTensor make_dense(Shape shape, DenseTensor::Buffer data) {
  return DenseTensor(std::move(shape), std::move(data));
}

inline DenseTensor make_dense(Shape shape, std::vector<double> data) {
  return DenseTensor(std::move(shape), DenseTensor::Buffer(std::move(data)));
}

/// Builds a tensor from a raw little-endian payload of the given type.
inline DenseTensor make_dense(Shape shape, ElementType dtype, std::span<const std::uint8_t> raw) {
  const auto width = byte_width(dtype);
  if (raw.size() % width != 0 || static_cast<Index>(raw.size() / width) != shape.element_count()) {
    fail(ErrorCode::LengthMismatch, "payload of " + std::to_string(raw.size()) + " bytes does not match " +
                                        shape.to_string() + " x " + to_string(dtype));
  }
  auto fill = [&](auto proto) {
    using T = decltype(proto);
    std::vector<T> v(raw.size() / sizeof(T));
    if (!v.empty()) std::memcpy(v.data(), raw.data(), raw.size());
    return DenseTensor(std::move(shape), DenseTensor::Buffer(std::move(v)));
  };
  switch (dtype) {
    case ElementType::U8: return fill(std::uint8_t{});
    case ElementType::F32: return fill(float{});
    case ElementType::F64: break;
  }
  return fill(double{});
}

/// Narrows an F64 tensor back to `dtype`. Used when a sparse layout recorded
/// the original element type of a dense input.
inline DenseTensor cast_dense(const DenseTensor& t, ElementType dtype) {
  if (t.dtype() == dtype) return t;
  const auto n = static_cast<std::size_t>(t.size());
  auto convert = [&](auto proto) {
    using T = decltype(proto);
    std::vector<T> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<T>(t.value(static_cast<Index>(i)));
    return DenseTensor(t.shape(), DenseTensor::Buffer(std::move(v)));
  };
  switch (dtype) {
    case ElementType::U8: return convert(std::uint8_t{});
    case ElementType::F32: return convert(float{});
    case ElementType::F64: break;
  }
  return convert(double{});
}

// ----------------------------------------------------------------------
// CooTensor

/// Canonical sparse form: lexicographically sorted, duplicate-free
/// coordinates with nonzero F64 values. Indices are stored flat, nnz x rank.
class CooTensor {
 public:
  explicit CooTensor(Shape shape) : shape_(std::move(shape)) {}

  /// Validating constructor. Sorts rows, drops explicit zeros, rejects
  /// duplicates and out-of-range coordinates.
  static CooTensor from_entries(Shape shape, std::vector<Index> indices, std::vector<double> values) {
    const std::size_t rank = shape.rank();
    if (indices.size() != values.size() * rank) {
      fail(ErrorCode::LengthMismatch, std::to_string(indices.size()) + " indices for " +
                                          std::to_string(values.size()) + " values of rank " +
                                          std::to_string(rank));
    }
    const std::size_t n = values.size();
    for (std::size_t k = 0; k < n; ++k) {
      if (!shape.contains(std::span<const Index>(indices.data() + k * rank, rank))) {
        fail(ErrorCode::OutOfBounds, "coordinate row " + std::to_string(k) + " outside " + shape.to_string());
      }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto row = [&](std::size_t k) { return indices.data() + k * rank; };
    bool sorted = true;
    for (std::size_t k = 1; k < n && sorted; ++k) {
      sorted = std::lexicographical_compare(row(k - 1), row(k - 1) + rank, row(k), row(k) + rank);
    }
    if (!sorted) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(row(a), row(a) + rank, row(b), row(b) + rank);
      });
    }
    CooTensor out(std::move(shape));
    out.indices_.reserve(indices.size());
    out.values_.reserve(n);
    const Index* prev = nullptr;
    for (std::size_t k : order) {
      const Index* r = row(k);
      if (prev && std::equal(prev, prev + rank, r)) {
        fail(ErrorCode::DuplicateCoordinate, "coordinate appears more than once");
      }
      prev = r;
      if (values[k] == 0.0) continue;
      out.indices_.insert(out.indices_.end(), r, r + rank);
      out.values_.push_back(values[k]);
    }
    return out;
  }

  /// For producers that already emit sorted order. Order and bounds are
  /// verified in one linear pass; explicit zeros are dropped.
  static CooTensor from_sorted(Shape shape, std::vector<Index> indices, std::vector<double> values) {
    CooTensor out(std::move(shape));
    out.indices_ = std::move(indices);
    out.values_ = std::move(values);
    out.drop_zeros();
    out.check_canonical();
    return out;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.rank(); }
  std::size_t nnz() const { return values_.size(); }
  std::span<const Index> indices() const { return indices_; }
  std::span<const double> values() const { return values_; }
  std::span<const Index> index(std::size_t k) const {
    return std::span<const Index>(indices_.data() + k * rank(), rank());
  }

  friend bool operator==(const CooTensor& a, const CooTensor& b) {
    return a.shape_ == b.shape_ && a.indices_ == b.indices_ &&
           a.values_.size() == b.values_.size() &&
           std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(double)) == 0;
  }

 private:
  void drop_zeros() {
    if (std::find(values_.begin(), values_.end(), 0.0) == values_.end()) return;
    const std::size_t rank = shape_.rank();
    std::size_t w = 0;
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (values_[k] == 0.0) continue;
      std::copy_n(indices_.begin() + static_cast<std::ptrdiff_t>(k * rank), rank,
                  indices_.begin() + static_cast<std::ptrdiff_t>(w * rank));
      values_[w++] = values_[k];
    }
    values_.resize(w);
    indices_.resize(w * rank);
  }

  void check_canonical() const {
    const std::size_t rank = shape_.rank();
    if (indices_.size() != values_.size() * rank) {
      fail(ErrorCode::LengthMismatch, "index/value length mismatch");
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
      auto r = index(k);
      if (!shape_.contains(r)) fail(ErrorCode::OutOfBounds, "coordinate outside " + shape_.to_string());
      if (k > 0) {
        auto p = index(k - 1);
        if (!std::lexicographical_compare(p.begin(), p.end(), r.begin(), r.end())) {
          fail(ErrorCode::DuplicateCoordinate, "coordinates not strictly increasing at row " + std::to_string(k));
        }
      }
    }
  }

  Shape shape_;
  std::vector<Index> indices_;
  std::vector<double> values_;
};

// ----------------------------------------------------------------------
// SliceSpec

struct IndexRange {
  Index start = 0;
  Index end = 0;

  Index length() const { return end - start; }
  bool contains(Index i) const { return i >= start && i < end; }
  bool overlaps(Index lo, Index hi) const { return lo < end && start < hi; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Per-dimension half-open ranges; std::nullopt means the full dimension.
class SliceSpec {
 public:
  SliceSpec() = default;
  explicit SliceSpec(std::vector<std::optional<IndexRange>> ranges) : ranges_(std::move(ranges)) {}

  static SliceSpec full(std::size_t rank) { return SliceSpec(std::vector<std::optional<IndexRange>>(rank)); }

  /// [start, end) on the first dimension, everything else full.
  static SliceSpec leading(std::size_t rank, Index start, Index end) {
    SliceSpec s = full(rank);
    s.ranges_[0] = IndexRange{start, end};
    return s;
  }

  std::size_t rank() const { return ranges_.size(); }
  const std::vector<std::optional<IndexRange>>& ranges() const { return ranges_; }
  bool is_full(std::size_t j) const { return !ranges_[j].has_value(); }

  /// Concrete ranges for `shape`, with Full expanded to [0, d).
  std::vector<IndexRange> resolve(const Shape& shape) const {
    if (ranges_.size() != shape.rank()) {
      fail(ErrorCode::RangeOutOfBounds, "slice has " + std::to_string(ranges_.size()) +
                                            " ranges for a rank-" + std::to_string(shape.rank()) + " tensor");
    }
    std::vector<IndexRange> out(ranges_.size());
    for (std::size_t j = 0; j < ranges_.size(); ++j) {
      if (!ranges_[j]) {
        out[j] = {0, shape[j]};
        continue;
      }
      const auto r = *ranges_[j];
      if (r.start < 0 || r.start >= r.end || r.end > shape[j]) {
        fail(ErrorCode::RangeOutOfBounds, "range [" + std::to_string(r.start) + "," + std::to_string(r.end) +
                                              ") invalid for dimension " + std::to_string(j) + " of size " +
                                              std::to_string(shape[j]));
      }
      out[j] = r;
    }
    return out;
  }

  Shape result_shape(const Shape& shape) const {
    auto r = resolve(shape);
    std::vector<Index> dims(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) dims[j] = r[j].length();
    return Shape(std::move(dims));
  }

  /// numpy-style text, e.g. "0:1,:,:".
  std::string to_string() const {
    std::string s;
    for (std::size_t j = 0; j < ranges_.size(); ++j) {
      if (j) s += ',';
      if (ranges_[j]) {
        s += std::to_string(ranges_[j]->start) + ":" + std::to_string(ranges_[j]->end);
      } else {
        s += ':';
      }
    }
    return s;
  }

  friend bool operator==(const SliceSpec&, const SliceSpec&) = default;

 private:
  std::vector<std::optional<IndexRange>> ranges_;
};

// ----------------------------------------------------------------------
// TensorId

class TensorId {
 public:
  explicit TensorId(std::string id) : id_(std::move(id)) {
    if (id_.empty()) fail(ErrorCode::InvalidId, "tensor id must be non-empty");
    for (unsigned char c : id_) {
      if (c == '/' || c == '\\' || c <= ' ' || c == 0x7f) {
        fail(ErrorCode::InvalidId, "tensor id '" + id_ + "' contains a separator or whitespace");
      }
    }
  }

  const std::string& str() const { return id_; }
  friend bool operator==(const TensorId&, const TensorId&) = default;
  friend auto operator<=>(const TensorId&, const TensorId&) = default;

 private:
  std::string id_;
};

// ----------------------------------------------------------------------
// Operations

inline CooTensor dense_to_coo(const DenseTensor& t) {
  const std::size_t rank = t.rank();
  std::vector<Index> indices;
  std::vector<double> values;
  std::vector<Index> idx(rank, 0);
  const auto& dims = t.shape().dims();
  for (Index lin = 0; lin < t.size(); ++lin) {
    const double v = t.value(lin);
    if (v != 0.0) {
      indices.insert(indices.end(), idx.begin(), idx.end());
      values.push_back(v);
    }
    for (std::size_t j = rank; j-- > 0;) {
      if (++idx[j] < dims[j]) break;
      idx[j] = 0;
    }
  }
  return CooTensor::from_sorted(t.shape(), std::move(indices), std::move(values));
}

inline DenseTensor coo_to_dense(const CooTensor& c) {
  std::vector<double> data(static_cast<std::size_t>(c.shape().element_count()), 0.0);
  for (std::size_t k = 0; k < c.nnz(); ++k) {
    auto idx = c.index(k);
    if (!c.shape().contains(idx)) fail(ErrorCode::OutOfBounds, "coordinate outside " + c.shape().to_string());
    data[static_cast<std::size_t>(c.shape().linear_offset(idx))] = c.values()[k];
  }
  return DenseTensor(c.shape(), std::move(data));
}

inline DenseTensor slice_dense(const DenseTensor& t, const SliceSpec& s) {
  const auto ranges = s.resolve(t.shape());
  const Shape out_shape = s.result_shape(t.shape());
  const std::size_t rank = t.rank();
  const auto strides = t.shape().strides();
  return std::visit(
      [&](const auto& src) {
        using T = typename std::decay_t<decltype(src)>::value_type;
        std::vector<T> out;
        out.reserve(static_cast<std::size_t>(out_shape.element_count()));
        std::vector<Index> idx(rank, 0);
        // Innermost dimension is copied as a contiguous run.
        const Index run = ranges[rank - 1].length();
        const Index outer = out_shape.element_count() / run;
        for (Index o = 0; o < outer; ++o) {
          Index base = 0;
          for (std::size_t j = 0; j + 1 < rank; ++j) base += (ranges[j].start + idx[j]) * strides[j];
          base += ranges[rank - 1].start;
          out.insert(out.end(), src.begin() + base, src.begin() + base + run);
          for (std::size_t j = rank - 1; j-- > 0;) {
            if (++idx[j] < ranges[j].length()) break;
            idx[j] = 0;
          }
        }
        return DenseTensor(out_shape, DenseTensor::Buffer(std::move(out)));
      },
      t.buffer());
}

/// Sparse counterpart of slice_dense: keeps nonzeros inside `s` and re-bases
/// them onto the slice's shape.
inline CooTensor slice_coo(const CooTensor& c, const SliceSpec& s) {
  const auto ranges = s.resolve(c.shape());
  const std::size_t rank = c.rank();
  std::vector<Index> indices;
  std::vector<double> values;
  for (std::size_t k = 0; k < c.nnz(); ++k) {
    auto idx = c.index(k);
    bool inside = true;
    for (std::size_t j = 0; j < rank && inside; ++j) inside = ranges[j].contains(idx[j]);
    if (!inside) continue;
    for (std::size_t j = 0; j < rank; ++j) indices.push_back(idx[j] - ranges[j].start);
    values.push_back(c.values()[k]);
  }
  return CooTensor::from_sorted(s.result_shape(c.shape()), std::move(indices), std::move(values));
}

inline double density(const CooTensor& c) {
  return static_cast<double>(c.nnz()) / static_cast<double>(c.shape().element_count());
}

enum class SparsityClass { Sparse, General };

inline constexpr double kSparseThreshold = 0.10;

/// Sparse iff strictly fewer than 10% of elements are nonzero.
/// Evaluated in integers so the 10% boundary is exact.
inline SparsityClass classify(const CooTensor& c) {
  // nnz * 10 < count, rearranged to avoid overflow
  const auto nnz = static_cast<Index>(c.nnz());
  return nnz <= (c.shape().element_count() - 1) / 10 ? SparsityClass::Sparse : SparsityClass::General;
}

}  // namespace dtensor
