#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fbslab {

using Index = std::int64_t;
using MultiIndex = std::vector<Index>;

/// Axis-aligned box of lattice sites, inclusive on both ends. Signed indices
/// are first-class: weight tables of two-sided and causal kernels live below 1.
struct Box {
  MultiIndex lo;
  MultiIndex hi;

  Box() = default;
  Box(MultiIndex lo_, MultiIndex hi_);
  static Box cube(std::size_t dim, Index lo, Index hi);

  std::size_t dim() const { return lo.size(); }
  Index extent(std::size_t q) const { return hi[q] >= lo[q] ? hi[q] - lo[q] + 1 : 0; }
  std::size_t volume() const;
  bool empty() const { return volume() == 0; }
  bool contains(std::span<const Index> idx) const;
  bool contains(const Box& other) const;

  Box intersect(const Box& other) const;
  /// {a + b : a in this, b in other}.
  Box minkowski_sum(const Box& other) const;
  /// {-a : a in this}.
  Box reflected() const;
  Box inflated(std::span<const Index> below, std::span<const Index> above) const;

  std::string to_string() const;
  bool operator==(const Box&) const = default;
};

/// Dense real array over a Box, row-major (last axis fastest).
class Field {
 public:
  Field() = default;
  explicit Field(Box box, double fill = 0.0);

  const Box& box() const { return box_; }
  std::size_t dim() const { return box_.dim(); }
  std::size_t size() const { return values_.size(); }
  std::size_t stride(std::size_t q) const { return strides_[q]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::size_t offset(std::span<const Index> idx) const;
  double& operator()(std::span<const Index> idx) { return values_[offset(idx)]; }
  double operator()(std::span<const Index> idx) const { return values_[offset(idx)]; }
  double at_or_zero(std::span<const Index> idx) const;

 private:
  Box box_;
  std::vector<std::size_t> strides_;
  std::vector<double> values_;
};

/// Multi-index of the flat row-major position `flat` inside `box`.
void unflatten(const Box& box, std::size_t flat, std::span<Index> out);

/// Calls f(multi_index) for every site of the box in row-major order.
template <class F>
void for_each_index(const Box& box, F&& f) {
  const std::size_t d = box.dim();
  if (box.empty()) return;
  MultiIndex idx = box.lo;
  while (true) {
    f(std::span<const Index>(idx));
    std::size_t q = d;
    while (q > 0) {
      --q;
      if (++idx[q] <= box.hi[q]) break;
      idx[q] = box.lo[q];
      if (q == 0) return;
    }
    if (d == 0) return;
  }
}

enum class ConvolutionMethod { Auto, Direct, Fft };

/// One-axis convolution: out(j) = sum_k coeff[k - coeff_lo] * in(j - k e_axis)
/// for every j in out_box. `in` must cover every site touched.
Field convolve_axis(const Field& in, std::size_t axis, std::span<const double> coeff, Index coeff_lo,
                    const Box& out_box, ConvolutionMethod method = ConvolutionMethod::Auto);

/// d-dimensional convolution with a finite filter: out(j) = sum_m filter(m) * in(j - m).
Field convolve(const Field& in, const Field& filter, const Box& out_box,
               ConvolutionMethod method = ConvolutionMethod::Auto);

/// In-place inclusive cumulative sums along every axis (d-dimensional prefix sums).
void inclusive_prefix_sums(Field& field);

/// floor(n * t) for grid coordinates written as decimals (absorbs 1e-9 representation error).
Index scaled_index(Index n, double t);

}  // namespace fbslab
