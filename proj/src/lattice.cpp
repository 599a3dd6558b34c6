#include "fbslab/lattice.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace fbslab {

namespace {

// FFTW's planner is not thread-safe; execution on fresh arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(n ? fftw_alloc_real(n) : nullptr), size(n) {}
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  double* ptr;
  std::size_t size;
};

struct FftwComplexBuffer {
  explicit FftwComplexBuffer(std::size_t n) : ptr(n ? fftw_alloc_complex(n) : nullptr), size(n) {}
  ~FftwComplexBuffer() { fftw_free(ptr); }
  FftwComplexBuffer(const FftwComplexBuffer&) = delete;
  FftwComplexBuffer& operator=(const FftwComplexBuffer&) = delete;
  fftw_complex* ptr;
  std::size_t size;
};

class Plan {
 public:
  Plan() = default;
  explicit Plan(fftw_plan p) : plan_(p) {}
  ~Plan() {
    if (plan_) {
      std::lock_guard<std::mutex> lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
  }
  Plan(Plan&& o) noexcept : plan_(o.plan_) { o.plan_ = nullptr; }
  Plan& operator=(Plan&& o) noexcept {
    std::swap(plan_, o.plan_);
    return *this;
  }
  fftw_plan get() const { return plan_; }

 private:
  fftw_plan plan_ = nullptr;
};

// Smallest 2^a 3^b 5^c 7^d >= n.
std::size_t good_fft_size(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p7 = 1; p7 < best; p7 *= 7)
    for (std::size_t p5 = p7; p5 < best; p5 *= 5)
      for (std::size_t p3 = p5; p3 < best; p3 *= 3) {
        std::size_t v = p3;
        while (v < n) v <<= 1;
        best = std::min(best, v);
      }
  return best;
}

void require_cover(const Box& in, const Box& needed, const char* what) {
  if (!in.contains(needed)) {
    std::ostringstream os;
    os << what << ": input region " << in.to_string() << " does not cover " << needed.to_string();
    throw std::invalid_argument(os.str());
  }
}

constexpr std::size_t kFftMinTaps = 48;
constexpr std::size_t kFftMinLine = 128;
constexpr std::size_t kFftMinNdTaps = 64;

}  // namespace

Box::Box(MultiIndex lo_, MultiIndex hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size()) throw std::invalid_argument("Box: lo/hi dimension mismatch");
}

Box Box::cube(std::size_t dim, Index l, Index h) { return Box(MultiIndex(dim, l), MultiIndex(dim, h)); }

std::size_t Box::volume() const {
  std::size_t v = 1;
  for (std::size_t q = 0; q < dim(); ++q) v *= static_cast<std::size_t>(extent(q));
  return v;
}

bool Box::contains(std::span<const Index> idx) const {
  for (std::size_t q = 0; q < dim(); ++q)
    if (idx[q] < lo[q] || idx[q] > hi[q]) return false;
  return true;
}

bool Box::contains(const Box& other) const {
  if (other.empty()) return true;
  for (std::size_t q = 0; q < dim(); ++q)
    if (other.lo[q] < lo[q] || other.hi[q] > hi[q]) return false;
  return true;
}

Box Box::intersect(const Box& other) const {
  Box r = *this;
  for (std::size_t q = 0; q < dim(); ++q) {
    r.lo[q] = std::max(lo[q], other.lo[q]);
    r.hi[q] = std::min(hi[q], other.hi[q]);
  }
  return r;
}

Box Box::minkowski_sum(const Box& other) const {
  Box r = *this;
  for (std::size_t q = 0; q < dim(); ++q) {
    r.lo[q] += other.lo[q];
    r.hi[q] += other.hi[q];
  }
  return r;
}

Box Box::reflected() const {
  Box r = *this;
  for (std::size_t q = 0; q < dim(); ++q) {
    r.lo[q] = -hi[q];
    r.hi[q] = -lo[q];
  }
  return r;
}

Box Box::inflated(std::span<const Index> below, std::span<const Index> above) const {
  Box r = *this;
  for (std::size_t q = 0; q < dim(); ++q) {
    r.lo[q] -= below[q];
    r.hi[q] += above[q];
  }
  return r;
}

std::string Box::to_string() const {
  std::ostringstream os;
  for (std::size_t q = 0; q < dim(); ++q) {
    if (q) os << "x";
    os << "[" << lo[q] << "," << hi[q] << "]";
  }
  return os.str();
}

Field::Field(Box box, double fill) : box_(std::move(box)), strides_(box_.dim()), values_(box_.volume(), fill) {
  std::size_t s = 1;
  for (std::size_t q = box_.dim(); q > 0; --q) {
    strides_[q - 1] = s;
    s *= static_cast<std::size_t>(box_.extent(q - 1));
  }
}

std::size_t Field::offset(std::span<const Index> idx) const {
  std::size_t off = 0;
  for (std::size_t q = 0; q < box_.dim(); ++q) off += static_cast<std::size_t>(idx[q] - box_.lo[q]) * strides_[q];
  return off;
}

double Field::at_or_zero(std::span<const Index> idx) const {
  return box_.contains(idx) ? values_[offset(idx)] : 0.0;
}

void unflatten(const Box& box, std::size_t flat, std::span<Index> out) {
  for (std::size_t q = box.dim(); q > 0; --q) {
    const auto ext = static_cast<std::size_t>(box.extent(q - 1));
    out[q - 1] = box.lo[q - 1] + static_cast<Index>(flat % ext);
    flat /= ext;
  }
}

Index scaled_index(Index n, double t) {
  return static_cast<Index>(std::floor(static_cast<double>(n) * t + 1e-9));
}

Field convolve_axis(const Field& in, std::size_t axis, std::span<const double> coeff, Index coeff_lo,
                    const Box& out_box, ConvolutionMethod method) {
  const std::size_t d = in.dim();
  if (axis >= d || out_box.dim() != d) throw std::invalid_argument("convolve_axis: dimension mismatch");
  Field out(out_box);
  if (out_box.empty() || coeff.empty()) return out;

  const auto taps = static_cast<Index>(coeff.size());
  const Index coeff_hi = coeff_lo + taps - 1;
  Box needed = out_box;
  needed.lo[axis] = out_box.lo[axis] - coeff_hi;
  needed.hi[axis] = out_box.hi[axis] - coeff_lo;
  require_cover(in.box(), needed, "convolve_axis");

  const Index out_ext = out_box.extent(axis);
  const Index seg_len = out_ext + taps - 1;
  const std::size_t lines = out_box.volume() / static_cast<std::size_t>(out_ext);
  Box line_box = out_box;
  line_box.lo[axis] = line_box.hi[axis] = 0;

  const std::size_t in_stride = in.stride(axis);
  const std::size_t out_stride = out.stride(axis);
  const double* src = in.values().data();
  double* dst = out.values().data();

  auto line_offsets = [&](std::size_t line, std::size_t& in_off, std::size_t& out_off) {
    MultiIndex idx(d);
    unflatten(line_box, line, idx);
    idx[axis] = out_box.lo[axis];
    out_off = out.offset(idx);
    idx[axis] = needed.lo[axis];
    in_off = in.offset(idx);
  };

  bool use_fft = method == ConvolutionMethod::Fft;
  if (method == ConvolutionMethod::Auto)
    use_fft = coeff.size() >= kFftMinTaps && static_cast<std::size_t>(out_ext) >= kFftMinLine;

  if (!use_fft) {
    const auto n_lines = static_cast<std::int64_t>(lines);
#pragma omp parallel for schedule(static)
    for (std::int64_t line = 0; line < n_lines; ++line) {
      std::size_t in_off = 0, out_off = 0;
      line_offsets(static_cast<std::size_t>(line), in_off, out_off);
      // segment position p holds in(needed.lo + p); out(out.lo + r) uses p = r + coeff_hi - k.
      for (Index r = 0; r < out_ext; ++r) {
        double acc = 0.0;
        for (Index k = 0; k < taps; ++k)
          acc += coeff[static_cast<std::size_t>(k)] *
                 src[in_off + static_cast<std::size_t>(r + taps - 1 - k) * in_stride];
        dst[out_off + static_cast<std::size_t>(r) * out_stride] = acc;
      }
    }
    return out;
  }

  const std::size_t n = good_fft_size(static_cast<std::size_t>(seg_len));
  const std::size_t nc = n / 2 + 1;
  FftwBuffer kernel_real(n);
  FftwComplexBuffer kernel_hat(nc);
  Plan forward, backward;
  {
    FftwBuffer probe_r(n);
    FftwComplexBuffer probe_c(nc);
    std::lock_guard<std::mutex> lock(planner_mutex());
    forward = Plan(fftw_plan_dft_r2c_1d(static_cast<int>(n), probe_r.ptr, probe_c.ptr, FFTW_ESTIMATE));
    backward = Plan(fftw_plan_dft_c2r_1d(static_cast<int>(n), probe_c.ptr, probe_r.ptr, FFTW_ESTIMATE));
  }
  std::fill(kernel_real.ptr, kernel_real.ptr + n, 0.0);
  std::copy(coeff.begin(), coeff.end(), kernel_real.ptr);
  fftw_execute_dft_r2c(forward.get(), kernel_real.ptr, kernel_hat.ptr);

  const auto n_lines = static_cast<std::int64_t>(lines);
#pragma omp parallel
  {
    FftwBuffer buf(n);
    FftwComplexBuffer hat(nc);
    const double scale = 1.0 / static_cast<double>(n);
#pragma omp for schedule(static)
    for (std::int64_t line = 0; line < n_lines; ++line) {
      std::size_t in_off = 0, out_off = 0;
      line_offsets(static_cast<std::size_t>(line), in_off, out_off);
      for (Index p = 0; p < seg_len; ++p) buf.ptr[p] = src[in_off + static_cast<std::size_t>(p) * in_stride];
      std::fill(buf.ptr + seg_len, buf.ptr + n, 0.0);
      fftw_execute_dft_r2c(forward.get(), buf.ptr, hat.ptr);
      for (std::size_t k = 0; k < nc; ++k) {
        const double ar = hat.ptr[k][0], ai = hat.ptr[k][1];
        const double br = kernel_hat.ptr[k][0], bi = kernel_hat.ptr[k][1];
        hat.ptr[k][0] = ar * br - ai * bi;
        hat.ptr[k][1] = ar * bi + ai * br;
      }
      fftw_execute_dft_c2r(backward.get(), hat.ptr, buf.ptr);
      for (Index r = 0; r < out_ext; ++r)
        dst[out_off + static_cast<std::size_t>(r) * out_stride] = buf.ptr[r + taps - 1] * scale;
    }
  }
  return out;
}

Field convolve(const Field& in, const Field& filter, const Box& out_box, ConvolutionMethod method) {
  const std::size_t d = in.dim();
  if (filter.dim() != d || out_box.dim() != d) throw std::invalid_argument("convolve: dimension mismatch");
  Field out(out_box);
  if (out_box.empty()) return out;
  const Box needed = out_box.minkowski_sum(filter.box().reflected());
  require_cover(in.box(), needed, "convolve");

  struct Tap {
    std::ptrdiff_t shift;  // flat offset of in(j - m) relative to in(j)
    double weight;
  };
  std::vector<Tap> taps;
  for_each_index(filter.box(), [&](std::span<const Index> m) {
    const double w = filter(m);
    if (w == 0.0) return;
    std::ptrdiff_t s = 0;
    for (std::size_t q = 0; q < d; ++q) s -= static_cast<std::ptrdiff_t>(m[q]) * static_cast<std::ptrdiff_t>(in.stride(q));
    taps.push_back({s, w});
  });

  bool use_fft = method == ConvolutionMethod::Fft;
  if (method == ConvolutionMethod::Auto) use_fft = taps.size() >= kFftMinNdTaps && out_box.volume() >= 4096;

  if (!use_fft) {
    const Index rows = out_box.extent(0);
    const Index row_len = static_cast<Index>(out_box.volume() / static_cast<std::size_t>(rows));
    double* dst = out.values().data();
    const double* src = in.values().data();
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
      MultiIndex idx(d);
      for (Index c = 0; c < row_len; ++c) {
        const std::size_t flat = static_cast<std::size_t>(r * row_len + c);
        unflatten(out_box, flat, idx);
        const std::size_t base = in.offset(idx);
        double acc = 0.0;
        for (const Tap& t : taps) acc += t.weight * src[static_cast<std::ptrdiff_t>(base) + t.shift];
        dst[flat] = acc;
      }
    }
    return out;
  }

  // Valid-part circular convolution on the sub-box `needed`.
  std::vector<int> dims(d);
  std::size_t total = 1;
  for (std::size_t q = 0; q < d; ++q) {
    dims[q] = static_cast<int>(good_fft_size(static_cast<std::size_t>(needed.extent(q))));
    total *= static_cast<std::size_t>(dims[q]);
  }
  const std::size_t last_c = static_cast<std::size_t>(dims[d - 1]) / 2 + 1;
  const std::size_t total_c = total / static_cast<std::size_t>(dims[d - 1]) * last_c;
  FftwBuffer a(total), b(total);
  FftwComplexBuffer ah(total_c), bh(total_c);
  Plan forward, backward;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    forward = Plan(fftw_plan_dft_r2c(static_cast<int>(d), dims.data(), a.ptr, ah.ptr, FFTW_ESTIMATE));
    backward = Plan(fftw_plan_dft_c2r(static_cast<int>(d), dims.data(), ah.ptr, a.ptr, FFTW_ESTIMATE));
  }
  std::fill(a.ptr, a.ptr + total, 0.0);
  std::fill(b.ptr, b.ptr + total, 0.0);

  std::vector<std::size_t> pad_stride(d);
  {
    std::size_t s = 1;
    for (std::size_t q = d; q > 0; --q) {
      pad_stride[q - 1] = s;
      s *= static_cast<std::size_t>(dims[q - 1]);
    }
  }
  auto pad_offset = [&](std::span<const Index> idx, const MultiIndex& origin) {
    std::size_t off = 0;
    for (std::size_t q = 0; q < d; ++q) off += static_cast<std::size_t>(idx[q] - origin[q]) * pad_stride[q];
    return off;
  };
  for_each_index(needed, [&](std::span<const Index> i) { a.ptr[pad_offset(i, needed.lo)] = in(i); });
  for_each_index(filter.box(), [&](std::span<const Index> m) { b.ptr[pad_offset(m, filter.box().lo)] = filter(m); });

  fftw_execute_dft_r2c(forward.get(), a.ptr, ah.ptr);
  fftw_execute_dft_r2c(forward.get(), b.ptr, bh.ptr);
  for (std::size_t k = 0; k < total_c; ++k) {
    const double ar = ah.ptr[k][0], ai = ah.ptr[k][1];
    const double br = bh.ptr[k][0], bi = bh.ptr[k][1];
    ah.ptr[k][0] = ar * br - ai * bi;
    ah.ptr[k][1] = ar * bi + ai * br;
  }
  fftw_execute_dft_c2r(backward.get(), ah.ptr, a.ptr);
  const double scale = 1.0 / static_cast<double>(total);
  // out(j) sits at padded position j - out.lo + (filter.hi - filter.lo).
  MultiIndex origin(d);
  for (std::size_t q = 0; q < d; ++q) origin[q] = out_box.lo[q] - (filter.box().hi[q] - filter.box().lo[q]);
  for_each_index(out_box, [&](std::span<const Index> j) { out(j) = a.ptr[pad_offset(j, origin)] * scale; });
  return out;
}

void inclusive_prefix_sums(Field& field) {
  const std::size_t d = field.dim();
  const Box& box = field.box();
  if (box.empty()) return;
  double* v = field.values().data();
  for (std::size_t axis = 0; axis < d; ++axis) {
    const Index ext = box.extent(axis);
    const std::size_t stride = field.stride(axis);
    const auto lines = static_cast<std::int64_t>(box.volume() / static_cast<std::size_t>(ext));
    Box line_box = box;
    line_box.lo[axis] = line_box.hi[axis] = box.lo[axis];
#pragma omp parallel for schedule(static)
    for (std::int64_t line = 0; line < lines; ++line) {
      MultiIndex idx(d);
      unflatten(line_box, static_cast<std::size_t>(line), idx);
      const std::size_t base = field.offset(idx);
      double acc = 0.0;
      for (Index r = 0; r < ext; ++r) {
        acc += v[base + static_cast<std::size_t>(r) * stride];
        v[base + static_cast<std::size_t>(r) * stride] = acc;
      }
    }
  }
}

}  // namespace fbslab
