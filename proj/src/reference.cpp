#include "fbslab/reference.hpp"

#include <stdexcept>

namespace fbslab::reference {

kernels::AxisWeights axis_weights(const kernels::AxisKernel& kernel, Index n) {
  kernels::AxisWeights w;
  w.n = n;
  if (n == 0) return w;
  w.lo = 1 - kernel.hi();
  const Index hi = n - kernel.lo();
  long double sq = 0.0L;
  for (Index j = w.lo; j <= hi; ++j) {
    long double b = 0.0L;
    for (Index i = 1; i <= n; ++i) b += kernel.coeff(i - j);
    w.values.push_back(static_cast<double>(b));
    sq += b * b;
  }
  w.norm_sq = static_cast<double>(sq);
  return w;
}

double weight(const kernels::ProductKernel& kernel, std::span<const Index> n, std::span<const Index> j) {
  const std::size_t d = kernel.dim();
  const Box lambda(MultiIndex(d, 1), MultiIndex(n.begin(), n.end()));
  MultiIndex diff(d);
  long double s = 0.0L;
  for_each_index(lambda, [&](std::span<const Index> i) {
    for (std::size_t q = 0; q < d; ++q) diff[q] = i[q] - j[q];
    s += kernel.coeff(diff);
  });
  return static_cast<double>(s);
}

Field linear_field(const kernels::ProductKernel& kernel, const Field& x, std::span<const Index> n) {
  const std::size_t d = kernel.dim();
  Field out(Box(MultiIndex(d, 1), MultiIndex(n.begin(), n.end())));
  MultiIndex diff(d);
  for_each_index(out.box(), [&](std::span<const Index> j) {
    long double s = 0.0L;
    for_each_index(x.box(), [&](std::span<const Index> i) {
      for (std::size_t q = 0; q < d; ++q) diff[q] = j[q] - i[q];
      s += kernel.coeff(diff) * x(i);
    });
    out(j) = static_cast<double>(s);
  });
  return out;
}

Field convolve(const Field& in, const Field& filter, const Box& out_box) {
  const std::size_t d = in.dim();
  Field out(out_box);
  MultiIndex src(d);
  for_each_index(out_box, [&](std::span<const Index> j) {
    long double s = 0.0L;
    for_each_index(filter.box(), [&](std::span<const Index> m) {
      for (std::size_t q = 0; q < d; ++q) src[q] = j[q] - m[q];
      if (!in.box().contains(src)) throw std::invalid_argument("reference::convolve: input does not cover output");
      s += filter(m) * in(src);
    });
    out(j) = static_cast<double>(s);
  });
  return out;
}

double box_sum(const Field& xi, std::span<const Index> m) {
  const std::size_t d = xi.dim();
  for (Index v : m)
    if (v <= 0) return 0.0;
  const Box b(MultiIndex(d, 1), MultiIndex(m.begin(), m.end()));
  long double s = 0.0L;
  for_each_index(b, [&](std::span<const Index> i) { s += xi(i); });
  return static_cast<double>(s);
}

double weighted_sum(const kernels::ProductKernel& kernel, std::span<const Index> m, const Field& x) {
  for (Index v : m)
    if (v <= 0) return 0.0;
  long double s = 0.0L;
  for_each_index(x.box(), [&](std::span<const Index> j) { s += weight(kernel, m, j) * x(j); });
  return static_cast<double>(s);
}

}  // namespace fbslab::reference
