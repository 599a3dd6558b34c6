#pragma once

// Serial brute-force versions of the lattice kernels. Slow by design; used as oracles in
// tests, by the equivalence check and as the baseline in the benchmark.

#include <span>
#include <vector>

#include "fbslab/kernels.hpp"
#include "fbslab/lattice.hpp"

namespace fbslab::reference {

/// b_{n,j}(q) = sum_{i=1}^{n} a_{i-j}(q) by a double loop.
kernels::AxisWeights axis_weights(const kernels::AxisKernel& kernel, Index n);

/// sum_{i in Lambda_n} a_{i-j}, summing the full product kernel over the box.
double weight(const kernels::ProductKernel& kernel, std::span<const Index> n, std::span<const Index> j);

/// xi_j = sum_{i in x.box()} a_{j-i} x_i for j in Lambda_n.
Field linear_field(const kernels::ProductKernel& kernel, const Field& x, std::span<const Index> n);

/// out(j) = sum_m filter(m) in(j - m), one site at a time.
Field convolve(const Field& in, const Field& filter, const Box& out_box);

/// sum of xi over {1..m_1} x ... x {1..m_d}.
double box_sum(const Field& xi, std::span<const Index> m);

/// sum_j b_{m,j} x_j with b from the brute-force weight().
double weighted_sum(const kernels::ProductKernel& kernel, std::span<const Index> m, const Field& x);

}  // namespace fbslab::reference
