#include "fbslab/fbs_oracle.hpp"

#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "fbslab/errors.hpp"
#include "fbslab/rng.hpp"

namespace fbslab::fbs {

namespace {

void check_hurst(double h) {
  if (!(h > 0.0 && h < 1.0)) throw std::domain_error("Hurst index must lie in (0,1), got " + std::to_string(h));
}

double pow2h(double x, double h) { return x == 0.0 ? 0.0 : std::pow(x, 2.0 * h); }

}  // namespace

double fbm_covariance(double h, double s, double t) {
  return 0.5 * (pow2h(s, h) + pow2h(t, h) - pow2h(std::abs(s - t), h));
}

double fbs_covariance(std::span<const double> hurst, std::span<const double> s, std::span<const double> t) {
  if (s.size() != hurst.size() || t.size() != hurst.size()) throw std::invalid_argument("fbs_covariance: dimension mismatch");
  double c = 1.0;
  for (std::size_t q = 0; q < hurst.size(); ++q) {
    check_hurst(hurst[q]);
    c *= fbm_covariance(hurst[q], s[q], t[q]);
  }
  return c;
}

void FbsGrid::validate() const {
  if (axes.empty() || hurst.size() != axes.size()) throw std::invalid_argument("FbsGrid: need one Hurst index per axis");
  for (double h : hurst) check_hurst(h);
  for (const auto& ax : axes) {
    if (ax.empty()) throw std::invalid_argument("FbsGrid: empty axis");
    for (std::size_t i = 0; i < ax.size(); ++i) {
      if (!(ax[i] >= 0.0 && ax[i] <= 1.0)) throw std::invalid_argument("FbsGrid: coordinates must lie in [0,1]");
      for (std::size_t k = 0; k < i; ++k)
        if (ax[k] == ax[i]) throw std::invalid_argument("FbsGrid: grid points must be distinct");
    }
  }
}

std::size_t FbsGrid::size() const {
  std::size_t n = 1;
  for (const auto& ax : axes) n *= ax.size();
  return n;
}

std::vector<std::vector<double>> FbsGrid::points() const {
  std::vector<std::vector<double>> pts;
  const std::size_t d = dim();
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t flat = 0; flat < size(); ++flat) {
    std::size_t rem = flat;
    for (std::size_t q = d; q-- > 0;) {
      idx[q] = rem % axes[q].size();
      rem /= axes[q].size();
    }
    std::vector<double> p(d);
    for (std::size_t q = 0; q < d; ++q) p[q] = axes[q][idx[q]];
    pts.push_back(std::move(p));
  }
  return pts;
}

Eigen::MatrixXd axis_covariance(double h, std::span<const double> coords) {
  check_hurst(h);
  const auto n = static_cast<Eigen::Index>(coords.size());
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      c(i, j) = fbm_covariance(h, coords[static_cast<std::size_t>(i)], coords[static_cast<std::size_t>(j)]);
  return c;
}

Eigen::MatrixXd dense_covariance(const FbsGrid& grid) {
  grid.validate();
  const auto pts = grid.points();
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      c(i, j) = fbs_covariance(grid.hurst, pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)]);
  return c;
}

Eigen::MatrixXd kronecker_covariance(const FbsGrid& grid) {
  grid.validate();
  Eigen::MatrixXd k = Eigen::MatrixXd::Ones(1, 1);
  for (std::size_t q = 0; q < grid.dim(); ++q) {
    const Eigen::MatrixXd c = axis_covariance(grid.hurst[q], grid.axes[q]);
    Eigen::MatrixXd next(k.rows() * c.rows(), k.cols() * c.cols());
    for (Eigen::Index i = 0; i < k.rows(); ++i)
      for (Eigen::Index j = 0; j < k.cols(); ++j)
        next.block(i * c.rows(), j * c.cols(), c.rows(), c.cols()) = k(i, j) * c;
    k = std::move(next);
  }
  return k;
}

CholeskyResult cholesky_with_jitter(const Eigen::MatrixXd& c) {
  CholeskyResult r;
  if (c.rows() == 0) return r;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = eig.eigenvalues().minCoeff();
  const double trace = c.trace();
  auto diagnostics = [&] {
    char buf[160];
    std::snprintf(buf, sizeof buf, "size %ld, trace %.6g, smallest eigenvalue %.6g", static_cast<long>(c.rows()), trace,
                  r.min_eigenvalue);
    return std::string(buf);
  };
  if (r.min_eigenvalue < -1e-10) throw NumericError("covariance is not positive semidefinite: " + diagnostics());
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() == Eigen::Success) {
    r.factor = llt.matrixL();
    return r;
  }
  Eigen::MatrixXd jittered = c;
  jittered.diagonal().array() += 1e-12 * trace / static_cast<double>(c.rows());
  llt.compute(jittered);
  if (llt.info() != Eigen::Success) throw NumericError("Cholesky failed after jitter: " + diagnostics());
  r.factor = llt.matrixL();
  r.jittered = true;
  return r;
}

KroneckerSampler::KroneckerSampler(FbsGrid grid) : grid_(std::move(grid)) {
  grid_.validate();
  for (std::size_t q = 0; q < grid_.dim(); ++q) {
    AxisFactor f;
    f.coords = grid_.axes[q];
    std::vector<double> pos;
    for (std::size_t i = 0; i < f.coords.size(); ++i)
      if (f.coords[i] > 0.0) {
        f.positive.push_back(i);
        pos.push_back(f.coords[i]);
      }
    f.covariance = axis_covariance(grid_.hurst[q], pos);
    f.cholesky = cholesky_with_jitter(f.covariance);
    factors_.push_back(std::move(f));
  }
}

std::vector<double> KroneckerSampler::sample_one(std::uint64_t sample_seed) const {
  const std::size_t d = grid_.dim();
  std::vector<std::size_t> ext(d);
  std::size_t total = 1;
  for (std::size_t q = 0; q < d; ++q) {
    ext[q] = factors_[q].positive.size();
    total *= ext[q];
  }
  std::vector<double> out(grid_.size(), 0.0);
  if (total == 0) return out;
  Engine engine(sample_seed);
  boost::random::normal_distribution<double> normal;
  std::vector<double> z(total);
  for (double& v : z) v = normal(engine);

  // Mode-q product with L_q: view z as (outer, ext[q], inner).
  std::vector<double> y(total);
  for (std::size_t q = 0; q < d; ++q) {
    std::size_t outer = 1, inner = 1;
    for (std::size_t p = 0; p < q; ++p) outer *= ext[p];
    for (std::size_t p = q + 1; p < d; ++p) inner *= ext[p];
    const auto& l = factors_[q].cholesky.factor;
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t a = 0; a < ext[q]; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
          const double lab = l(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
          const double* src = &z[(o * ext[q] + b) * inner];
          double* dst = &y[(o * ext[q] + a) * inner];
          for (std::size_t i = 0; i < inner; ++i) dst[i] += lab * src[i];
        }
    z.swap(y);
  }

  // Reinsert at full-grid positions.
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (std::size_t q = d; q-- > 0;) {
      idx[q] = rem % ext[q];
      rem /= ext[q];
    }
    std::size_t full = 0;
    for (std::size_t q = 0; q < d; ++q) full = full * grid_.axes[q].size() + factors_[q].positive[idx[q]];
    out[full] = z[flat];
  }
  return out;
}

std::vector<double> KroneckerSampler::sample(std::int64_t count, std::uint64_t seed) const {
  const std::size_t p = grid_.size();
  std::vector<double> out(static_cast<std::size_t>(count) * p);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto v = sample_one(derive_seed(seed, streams::kOracle, static_cast<std::uint64_t>(i)));
    std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * p));
  }
  return out;
}

DenseSampler::DenseSampler(FbsGrid grid) : grid_(std::move(grid)) {
  cov_ = dense_covariance(grid_);
  const auto pts = grid_.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool zero = false;
    for (double c : pts[i]) zero = zero || c == 0.0;
    if (!zero) positive_.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(positive_.size());
  Eigen::MatrixXd sub(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      sub(i, j) = cov_(static_cast<Eigen::Index>(positive_[static_cast<std::size_t>(i)]),
                       static_cast<Eigen::Index>(positive_[static_cast<std::size_t>(j)]));
  chol_ = cholesky_with_jitter(sub);
}

std::vector<double> DenseSampler::sample(std::int64_t count, std::uint64_t seed) const {
  const std::size_t p = grid_.size();
  const auto m = static_cast<Eigen::Index>(positive_.size());
  std::vector<double> out(static_cast<std::size_t>(count) * p, 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    Engine engine(derive_seed(seed, streams::kOracleDense, static_cast<std::uint64_t>(i)));
    boost::random::normal_distribution<double> normal;
    Eigen::VectorXd z(m);
    for (Eigen::Index k = 0; k < m; ++k) z(k) = normal(engine);
    const Eigen::VectorXd y = chol_.factor * z;
    for (Eigen::Index k = 0; k < m; ++k)
      out[static_cast<std::size_t>(i) * p + positive_[static_cast<std::size_t>(k)]] = y(k);
  }
  return out;
}

void write_covariance_csv(const std::filesystem::path& path, const Eigen::MatrixXd& c,
                          const std::vector<std::vector<double>>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto label = [&](std::size_t i) {
    std::string s = "t=(";
    for (std::size_t q = 0; q < points[i].size(); ++q) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%.6g", q ? ";" : "", points[i][q]);
      s += buf;
    }
    return s + ")";
  };
  out << "point";
  for (std::size_t j = 0; j < points.size(); ++j) out << "," << label(j);
  out << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    out << label(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", c(i, j));
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace fbslab::fbs
