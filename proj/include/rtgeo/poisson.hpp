#pragma once

#include <rtgeo/calculus.hpp>

#include <Eigen/SparseLU>

#include <map>
#include <memory>
#include <mutex>

namespace rtgeo {

namespace detail {

// Sparse LU of the interior rows of -sum_a D_a D_a with Dirichlet columns
// eliminated; one factorization per chart, shared by all solves.
class DirichletFactor {
public:
  explicit DirichletFactor(const Chart &c) : chart_(c) {
    const int n = c.dim();
    std::vector<long> unknown(c.point_count(), -1);
    for (std::size_t node = 0; node < c.point_count(); ++node)
      if (!c.is_boundary(node)) {
        unknown[node] = static_cast<long>(interior_.size());
        interior_.push_back(node);
      }
    // Row of the operator at every interior node, as (node, weight) pairs.
    rows_.resize(interior_.size());
    for (std::size_t r = 0; r < interior_.size(); ++r) {
      std::map<std::size_t, double> row;
      std::size_t node = interior_[r];
      for (int a = 0; a < n; ++a)
        for (const auto &[k1, w1] : first_difference_row(node, a))
          for (const auto &[k2, w2] : first_difference_row(k1, a))
            row[k2] -= w1 * w2;
      rows_[r].assign(row.begin(), row.end());
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t r = 0; r < interior_.size(); ++r)
      for (const auto &[k, w] : rows_[r])
        if (unknown[k] >= 0 && w != 0.0)
          trip.emplace_back(static_cast<int>(r), static_cast<int>(unknown[k]), w);
    const int m = static_cast<int>(interior_.size());
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    A_ = A;
    lu_.analyzePattern(A_);
    lu_.factorize(A_);
    if (lu_.info() != Eigen::Success)
      throw ConvergenceError("poisson_solve: factorization failed", {});
    unknown_ = std::move(unknown);
  }

  const std::vector<std::size_t> &interior() const { return interior_; }
  const std::vector<std::vector<std::pair<std::size_t, double>>> &rows() const { return rows_; }
  const std::vector<long> &unknown() const { return unknown_; }
  const Eigen::SparseMatrix<double> &matrix() const { return A_; }
  Eigen::VectorXd solve(const Eigen::VectorXd &b) const { return lu_.solve(b); }

private:
  // Weights of the first difference along axis a at `node` (same stencil as partial()).
  std::vector<std::pair<std::size_t, double>> first_difference_row(std::size_t node, int a) const {
    const int m = chart_.resolution(a);
    const double h = chart_.spacing(a);
    const std::size_t s = chart_.stride(a);
    int i = chart_.axis_index(node, a);
    if (i == 0)
      return {{node, -3.0 / (2 * h)}, {node + s, 4.0 / (2 * h)}, {node + 2 * s, -1.0 / (2 * h)}};
    if (i == m - 1)
      return {{node, 3.0 / (2 * h)}, {node - s, -4.0 / (2 * h)}, {node - 2 * s, 1.0 / (2 * h)}};
    return {{node + s, 1.0 / (2 * h)}, {node - s, -1.0 / (2 * h)}};
  }

  Chart chart_;
  std::vector<std::size_t> interior_;
  std::vector<long> unknown_;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows_;
  Eigen::SparseMatrix<double> A_;
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

inline std::shared_ptr<const DirichletFactor> dirichlet_factor(const Chart &c) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const DirichletFactor>> cache;
  std::ostringstream key;
  key.precision(17);
  for (int a = 0; a < c.dim(); ++a)
    key << c.bounds()[a].lo << ',' << c.bounds()[a].hi << ',' << c.resolution(a) << ';';
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key.str());
  if (it != cache.end())
    return it->second;
  if (cache.size() > 32)
    cache.clear();
  auto f = std::make_shared<const DirichletFactor>(c);
  cache.emplace(key.str(), f);
  return f;
}

} // namespace detail

/// Solves laplacian(u) = source on interior nodes, componentwise, with
/// Dirichlet data taken from the boundary nodes of `boundary`.
///
/// The operator is the composition used by laplacian(), so the computed u
/// reproduces the source exactly up to the linear solve. The normwise
/// relative residual is verified; above 1e-10 a ConvergenceError carries it.
inline GridField poisson_solve(const GridField &source, const GridField &boundary) {
  source.require_same(boundary);
  const Chart &c = source.chart();
  for (int a = 0; a < c.dim(); ++a)
    if (c.resolution(a) < 5)
      throw ResolutionError("poisson_solve: need at least 5 nodes per axis");
  auto F = detail::dirichlet_factor(c);
  const auto &interior = F->interior();
  const auto &unknown = F->unknown();
  const int nc = source.components();
  const int m = static_cast<int>(interior.size());
  GridField u(c, source.shape());
  for (std::size_t node = 0; node < c.point_count(); ++node)
    if (c.is_boundary(node))
      for (int q = 0; q < nc; ++q)
        u.at(node, q) = boundary.at(node, q);
  double worst = 0.0;
  Eigen::VectorXd b(m), x(m);
  for (int q = 0; q < nc; ++q) {
    double fmax = 0.0;
    for (int r = 0; r < m; ++r) {
      double rhs = source.at(interior[r], q);
      fmax = std::max(fmax, std::abs(rhs));
      for (const auto &[k, w] : F->rows()[r])
        if (unknown[k] < 0)
          rhs -= w * u.at(k, q);
      b[r] = rhs;
    }
    x = F->solve(b);
    for (int r = 0; r < m; ++r)
      u.at(interior[r], q) = x[r];
    // normwise backward error |r| / (|b| + |A| |x|)
    double res = (F->matrix() * x - b).lpNorm<Eigen::Infinity>();
    double scale = b.lpNorm<Eigen::Infinity>() +
                   x.lpNorm<Eigen::Infinity>() * 4.0 * c.dim() / std::pow(c.max_spacing(), 2);
    (void)fmax;
    if (scale > 0.0)
      worst = std::max(worst, res / scale);
  }
  if (worst > 1e-10)
    throw ConvergenceError("poisson_solve: relative residual " + std::to_string(worst) +
                               " above 1e-10",
                           {worst});
  return u;
}

/// Zero Dirichlet data shaped like f.
inline GridField zero_like(const GridField &f) { return GridField(f.chart(), f.shape()); }

} // namespace rtgeo
