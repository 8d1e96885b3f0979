#include "spherecl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace spherecl {

EmbeddingBatch::EmbeddingBatch(Matrix points) : pts_(std::move(points)) {
  if (pts_.rows() < 1 || pts_.cols() < 1) {
    throw ArityError("embedding batch needs at least one row and one column");
  }
  for (Eigen::Index i = 0; i < pts_.rows(); ++i) {
    const double norm = pts_.row(i).norm();
    if (std::abs(norm - 1.0) > kRowNormTol) {
      throw NormViolation("row " + std::to_string(i) + " has norm " +
                          std::to_string(norm) + ", expected 1 within 1e-12");
    }
  }
}

EmbeddingBatch normalize_rows(const Matrix& raw) {
  Matrix out = raw;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm < 1e-300) {
      throw ZeroRowError("row " + std::to_string(i) + " has vanishing norm");
    }
    out.row(i) /= norm;
  }
  return EmbeddingBatch(std::move(out));
}

Matrix gram(const EmbeddingBatch& a, const EmbeddingBatch& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("gram: ambient dimensions differ (" +
                            std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()) + ")");
  }
  Matrix g = a.points() * b.points().transpose();
  return g.cwiseMax(-1.0).cwiseMin(1.0);
}

Matrix pairwise_sq_dist(const EmbeddingBatch& a, const EmbeddingBatch& b) {
  return 2.0 * (Matrix::Ones(a.size(), b.size()) - gram(a, b));
}

Vector tangent_project(const Vector& u, const Vector& g) {
  return g - g.dot(u) * u;
}

Vector retract(const Vector& u, const Vector& step) {
  Vector moved = u + step;
  const double norm = moved.norm();
  if (norm < 1e-12) {
    throw DegenerateStep("retraction target has norm " + std::to_string(norm));
  }
  return moved / norm;
}

double alignment_gap(const EmbeddingBatch& u, const EmbeddingBatch& v) {
  if (u.size() != v.size() || u.dim() != v.dim()) {
    throw DimensionMismatch("alignment_gap: batch shapes differ");
  }
  return (u.points() - v.points()).rowwise().norm().maxCoeff();
}

ConfigurationCheck is_regular_simplex(const EmbeddingBatch& u, double tol) {
  const int m = u.size();
  const int d = u.dim();
  if (m < 2 || m > d + 1) {
    throw ArityError("regular simplex check needs 2 <= M <= d+1, got M=" +
                     std::to_string(m) + ", d=" + std::to_string(d));
  }
  const double mean_residual = u.points().colwise().mean().norm();
  const Matrix g = gram(u, u);
  const double target = -1.0 / (m - 1);
  double gram_residual = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      gram_residual = std::max(gram_residual, std::abs(g(i, j) - target));
    }
  }
  ConfigurationCheck check;
  check.details["zero_mean_residual"] = mean_residual;
  check.details["gram_residual"] = gram_residual;
  check.max_deviation = std::max(mean_residual, gram_residual);
  check.passed = check.max_deviation <= tol;
  return check;
}

ConfigurationCheck is_cross_polytope(const EmbeddingBatch& u, double tol) {
  const int m = u.size();
  if (m % 2 != 0) {
    throw ArityError("cross-polytope check needs even M, got " +
                     std::to_string(m));
  }
  const Matrix g = gram(u, u);
  double partner_residual = 0.0;
  double orthogonal_residual = 0.0;
  for (int i = 0; i < m; ++i) {
    // The row's antipode is whichever partner sits closest to Gram = -1;
    // every other off-diagonal entry must vanish.
    int partner = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      const double dev = std::abs(g(i, j) + 1.0);
      if (dev < best) {
        best = dev;
        partner = j;
      }
    }
    partner_residual = std::max(partner_residual, best);
    for (int j = 0; j < m; ++j) {
      if (j == i || j == partner) continue;
      orthogonal_residual = std::max(orthogonal_residual, std::abs(g(i, j)));
    }
  }
  ConfigurationCheck check;
  check.details["partner_residual"] = partner_residual;
  check.details["orthogonal_residual"] = orthogonal_residual;
  check.max_deviation = std::max(partner_residual, orthogonal_residual);
  check.passed = check.max_deviation <= tol;
  return check;
}

EmbeddingBatch regular_simplex(int m, int d) {
  if (m < 2 || m > d + 1) {
    throw ArityError("regular simplex needs 2 <= M <= d+1, got M=" +
                     std::to_string(m) + ", d=" + std::to_string(d));
  }
  // Center the rows of I_m and normalize: pairwise inner products become
  // -1/(m-1). The rows live in the hyperplane orthogonal to the all-ones
  // direction, so a Householder reflection taking that direction to e_1
  // frees the first coordinate and the configuration fits into m-1 columns.
  Matrix centered =
      Matrix::Identity(m, m) - Matrix::Constant(m, m, 1.0 / m);
  centered /= std::sqrt(1.0 - 1.0 / m);
  Vector w = Vector::Constant(m, 1.0 / std::sqrt(double(m)));
  w(0) -= 1.0;
  w /= w.norm();
  Matrix reflected = centered - 2.0 * (centered * w) * w.transpose();
  Matrix out = Matrix::Zero(m, d);
  out.block(0, 0, m, m - 1) = reflected.rightCols(m - 1);
  return normalize_rows(out);
}

EmbeddingBatch cross_polytope(int d) {
  if (d < 1) {
    throw ArityError("cross-polytope needs d >= 1");
  }
  Matrix out = Matrix::Zero(2 * d, d);
  for (int i = 0; i < d; ++i) {
    out(2 * i, i) = 1.0;
    out(2 * i + 1, i) = -1.0;
  }
  return EmbeddingBatch(std::move(out));
}

}  // namespace spherecl
