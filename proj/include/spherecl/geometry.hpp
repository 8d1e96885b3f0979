#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>

#include "spherecl/errors.hpp"

namespace spherecl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kRowNormTol = 1e-12;

// M points on the unit sphere S^{d-1}, one per row. Construction rejects rows
// whose norm strays from 1 by more than kRowNormTol; it never renormalizes.
// Use normalize_rows to project arbitrary data onto the sphere first.
class EmbeddingBatch {
 public:
  explicit EmbeddingBatch(Matrix points);

  int size() const { return static_cast<int>(pts_.rows()); }
  int dim() const { return static_cast<int>(pts_.cols()); }
  const Matrix& points() const { return pts_; }

 private:
  Matrix pts_;
};

struct ConfigurationCheck {
  bool passed = false;
  double max_deviation = 0.0;
  std::map<std::string, double> details;
};

EmbeddingBatch normalize_rows(const Matrix& raw);

// Inner products <a_i, b_j>, clamped to [-1, 1] so downstream code can rely
// on exact endpoint values for coincident and antipodal points.
Matrix gram(const EmbeddingBatch& a, const EmbeddingBatch& b);

// Squared distances ||a_i - b_j||^2 = 2 - 2<a_i, b_j>, entries in [0, 4].
Matrix pairwise_sq_dist(const EmbeddingBatch& a, const EmbeddingBatch& b);

Vector tangent_project(const Vector& u, const Vector& g);
Vector retract(const Vector& u, const Vector& step);

// max_i ||u_i - v_i||
double alignment_gap(const EmbeddingBatch& u, const EmbeddingBatch& v);

// Certifies a centered regular (M-1)-simplex: row mean ~ 0 and every
// off-diagonal Gram entry ~ -1/(M-1). Requires 2 <= M <= d+1.
ConfigurationCheck is_regular_simplex(const EmbeddingBatch& u, double tol);

// Certifies a cross-polytope up to rotation: each row has exactly one
// Gram partner ~ -1 and all other off-diagonal entries ~ 0. Requires M even.
ConfigurationCheck is_cross_polytope(const EmbeddingBatch& u, double tol);

// Analytic optimal configurations.
EmbeddingBatch regular_simplex(int m, int d);
EmbeddingBatch cross_polytope(int d);

}  // namespace spherecl
