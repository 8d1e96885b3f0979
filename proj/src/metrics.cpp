#include "spherecl/metrics.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace spherecl {

double metric_alignment(const EmbeddingBatch& u, const EmbeddingBatch& v) {
  if (u.size() != v.size() || u.dim() != v.dim()) {
    throw DimensionMismatch("metric_alignment: batch shapes differ");
  }
  return (u.points() - v.points()).rowwise().squaredNorm().mean();
}

double metric_uniformity(const EmbeddingBatch& u, double t) {
  if (u.size() < 2) {
    throw ArityError("metric_uniformity needs M >= 2");
  }
  if (!(t > 0.0)) {
    throw SpecError("metric_uniformity needs t > 0");
  }
  const Matrix sq = pairwise_sq_dist(u, u);
  const int m = u.size();
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i != j) total += std::exp(-t * sq(i, j));
    }
  }
  return std::log(total / (static_cast<double>(m) * (m - 1)));
}

double wasserstein_distance_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) {
    throw ArityError("wasserstein_distance_1d needs non-empty samples");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> merged;
  merged.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(),
             std::back_inserter(merged));
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double distance = 0.0;
  for (std::size_t k = 0; k + 1 < merged.size(); ++k) {
    const double gap = merged[k + 1] - merged[k];
    if (gap <= 0.0) continue;
    const double fa =
        static_cast<double>(std::upper_bound(a.begin(), a.end(), merged[k]) -
                            a.begin()) /
        na;
    const double fb =
        static_cast<double>(std::upper_bound(b.begin(), b.end(), merged[k]) -
                            b.begin()) /
        nb;
    distance += std::abs(fa - fb) * gap;
  }
  return distance;
}

std::vector<double> sample_similarity_reference(int d, int n,
                                                std::mt19937_64& rng) {
  if (d < 2) {
    throw SpecError("similarity reference law needs d >= 2");
  }
  if (n < 1) {
    throw ArityError("need at least one reference sample");
  }
  const double alpha = (d - 1) / 2.0;
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) {
    const double g1 = gamma(rng);
    const double g2 = gamma(rng);
    const double beta = g1 / (g1 + g2);
    out[k] = 2.0 * beta - 1.0;
  }
  return out;
}

double metric_wasserstein_similarity(const EmbeddingBatch& u, int n_ref,
                                     std::mt19937_64& rng) {
  if (u.size() < 2) {
    throw ArityError("metric_wasserstein_similarity needs M >= 2");
  }
  if (n_ref < 1000) {
    throw ArityError("metric_wasserstein_similarity needs n_ref >= 1000");
  }
  const Matrix g = gram(u, u);
  std::vector<double> inner;
  inner.reserve(static_cast<std::size_t>(u.size()) * (u.size() - 1));
  for (int i = 0; i < u.size(); ++i) {
    for (int j = 0; j < u.size(); ++j) {
      if (i != j) inner.push_back(g(i, j));
    }
  }
  return wasserstein_distance_1d(
      std::move(inner), sample_similarity_reference(u.dim(), n_ref, rng));
}

namespace {

Vector singular_values(const EmbeddingBatch& u) {
  Eigen::BDCSVD<Matrix> svd(u.points());
  return svd.singularValues();
}

}  // namespace

int metric_rank(const EmbeddingBatch& u) {
  const Vector sigma = singular_values(u);
  return static_cast<int>((sigma.array() > 1e-5).count());
}

double metric_effective_rank(const EmbeddingBatch& u) {
  const Vector sigma = singular_values(u);
  const double total = sigma.cwiseAbs().sum();
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    const double share = sigma(i) / total + 1e-7;
    entropy -= share * std::log(share);
  }
  return entropy;
}

MetricsReport compute_metrics(const EmbeddingBatch& u, const EmbeddingBatch& v,
                              double t, int n_ref, long long seed) {
  MetricsReport report;
  report.alignment = metric_alignment(u, v);
  report.uniformity = metric_uniformity(u, t);
  std::mt19937_64 rng(static_cast<unsigned long long>(seed));
  report.wasserstein = metric_wasserstein_similarity(u, n_ref, rng);
  report.rank = metric_rank(u);
  report.effective_rank = metric_effective_rank(u);
  report.t = t;
  report.n_ref = n_ref;
  report.seed = seed;
  return report;
}

}  // namespace spherecl
