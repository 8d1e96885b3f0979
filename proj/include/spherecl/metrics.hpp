#pragma once

#include <random>
#include <vector>

#include "spherecl/geometry.hpp"

namespace spherecl {

// (1/M) sum_i ||u_i - v_i||^2
double metric_alignment(const EmbeddingBatch& u, const EmbeddingBatch& v);

// log of the mean pairwise Gaussian potential e^{-t ||u_i - u_j||^2} over
// ordered pairs i != j.
double metric_uniformity(const EmbeddingBatch& u, double t);

// Exact 1-Wasserstein distance between two empirical distributions on the
// line: the integral of |F_a - F_b| over the merged support.
double wasserstein_distance_1d(std::vector<double> a, std::vector<double> b);

// n samples of the inner product between independent uniform points on
// S^{d-1}: s = 2B - 1 with B ~ Beta((d-1)/2, (d-1)/2).
std::vector<double> sample_similarity_reference(int d, int n,
                                                std::mt19937_64& rng);

// W_1 between the off-diagonal inner products of U and n_ref reference draws.
double metric_wasserstein_similarity(const EmbeddingBatch& u, int n_ref,
                                     std::mt19937_64& rng);

// Count of singular values above 1e-5.
int metric_rank(const EmbeddingBatch& u);

// Entropy -sum sigma_hat_i log sigma_hat_i of the normalized singular values,
// each shifted by 1e-7, over min(M, d) values.
double metric_effective_rank(const EmbeddingBatch& u);

struct MetricsReport {
  double alignment = 0.0;
  double uniformity = 0.0;
  double wasserstein = 0.0;
  int rank = 0;
  double effective_rank = 0.0;
  // Parameters the metrics were computed with.
  double t = 2.0;
  int n_ref = 0;
  long long seed = 0;
};

MetricsReport compute_metrics(const EmbeddingBatch& u, const EmbeddingBatch& v,
                              double t, int n_ref, long long seed);

}  // namespace spherecl
