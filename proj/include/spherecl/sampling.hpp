#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "spherecl/geometry.hpp"
#include "spherecl/losses.hpp"

namespace spherecl {

enum class PairModelKind { perfect, jitter, clustered };

// Positive-pair law on S^{d-1}. Both views are produced by the same
// perturbation law, so the marginals of u and v coincide:
//   perfect    v = u, u uniform
//   jitter     u uniform, v = normalize(u + sigma * gaussian noise)
//   clustered  u and v both = normalize(concentration * center + noise) with
//              a shared center drawn uniformly among k fixed ones
struct SphereDistribution {
  int d = 2;
  PairModelKind pair_model = PairModelKind::perfect;
  double sigma = 0.0;          // jitter noise scale
  int k = 1;                   // clustered center count
  double concentration = 1.0;  // clustered tightness
  long long seed = 0;          // fixes the clustered centers
};

SphereDistribution perfect_pairs(int d, long long seed = 0);
SphereDistribution jittered_pairs(int d, double sigma, long long seed = 0);
SphereDistribution clustered_pairs(int d, int k, double concentration,
                                   long long seed = 0);
void validate(const SphereDistribution& dist);

// The k fixed centers of a clustered distribution (uniform draw seeded by
// dist.seed, identical across calls).
EmbeddingBatch cluster_centers(const SphereDistribution& dist);

// Independent generator for (seed, stream): lets batches and restarts be
// evaluated in any order while staying bit-reproducible.
std::mt19937_64 derive_rng(unsigned long long seed, unsigned long long stream);

EmbeddingBatch sample_uniform_sphere(int d, int n, std::mt19937_64& rng);

std::pair<EmbeddingBatch, EmbeddingBatch> sample_positive_batch(
    const SphereDistribution& dist, int m, std::mt19937_64& rng);

struct ExpectationEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(n_batches)
  int n_batches = 0;
  int m = 0;
};

// Mean and standard error of the loss over n_batches independent batches of
// size m; batch b uses the generator derived from (seed, b).
ExpectationEstimate estimate_expected_loss(const LossSpec& spec,
                                           const SphereDistribution& dist,
                                           int m, int n_batches,
                                           long long seed);

struct AsymptoticEstimate {
  double value = 0.0;
  // Spread of the per-sample contributions; a noise proxy that does not
  // include the inner-pool bias of the nested log-of-mean estimator.
  double std_error = 0.0;
  int n_samples = 0;
};

// Batch-size-free limit value: for the named variants the two-expectation
// form E[-v^T u / tau] + E[log E[e^{u^T u' / tau}]] with a nested estimator
// (outer anchors and an independent pool, both of size n_samples); for kcl
// the two-term kernel expectation.
AsymptoticEstimate estimate_asymptotic_loss_detailed(
    const LossSpec& spec, const SphereDistribution& dist, int n_samples,
    long long seed);
double estimate_asymptotic_loss(const LossSpec& spec,
                                const SphereDistribution& dist, int n_samples,
                                long long seed);

struct ConvergencePoint {
  int m = 0;
  double normalized_mean = 0.0;  // batch mean minus the variant's constant
  double std_error = 0.0;
};

struct ConvergenceStudy {
  std::vector<ConvergencePoint> points;
  AsymptoticEstimate asymptotic;
};

// Normalized expected losses along m_list, reported against the asymptotic
// estimate of the same spec.
ConvergenceStudy convergence_study(const LossSpec& spec,
                                   const SphereDistribution& dist,
                                   const std::vector<int>& m_list,
                                   int n_batches, int n_samples,
                                   long long seed);

}  // namespace spherecl
