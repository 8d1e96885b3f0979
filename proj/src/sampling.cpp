#include "spherecl/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "spherecl/errors.hpp"
#include "spherecl/kernels.hpp"

namespace spherecl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Matrix gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      out(i, j) = normal(rng);
    }
  }
  return out;
}

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Sample variance with the n-1 denominator; zero for a single value.
double variance_of(const std::vector<double>& x, double mu) {
  if (x.size() < 2) return 0.0;
  double s = 0.0;
  for (double v : x) s += (v - mu) * (v - mu);
  return s / static_cast<double>(x.size() - 1);
}

// Rethrow preserving the dynamic error type so callers can still catch the
// specific failure while seeing which batch produced it.
[[noreturn]] void rethrow_with_batch(const Error& err, int batch_index) {
  const std::string msg =
      std::string(err.what()) + " (batch " + std::to_string(batch_index) + ")";
  if (dynamic_cast<const ZeroRowError*>(&err)) throw ZeroRowError(msg);
  if (dynamic_cast<const NormViolation*>(&err)) throw NormViolation(msg);
  if (dynamic_cast<const DimensionMismatch*>(&err)) throw DimensionMismatch(msg);
  if (dynamic_cast<const ArityError*>(&err)) throw ArityError(msg);
  if (dynamic_cast<const DegenerateStep*>(&err)) throw DegenerateStep(msg);
  if (dynamic_cast<const SingularEvaluation*>(&err)) throw SingularEvaluation(msg);
  if (dynamic_cast<const ConditionViolation*>(&err)) throw ConditionViolation(msg);
  if (dynamic_cast<const NonFiniteLoss*>(&err)) throw NonFiniteLoss(msg);
  if (dynamic_cast<const SpecError*>(&err)) throw SpecError(msg);
  if (dynamic_cast<const ConfigError*>(&err)) throw ConfigError(msg);
  throw Error(msg);
}

// Stream offsets keeping the internal draws of the asymptotic estimator
// disjoint from per-batch streams under a shared seed.
constexpr std::uint64_t kPairStream = 0x100000000ULL;
constexpr std::uint64_t kPoolStream = 0x100000001ULL;
constexpr std::uint64_t kSecondMarginalStream = 0x100000002ULL;
constexpr std::uint64_t kCenterStream = 0xC3ULL;

}  // namespace

SphereDistribution perfect_pairs(int d, long long seed) {
  SphereDistribution dist;
  dist.d = d;
  dist.pair_model = PairModelKind::perfect;
  dist.seed = seed;
  validate(dist);
  return dist;
}

SphereDistribution jittered_pairs(int d, double sigma, long long seed) {
  SphereDistribution dist;
  dist.d = d;
  dist.pair_model = PairModelKind::jitter;
  dist.sigma = sigma;
  dist.seed = seed;
  validate(dist);
  return dist;
}

SphereDistribution clustered_pairs(int d, int k, double concentration,
                                   long long seed) {
  SphereDistribution dist;
  dist.d = d;
  dist.pair_model = PairModelKind::clustered;
  dist.k = k;
  dist.concentration = concentration;
  dist.seed = seed;
  validate(dist);
  return dist;
}

void validate(const SphereDistribution& dist) {
  if (dist.d < 2) {
    throw SpecError("distribution dimension must be at least 2, got " +
                    std::to_string(dist.d));
  }
  if (dist.pair_model == PairModelKind::jitter && !(dist.sigma >= 0.0)) {
    throw SpecError("jitter sigma must be nonnegative");
  }
  if (dist.pair_model == PairModelKind::clustered) {
    if (dist.k < 1) {
      throw SpecError("clustered pair model needs at least one center");
    }
    if (!(dist.concentration >= 0.0)) {
      throw SpecError("cluster concentration must be nonnegative");
    }
  }
}

EmbeddingBatch cluster_centers(const SphereDistribution& dist) {
  validate(dist);
  if (dist.pair_model != PairModelKind::clustered) {
    throw SpecError("cluster centers are only defined for the clustered model");
  }
  std::mt19937_64 rng =
      derive_rng(static_cast<unsigned long long>(dist.seed), kCenterStream);
  return sample_uniform_sphere(dist.d, dist.k, rng);
}

std::mt19937_64 derive_rng(unsigned long long seed,
                           unsigned long long stream) {
  const std::uint64_t mixed = splitmix64(seed ^ splitmix64(stream));
  return std::mt19937_64(mixed);
}

EmbeddingBatch sample_uniform_sphere(int d, int n, std::mt19937_64& rng) {
  if (d < 1) {
    throw SpecError("sphere dimension must be positive, got " +
                    std::to_string(d));
  }
  if (n < 1) {
    throw ArityError("need at least one sample, got " + std::to_string(n));
  }
  return normalize_rows(gaussian_matrix(n, d, rng));
}

std::pair<EmbeddingBatch, EmbeddingBatch> sample_positive_batch(
    const SphereDistribution& dist, int m, std::mt19937_64& rng) {
  validate(dist);
  if (m < 2) {
    throw ArityError("positive batch needs at least two pairs, got " +
                     std::to_string(m));
  }
  switch (dist.pair_model) {
    case PairModelKind::perfect: {
      EmbeddingBatch u = sample_uniform_sphere(dist.d, m, rng);
      return {u, u};
    }
    case PairModelKind::jitter: {
      EmbeddingBatch u = sample_uniform_sphere(dist.d, m, rng);
      if (dist.sigma == 0.0) {
        return {u, u};
      }
      Matrix noise = gaussian_matrix(m, dist.d, rng);
      return {u, normalize_rows(u.points() + dist.sigma * noise)};
    }
    case PairModelKind::clustered: {
      const EmbeddingBatch centers = cluster_centers(dist);
      std::uniform_int_distribution<int> pick(0, dist.k - 1);
      std::vector<int> idx(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = pick(rng);
      Matrix noise_u = gaussian_matrix(m, dist.d, rng);
      Matrix noise_v = gaussian_matrix(m, dist.d, rng);
      Matrix u(m, dist.d);
      Matrix v(m, dist.d);
      for (int i = 0; i < m; ++i) {
        const auto c =
            dist.concentration *
            centers.points().row(idx[static_cast<std::size_t>(i)]);
        u.row(i) = c + noise_u.row(i);
        v.row(i) = c + noise_v.row(i);
      }
      return {normalize_rows(u), normalize_rows(v)};
    }
  }
  throw SpecError("unhandled pair model");
}

ExpectationEstimate estimate_expected_loss(const LossSpec& spec,
                                           const SphereDistribution& dist,
                                           int m, int n_batches,
                                           long long seed) {
  validate(spec);
  validate(dist);
  if (n_batches < 30) {
    throw ArityError("expectation estimate needs at least 30 batches, got " +
                     std::to_string(n_batches));
  }
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n_batches));
  for (int b = 0; b < n_batches; ++b) {
    std::mt19937_64 rng = derive_rng(static_cast<unsigned long long>(seed),
                                     static_cast<unsigned long long>(b));
    try {
      auto [u, v] = sample_positive_batch(dist, m, rng);
      const double value = loss_eval(spec, u, v);
      if (!std::isfinite(value)) {
        throw NonFiniteLoss("loss evaluated to a non-finite value");
      }
      values.push_back(value);
    } catch (const Error& e) {
      rethrow_with_batch(e, b);
    }
  }
  ExpectationEstimate est;
  est.mean = mean_of(values);
  est.std_error = std::sqrt(variance_of(values, est.mean) /
                            static_cast<double>(n_batches));
  est.n_batches = n_batches;
  est.m = m;
  return est;
}

namespace {

// log((1/n) sum_j exp(g_j)) per anchor row, computed in chunks so the full
// anchor-by-pool similarity matrix never materializes.
void accumulate_log_mean_exp(const Matrix& anchors, const Matrix& pool,
                             double tau, std::vector<double>& out) {
  const int n = static_cast<int>(anchors.rows());
  const int pool_n = static_cast<int>(pool.rows());
  const double log_n = std::log(static_cast<double>(pool_n));
  const int chunk = 256;
  for (int start = 0; start < n; start += chunk) {
    const int rows = std::min(chunk, n - start);
    Matrix g = anchors.middleRows(start, rows) * pool.transpose() / tau;
    for (int r = 0; r < rows; ++r) {
      const double mx = g.row(r).maxCoeff();
      const double sum = (g.row(r).array() - mx).exp().sum();
      out.push_back(mx + std::log(sum) - log_n);
    }
  }
}

AsymptoticEstimate asymptotic_named(const LossSpec& spec,
                                    const SphereDistribution& dist,
                                    int n_samples, long long seed) {
  std::mt19937_64 rng_pairs =
      derive_rng(static_cast<unsigned long long>(seed), kPairStream);
  std::mt19937_64 rng_pool =
      derive_rng(static_cast<unsigned long long>(seed), kPoolStream);
  auto [u, v] = sample_positive_batch(dist, n_samples, rng_pairs);
  const Matrix pool =
      sample_positive_batch(dist, n_samples, rng_pool).first.points();

  std::vector<double> align_terms;
  align_terms.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    align_terms.push_back(-u.points().row(i).dot(v.points().row(i)) /
                          spec.tau);
  }
  std::vector<double> contrast_terms;
  contrast_terms.reserve(static_cast<std::size_t>(n_samples));
  accumulate_log_mean_exp(u.points(), pool, spec.tau, contrast_terms);

  const double mean_align = mean_of(align_terms);
  const double mean_contrast = mean_of(contrast_terms);
  AsymptoticEstimate est;
  est.value = mean_align + mean_contrast;
  est.std_error =
      std::sqrt((variance_of(align_terms, mean_align) +
                 variance_of(contrast_terms, mean_contrast)) /
                static_cast<double>(n_samples));
  est.n_samples = n_samples;
  return est;
}

AsymptoticEstimate asymptotic_kcl(const LossSpec& spec,
                                  const SphereDistribution& dist,
                                  int n_samples, long long seed) {
  std::mt19937_64 rng_pairs =
      derive_rng(static_cast<unsigned long long>(seed), kPairStream);
  std::mt19937_64 rng_a =
      derive_rng(static_cast<unsigned long long>(seed), kPoolStream);
  std::mt19937_64 rng_b =
      derive_rng(static_cast<unsigned long long>(seed), kSecondMarginalStream);
  auto [u, v] = sample_positive_batch(dist, n_samples, rng_pairs);
  const Matrix a = sample_positive_batch(dist, n_samples, rng_a).first.points();
  const Matrix b = sample_positive_batch(dist, n_samples, rng_b).first.points();

  std::vector<double> align_terms;
  std::vector<double> spread_terms;
  align_terms.reserve(static_cast<std::size_t>(n_samples));
  spread_terms.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const double d_pos =
        (u.points().row(i) - v.points().row(i)).squaredNorm();
    align_terms.push_back(-kernel_eval(spec.kernel_a, d_pos));
    const double d_neg = (a.row(i) - b.row(i)).squaredNorm();
    spread_terms.push_back(spec.gamma * kernel_eval(spec.kernel_u, d_neg));
  }
  const double mean_align = mean_of(align_terms);
  const double mean_spread = mean_of(spread_terms);
  AsymptoticEstimate est;
  est.value = mean_align + mean_spread;
  est.std_error = std::sqrt((variance_of(align_terms, mean_align) +
                             variance_of(spread_terms, mean_spread)) /
                            static_cast<double>(n_samples));
  est.n_samples = n_samples;
  return est;
}

}  // namespace

AsymptoticEstimate estimate_asymptotic_loss_detailed(
    const LossSpec& spec, const SphereDistribution& dist, int n_samples,
    long long seed) {
  validate(spec);
  validate(dist);
  if (n_samples < 1000) {
    throw ArityError("asymptotic estimate needs at least 1000 samples, got " +
                     std::to_string(n_samples));
  }
  if (spec.variant == LossVariant::kcl) {
    return asymptotic_kcl(spec, dist, n_samples, seed);
  }
  if (is_named_infonce_family(spec.variant)) {
    return asymptotic_named(spec, dist, n_samples, seed);
  }
  throw SpecError(
      "asymptotic value is only defined for the named variants and kcl");
}

double estimate_asymptotic_loss(const LossSpec& spec,
                                const SphereDistribution& dist, int n_samples,
                                long long seed) {
  return estimate_asymptotic_loss_detailed(spec, dist, n_samples, seed).value;
}

ConvergenceStudy convergence_study(const LossSpec& spec,
                                   const SphereDistribution& dist,
                                   const std::vector<int>& m_list,
                                   int n_batches, int n_samples,
                                   long long seed) {
  validate(spec);
  validate(dist);
  if (m_list.empty()) {
    throw ArityError("convergence study needs at least one batch size");
  }
  for (std::size_t i = 0; i < m_list.size(); ++i) {
    if (m_list[i] < 2) {
      throw ArityError("batch sizes must be at least 2");
    }
    if (i > 0 && m_list[i] <= m_list[i - 1]) {
      throw ArityError("batch sizes must be strictly increasing");
    }
  }
  ConvergenceStudy study;
  study.points.reserve(m_list.size());
  for (std::size_t i = 0; i < m_list.size(); ++i) {
    const long long seed_i = static_cast<long long>(
        splitmix64(static_cast<std::uint64_t>(seed) ^
                   splitmix64(0x200ULL + static_cast<std::uint64_t>(i))));
    const ExpectationEstimate est =
        estimate_expected_loss(spec, dist, m_list[i], n_batches, seed_i);
    ConvergencePoint point;
    point.m = m_list[i];
    point.normalized_mean =
        est.mean - normalizing_constant(spec.variant, m_list[i]);
    point.std_error = est.std_error;
    study.points.push_back(point);
  }
  const long long seed_asym = static_cast<long long>(
      splitmix64(static_cast<std::uint64_t>(seed) ^ splitmix64(0x300ULL)));
  study.asymptotic =
      estimate_asymptotic_loss_detailed(spec, dist, n_samples, seed_asym);
  return study;
}

}  // namespace spherecl
