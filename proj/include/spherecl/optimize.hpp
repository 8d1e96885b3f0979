#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "spherecl/geometry.hpp"
#include "spherecl/losses.hpp"

namespace spherecl {

struct OptimizerConfig {
  double learning_rate = 0.05;
  int steps = 20000;
  double momentum = 0.9;
  double grad_tol = 1e-8;  // stop once the tangent-gradient norm drops below
  int restarts = 5;
  long long seed = 0;
};

void validate(const OptimizerConfig& cfg);

struct TrajectoryPoint {
  int step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct OptimizeResult {
  EmbeddingBatch u;
  EmbeddingBatch v;
  std::vector<TrajectoryPoint> trajectory;  // of the winning restart
  double best_loss = 0.0;
  bool converged = false;      // winning restart hit grad_tol
  int best_restart = 0;
  int restarts_used = 0;       // restarts that ran to a finite result
  std::vector<int> aborted_restarts;
};

// Projected gradient descent with momentum over both point sets: ambient
// gradient, per-row tangent projection, momentum kept in tangent coordinates
// (re-projected after each retraction), row-wise retraction back onto the
// sphere. Restart r draws its start from a generator derived from
// (cfg.seed, r); when init is given it replaces the draw of restart 0. The
// best final loss wins, ties within 1e-12 going to the lowest restart index.
// A restart whose loss or gradient turns non-finite is recorded and skipped;
// if every restart fails, NonFiniteLoss propagates.
OptimizeResult optimize_free_embeddings(
    const LossSpec& spec, int m, int d, const OptimizerConfig& cfg,
    const std::optional<std::pair<EmbeddingBatch, EmbeddingBatch>>& init =
        std::nullopt);

struct TheoremVerdict {
  LossSpec loss_spec;
  int m = 0;
  int d = 0;
  double best_loss = 0.0;
  double alignment_gap = 0.0;
  std::optional<ConfigurationCheck> simplex_check;
  std::optional<ConfigurationCheck> cross_polytope_check;
  // filled by the cross-polytope verification
  double final_energy = 0.0;
  double reference_energy = 0.0;
  double energy_rel_err = 0.0;
  bool converged = false;
  int restarts_used = 0;
  bool passed = false;
};

// Optimize-then-certify: minimizes the loss over free points and passes iff
// the winner has alignment_gap <= tol and certifies as a centered regular
// simplex at tol. Requires 1 < m <= d+1.
TheoremVerdict verify_simplex_theorem(const LossSpec& spec, int m, int d,
                                      const OptimizerConfig& cfg,
                                      double tol = 1e-3);

// Kernel-pair loss with a completely monotone spread kernel at m = 2d:
// passes iff the winner certifies as a cross-polytope at tol, or its spread
// energy matches the enumerated cross-polytope energy within energy_rel_tol
// (the minimizer is only unique up to rotation, and the energy admits ties).
TheoremVerdict verify_cross_polytope(const LossSpec& spec, int d,
                                     const OptimizerConfig& cfg,
                                     double tol = 1e-3,
                                     double energy_rel_tol = 1e-4);

}  // namespace spherecl
