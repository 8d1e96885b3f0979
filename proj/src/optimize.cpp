#include "spherecl/optimize.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "spherecl/errors.hpp"
#include "spherecl/kernels.hpp"
#include "spherecl/sampling.hpp"

namespace spherecl {

void validate(const OptimizerConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) {
    throw SpecError("learning rate must be positive");
  }
  if (cfg.steps < 1) {
    throw SpecError("step budget must be at least 1");
  }
  if (!(cfg.momentum >= 0.0) || cfg.momentum >= 1.0) {
    throw SpecError("momentum must lie in [0, 1)");
  }
  if (!(cfg.grad_tol > 0.0)) {
    throw SpecError("gradient tolerance must be positive");
  }
  if (cfg.restarts < 1) {
    throw SpecError("need at least one restart");
  }
}

namespace {

struct RestartOutcome {
  bool aborted = true;
  bool converged = false;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  Matrix u;
  Matrix v;
  std::vector<TrajectoryPoint> trajectory;
};

void project_rows(const Matrix& points, Matrix& grad) {
  for (int i = 0; i < points.rows(); ++i) {
    grad.row(i) = tangent_project(points.row(i), grad.row(i));
  }
}

void retract_rows(Matrix& points, const Matrix& step) {
  for (int i = 0; i < points.rows(); ++i) {
    points.row(i) = retract(points.row(i), step.row(i));
  }
}

RestartOutcome run_restart(const LossSpec& spec, const OptimizerConfig& cfg,
                           Matrix u, Matrix v) {
  const int m = static_cast<int>(u.rows());
  const int d = static_cast<int>(u.cols());
  RestartOutcome out;
  out.trajectory.reserve(64);
  Matrix vel_u = Matrix::Zero(m, d);
  Matrix vel_v = Matrix::Zero(m, d);
  for (int step = 0; step <= cfg.steps; ++step) {
    // wrapping each iterate revalidates the unit-norm invariant the
    // retraction is supposed to maintain
    const EmbeddingBatch ub(u);
    const EmbeddingBatch vb(v);
    const double loss = loss_eval(spec, ub, vb);
    if (!std::isfinite(loss)) return out;
    auto [grad_u, grad_v] = loss_grad(spec, ub, vb);
    if (!grad_u.allFinite() || !grad_v.allFinite()) return out;
    project_rows(u, grad_u);
    project_rows(v, grad_v);
    const double grad_norm =
        std::sqrt(grad_u.squaredNorm() + grad_v.squaredNorm());
    out.trajectory.push_back({step, loss, grad_norm});
    if (grad_norm <= cfg.grad_tol) {
      out.converged = true;
      out.final_loss = loss;
      break;
    }
    if (step == cfg.steps) {
      out.final_loss = loss;
      break;
    }
    // carry momentum in the current tangent spaces
    project_rows(u, vel_u);
    project_rows(v, vel_v);
    vel_u = cfg.momentum * vel_u + grad_u;
    vel_v = cfg.momentum * vel_v + grad_v;
    retract_rows(u, Matrix(-cfg.learning_rate * vel_u));
    retract_rows(v, Matrix(-cfg.learning_rate * vel_v));
  }
  out.aborted = false;
  out.u = std::move(u);
  out.v = std::move(v);
  return out;
}

}  // namespace

OptimizeResult optimize_free_embeddings(
    const LossSpec& spec, int m, int d, const OptimizerConfig& cfg,
    const std::optional<std::pair<EmbeddingBatch, EmbeddingBatch>>& init) {
  validate(spec);
  validate(cfg);
  if (m < 2) {
    throw ArityError("need at least two points, got " + std::to_string(m));
  }
  if (d < 1) {
    throw SpecError("embedding dimension must be positive");
  }
  if (init) {
    if (init->first.size() != m || init->first.dim() != d ||
        init->second.size() != m || init->second.dim() != d) {
      throw DimensionMismatch("initial configuration does not match (m, d)");
    }
  }

  std::vector<RestartOutcome> outcomes;
  outcomes.reserve(static_cast<std::size_t>(cfg.restarts));
  std::vector<int> aborted;
  for (int r = 0; r < cfg.restarts; ++r) {
    Matrix u0;
    Matrix v0;
    if (r == 0 && init) {
      u0 = init->first.points();
      v0 = init->second.points();
    } else {
      std::mt19937_64 rng = derive_rng(
          static_cast<unsigned long long>(cfg.seed),
          static_cast<unsigned long long>(r));
      u0 = sample_uniform_sphere(d, m, rng).points();
      v0 = sample_uniform_sphere(d, m, rng).points();
    }
    RestartOutcome outcome = run_restart(spec, cfg, std::move(u0), std::move(v0));
    if (outcome.aborted) aborted.push_back(r);
    outcomes.push_back(std::move(outcome));
  }

  int best = -1;
  for (int r = 0; r < cfg.restarts; ++r) {
    if (outcomes[static_cast<std::size_t>(r)].aborted) continue;
    if (best < 0 ||
        outcomes[static_cast<std::size_t>(r)].final_loss <
            outcomes[static_cast<std::size_t>(best)].final_loss - 1e-12) {
      best = r;
    }
  }
  if (best < 0) {
    throw NonFiniteLoss("every restart produced a non-finite loss");
  }

  RestartOutcome& win = outcomes[static_cast<std::size_t>(best)];
  OptimizeResult result{EmbeddingBatch(win.u),
                        EmbeddingBatch(win.v),
                        std::move(win.trajectory),
                        win.final_loss,
                        win.converged,
                        best,
                        cfg.restarts - static_cast<int>(aborted.size()),
                        std::move(aborted)};
  return result;
}

TheoremVerdict verify_simplex_theorem(const LossSpec& spec, int m, int d,
                                      const OptimizerConfig& cfg,
                                      double tol) {
  if (m <= 1 || m > d + 1) {
    throw ArityError("simplex verification needs 1 < m <= d+1, got m=" +
                     std::to_string(m) + ", d=" + std::to_string(d));
  }
  const OptimizeResult run = optimize_free_embeddings(spec, m, d, cfg);
  TheoremVerdict verdict;
  verdict.loss_spec = spec;
  verdict.m = m;
  verdict.d = d;
  verdict.best_loss = run.best_loss;
  verdict.alignment_gap = alignment_gap(run.u, run.v);
  verdict.simplex_check = is_regular_simplex(run.u, tol);
  verdict.converged = run.converged;
  verdict.restarts_used = run.restarts_used;
  verdict.passed =
      verdict.alignment_gap <= tol && verdict.simplex_check->passed;
  return verdict;
}

TheoremVerdict verify_cross_polytope(const LossSpec& spec, int d,
                                     const OptimizerConfig& cfg, double tol,
                                     double energy_rel_tol) {
  if (spec.variant != LossVariant::kcl) {
    throw SpecError("cross-polytope verification is defined for kcl");
  }
  const ConditionReport report = check_conditions(spec.kernel_u, 401);
  if (!report.completely_monotone.holds) {
    throw ConditionViolation(
        "spread kernel fails the complete-monotonicity screen");
  }
  const int m = 2 * d;
  const OptimizeResult run = optimize_free_embeddings(spec, m, d, cfg);
  TheoremVerdict verdict;
  verdict.loss_spec = spec;
  verdict.m = m;
  verdict.d = d;
  verdict.best_loss = run.best_loss;
  verdict.alignment_gap = alignment_gap(run.u, run.v);
  verdict.cross_polytope_check = is_cross_polytope(run.u, tol);
  verdict.final_energy = hyperspherical_energy(spec.kernel_u, run.u);
  verdict.reference_energy =
      hyperspherical_energy(spec.kernel_u, cross_polytope(d));
  verdict.energy_rel_err =
      std::abs(verdict.final_energy - verdict.reference_energy) /
      std::max(std::abs(verdict.reference_energy), 1e-300);
  verdict.converged = run.converged;
  verdict.restarts_used = run.restarts_used;
  verdict.passed = verdict.cross_polytope_check->passed ||
                   verdict.energy_rel_err <= energy_rel_tol;
  return verdict;
}

}  // namespace spherecl
