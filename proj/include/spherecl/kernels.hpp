#pragma once

#include <Eigen/Dense>
#include <string>

#include "spherecl/errors.hpp"
#include "spherecl/geometry.hpp"

namespace spherecl {

enum class KernelFamily { linear, gaussian, riesz, logarithmic };

std::string kernel_family_name(KernelFamily family);
KernelFamily kernel_family_from_name(const std::string& name);

// Radial kernel kappa applied to squared distances, K(x,y) = kappa(||x-y||^2).
// Families: linear -t*x, gaussian e^{-t*x}, riesz sign(s)*x^{-s/2},
// logarithmic -log(s*x + beta)/2.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double t = 1.0;     // linear, gaussian
  double s = 1.0;     // riesz, logarithmic
  double beta = 1.0;  // logarithmic
};

KernelSpec linear_kernel(double t);
KernelSpec gaussian_kernel(double t);
KernelSpec riesz_kernel(double s);
KernelSpec logarithmic_kernel(double s, double beta);

// Throws SpecError unless the family's parameter domain holds:
// linear/gaussian t > 0; riesz s > -2, s != 0; logarithmic s > 0, beta > 0.
void validate(const KernelSpec& spec);

double kernel_eval(const KernelSpec& spec, double x);
double kernel_eval_pair(const KernelSpec& spec, const Vector& u,
                        const Vector& v);

// Closed-form n-th derivative of kappa, 1 <= order <= 6.
double kernel_derivative(const KernelSpec& spec, double x, int order);

// Outcome of one screened predicate: holds iff the margin kept the required
// sign at every grid point; worst_x is the point with the smallest margin.
struct PredicateOutcome {
  bool holds = true;
  double worst_x = 0.0;
  double worst_margin = 0.0;
};

struct ConditionReport {
  PredicateOutcome decreasing;              // kappa' < 0
  PredicateOutcome convex;                  // kappa'' >= 0
  PredicateOutcome strictly_convex;         // kappa'' > 0
  PredicateOutcome completely_monotone;     // (-1)^n kappa^(n) >= 0, n=1..4
  PredicateOutcome strictly_completely_monotone;  // strict version
  // -kappa' strictly completely monotone up to order 4, i.e. strict
  // alternation of kappa^(n) over n=1..5.
  PredicateOutcome neg_derivative_strictly_completely_monotone;
};

// Samples every predicate on a uniform grid over [1e-6, 4]. A necessary-
// condition screen at the sampled points, not a proof.
ConditionReport check_conditions(const KernelSpec& spec, int grid_size);

}  // namespace spherecl
