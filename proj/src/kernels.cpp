#include "spherecl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spherecl {

std::string kernel_family_name(KernelFamily family) {
  switch (family) {
    case KernelFamily::linear: return "linear";
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::riesz: return "riesz";
    case KernelFamily::logarithmic: return "logarithmic";
  }
  throw SpecError("unknown kernel family");
}

KernelFamily kernel_family_from_name(const std::string& name) {
  if (name == "linear") return KernelFamily::linear;
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "riesz") return KernelFamily::riesz;
  if (name == "logarithmic") return KernelFamily::logarithmic;
  throw SpecError("unknown kernel family '" + name + "'");
}

KernelSpec linear_kernel(double t) {
  KernelSpec spec;
  spec.family = KernelFamily::linear;
  spec.t = t;
  validate(spec);
  return spec;
}

KernelSpec gaussian_kernel(double t) {
  KernelSpec spec;
  spec.family = KernelFamily::gaussian;
  spec.t = t;
  validate(spec);
  return spec;
}

KernelSpec riesz_kernel(double s) {
  KernelSpec spec;
  spec.family = KernelFamily::riesz;
  spec.s = s;
  validate(spec);
  return spec;
}

KernelSpec logarithmic_kernel(double s, double beta) {
  KernelSpec spec;
  spec.family = KernelFamily::logarithmic;
  spec.s = s;
  spec.beta = beta;
  validate(spec);
  return spec;
}

void validate(const KernelSpec& spec) {
  switch (spec.family) {
    case KernelFamily::linear:
    case KernelFamily::gaussian:
      if (!(spec.t > 0.0)) {
        throw SpecError(kernel_family_name(spec.family) +
                        " kernel requires t > 0");
      }
      return;
    case KernelFamily::riesz:
      if (!(spec.s > -2.0) || spec.s == 0.0) {
        throw SpecError("riesz kernel requires s > -2 and s != 0");
      }
      return;
    case KernelFamily::logarithmic:
      if (!(spec.s > 0.0) || !(spec.beta > 0.0)) {
        throw SpecError("logarithmic kernel requires s > 0 and beta > 0");
      }
      return;
  }
  throw SpecError("unknown kernel family");
}

double kernel_eval(const KernelSpec& spec, double x) {
  validate(spec);
  if (x < 0.0) {
    throw SingularEvaluation("kernel argument must be a squared distance, got " +
                             std::to_string(x));
  }
  switch (spec.family) {
    case KernelFamily::linear:
      return -spec.t * x;
    case KernelFamily::gaussian:
      return std::exp(-spec.t * x);
    case KernelFamily::riesz:
      if (spec.s > 0.0) {
        if (x == 0.0) {
          throw SingularEvaluation("riesz kernel with s > 0 diverges at x = 0");
        }
        return std::pow(x, -spec.s / 2.0);
      }
      // s in (-2, 0): exponent -s/2 is positive, the limit at 0 is 0.
      return -std::pow(x, -spec.s / 2.0);
    case KernelFamily::logarithmic:
      return -0.5 * std::log(spec.s * x + spec.beta);
  }
  throw SpecError("unknown kernel family");
}

double kernel_eval_pair(const KernelSpec& spec, const Vector& u,
                        const Vector& v) {
  if (u.size() != v.size()) {
    throw DimensionMismatch("kernel_eval_pair: vector lengths differ");
  }
  const double inner = std::clamp(u.dot(v), -1.0, 1.0);
  return kernel_eval(spec, 2.0 - 2.0 * inner);
}

double kernel_derivative(const KernelSpec& spec, double x, int order) {
  validate(spec);
  if (order < 1 || order > 6) {
    throw SpecError("kernel_derivative supports orders 1..6, got " +
                    std::to_string(order));
  }
  if (x < 0.0) {
    throw SingularEvaluation("kernel argument must be a squared distance");
  }
  switch (spec.family) {
    case KernelFamily::linear:
      return order == 1 ? -spec.t : 0.0;
    case KernelFamily::gaussian:
      return std::pow(-spec.t, order) * std::exp(-spec.t * x);
    case KernelFamily::riesz: {
      if (x == 0.0) {
        throw SingularEvaluation("riesz derivatives diverge at x = 0");
      }
      const double sign = spec.s > 0.0 ? 1.0 : -1.0;
      const double a = -spec.s / 2.0;
      double coeff = sign;
      for (int k = 0; k < order; ++k) {
        coeff *= a - k;
      }
      return coeff * std::pow(x, a - order);
    }
    case KernelFamily::logarithmic: {
      // d^n/dx^n log(s x + beta) = (-1)^{n-1} (n-1)! s^n / (s x + beta)^n
      double factorial = 1.0;
      for (int k = 2; k < order; ++k) {
        factorial *= k;
      }
      const double parity = order % 2 == 0 ? -1.0 : 1.0;
      return -0.5 * parity * factorial *
             std::pow(spec.s / (spec.s * x + spec.beta), order);
    }
  }
  throw SpecError("unknown kernel family");
}

namespace {

void record(PredicateOutcome& outcome, double x, double margin) {
  if (margin < outcome.worst_margin) {
    outcome.worst_margin = margin;
    outcome.worst_x = x;
  }
}

void finalize(PredicateOutcome& outcome, bool strict) {
  outcome.holds =
      strict ? outcome.worst_margin > 0.0 : outcome.worst_margin >= 0.0;
}

}  // namespace

ConditionReport check_conditions(const KernelSpec& spec, int grid_size) {
  validate(spec);
  if (grid_size < 8) {
    throw SpecError("check_conditions needs grid_size >= 8");
  }
  constexpr double lo = 1e-6;  // stays clear of the riesz singularity
  constexpr double hi = 4.0;

  ConditionReport report;
  PredicateOutcome* all[] = {&report.decreasing,
                             &report.convex,
                             &report.strictly_convex,
                             &report.completely_monotone,
                             &report.strictly_completely_monotone,
                             &report.neg_derivative_strictly_completely_monotone};
  for (PredicateOutcome* outcome : all) {
    outcome->worst_margin = std::numeric_limits<double>::infinity();
  }

  for (int k = 0; k < grid_size; ++k) {
    const double x = lo + (hi - lo) * k / (grid_size - 1);
    double deriv[7] = {0, 0, 0, 0, 0, 0, 0};
    for (int n = 1; n <= 5; ++n) {
      deriv[n] = kernel_derivative(spec, x, n);
    }
    record(report.decreasing, x, -deriv[1]);
    record(report.convex, x, deriv[2]);
    record(report.strictly_convex, x, deriv[2]);

    double alt4 = std::numeric_limits<double>::infinity();
    double alt5 = std::numeric_limits<double>::infinity();
    double sign = -1.0;
    for (int n = 1; n <= 5; ++n) {
      if (n <= 4) alt4 = std::min(alt4, sign * deriv[n]);
      alt5 = std::min(alt5, sign * deriv[n]);
      sign = -sign;
    }
    record(report.completely_monotone, x, alt4);
    record(report.strictly_completely_monotone, x, alt4);
    record(report.neg_derivative_strictly_completely_monotone, x, alt5);
  }

  finalize(report.decreasing, true);
  finalize(report.convex, false);
  finalize(report.strictly_convex, true);
  finalize(report.completely_monotone, false);
  finalize(report.strictly_completely_monotone, true);
  finalize(report.neg_derivative_strictly_completely_monotone, true);

  // Derivative alternation alone cannot see the sign of kappa itself; the
  // riesz branch with s < 0 is negative-valued and is pinned not completely
  // monotone by its parameter domain.
  if (spec.family == KernelFamily::riesz && spec.s < 0.0) {
    report.completely_monotone.holds = false;
    report.completely_monotone.worst_x = lo;
    report.completely_monotone.worst_margin = kernel_eval(spec, lo);
    report.strictly_completely_monotone.holds = false;
    report.strictly_completely_monotone.worst_x = lo;
    report.strictly_completely_monotone.worst_margin = kernel_eval(spec, lo);
  }

  return report;
}

}  // namespace spherecl
