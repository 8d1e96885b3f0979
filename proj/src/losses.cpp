#include "spherecl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace spherecl {

PhiPsi exp_log_phi_psi(double tau, bool one_plus) {
  if (!(tau > 0.0)) {
    throw SpecError("temperature must be positive");
  }
  PhiPsi pp;
  pp.phi = [tau](double x) { return std::exp(x / tau); };
  pp.dphi = [tau](double x) { return std::exp(x / tau) / tau; };
  if (one_plus) {
    pp.psi = [](double x) { return std::log1p(x); };
    pp.dpsi = [](double x) { return 1.0 / (1.0 + x); };
    pp.name = "exp(x/tau) with log(1+x)";
  } else {
    pp.psi = [](double x) { return std::log(x); };
    pp.dpsi = [](double x) { return 1.0 / x; };
    pp.name = "exp(x/tau) with log(x)";
  }
  return pp;
}

std::string loss_variant_name(LossVariant variant) {
  switch (variant) {
    case LossVariant::infonce: return "infonce";
    case LossVariant::simclr: return "simclr";
    case LossVariant::dcl: return "dcl";
    case LossVariant::dhel: return "dhel";
    case LossVariant::kcl: return "kcl";
    case LossVariant::generic_a: return "generic_a";
    case LossVariant::generic_b: return "generic_b";
    case LossVariant::generic_c: return "generic_c";
  }
  throw SpecError("unknown loss variant");
}

LossVariant loss_variant_from_name(const std::string& name) {
  if (name == "infonce") return LossVariant::infonce;
  if (name == "simclr") return LossVariant::simclr;
  if (name == "dcl") return LossVariant::dcl;
  if (name == "dhel") return LossVariant::dhel;
  if (name == "kcl") return LossVariant::kcl;
  if (name == "generic_a") return LossVariant::generic_a;
  if (name == "generic_b") return LossVariant::generic_b;
  if (name == "generic_c") return LossVariant::generic_c;
  throw SpecError("unknown loss variant '" + name + "'");
}

bool is_named_infonce_family(LossVariant variant) {
  return variant == LossVariant::infonce || variant == LossVariant::simclr ||
         variant == LossVariant::dcl || variant == LossVariant::dhel;
}

LossSpec named_loss(LossVariant variant, double tau, bool symmetric) {
  if (!is_named_infonce_family(variant)) {
    throw SpecError("named_loss takes infonce, simclr, dcl, or dhel");
  }
  LossSpec spec;
  spec.variant = variant;
  spec.tau = tau;
  spec.symmetric = symmetric;
  validate(spec);
  return spec;
}

LossSpec kcl_loss(const KernelSpec& kernel_a, const KernelSpec& kernel_u,
                  double gamma, bool symmetric) {
  LossSpec spec;
  spec.variant = LossVariant::kcl;
  spec.kernel_a = kernel_a;
  spec.kernel_u = kernel_u;
  spec.gamma = gamma;
  spec.symmetric = symmetric;
  validate(spec);
  return spec;
}

LossSpec generic_loss(LossVariant variant, PhiPsi pp, bool symmetric) {
  if (variant != LossVariant::generic_a && variant != LossVariant::generic_b &&
      variant != LossVariant::generic_c) {
    throw SpecError("generic_loss takes generic_a, generic_b, or generic_c");
  }
  LossSpec spec;
  spec.variant = variant;
  spec.phi_psi = std::make_shared<PhiPsi>(std::move(pp));
  spec.symmetric = symmetric;
  validate(spec);
  return spec;
}

void validate(const LossSpec& spec) {
  if (is_named_infonce_family(spec.variant)) {
    if (!(spec.tau > 0.0)) {
      throw SpecError("temperature must be positive");
    }
    return;
  }
  if (spec.variant == LossVariant::kcl) {
    validate(spec.kernel_a);
    validate(spec.kernel_u);
    if (!(spec.gamma > 0.0)) {
      throw SpecError("kcl weighting gamma must be positive");
    }
    return;
  }
  if (!spec.phi_psi || !spec.phi_psi->phi || !spec.phi_psi->dphi ||
      !spec.phi_psi->psi || !spec.phi_psi->dpsi) {
    throw SpecError("generic variants need phi, psi, and their derivatives");
  }
}

namespace {

// Which anchor differences feed the inner sum: a uses (v_j - v_i)^T u_i,
// c uses (u_j - v_i)^T u_i, b uses both.
enum class Family { a, b, c };

Family family_of(LossVariant variant) {
  switch (variant) {
    case LossVariant::infonce:
    case LossVariant::generic_a:
      return Family::a;
    case LossVariant::simclr:
    case LossVariant::dcl:
    case LossVariant::generic_b:
      return Family::b;
    case LossVariant::dhel:
    case LossVariant::generic_c:
      return Family::c;
    default:
      throw SpecError("variant has no phi/psi family");
  }
}

bool uses_one_plus(LossVariant variant) {
  return variant == LossVariant::infonce || variant == LossVariant::simclr;
}

void check_pair_shape(const Matrix& u, const Matrix& v) {
  if (u.rows() != v.rows() || u.cols() != v.cols()) {
    throw DimensionMismatch("loss: U and V shapes differ");
  }
  if (u.rows() < 2) {
    throw ArityError("contrastive losses need M >= 2");
  }
}

// The named variants share phi(x) = e^{x/tau}, so each per-anchor term is a
// log-sum-exp over inner-product differences (with an extra 0 exponent when
// psi = log(1+x)); evaluating it with the max subtracted keeps small
// temperatures finite.
double named_value(LossVariant variant, double tau, const Matrix& u,
                   const Matrix& v) {
  const Eigen::Index m = u.rows();
  const Family fam = family_of(variant);
  const bool one_plus = uses_one_plus(variant);
  const Matrix g_uv = u * v.transpose();
  Matrix g_uu;
  if (fam != Family::a) {
    g_uu = u * u.transpose();
  }

  double total = 0.0;
  std::vector<double> args;
  for (Eigen::Index i = 0; i < m; ++i) {
    args.clear();
    const double anchor = g_uv(i, i);
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      if (fam != Family::c) args.push_back((g_uv(i, j) - anchor) / tau);
      if (fam != Family::a) args.push_back((g_uu(i, j) - anchor) / tau);
    }
    if (one_plus) args.push_back(0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (double a : args) mx = std::max(mx, a);
    double z = 0.0;
    for (double a : args) z += std::exp(a - mx);
    total += mx + std::log(z);
  }
  return total / static_cast<double>(m);
}

// Shared chain-rule assembly. wb holds the weights psi'(S_i) phi'(arg) of the
// (v_j - v_i)^T u_i arguments, wc those of (u_j - v_i)^T u_i; both have zero
// diagonals.
void assemble_pair_grads(Family fam, const Matrix& wb, const Matrix& wc,
                         const Matrix& u, const Matrix& v, Matrix& gu,
                         Matrix& gv) {
  const double m = static_cast<double>(u.rows());
  switch (fam) {
    case Family::a: {
      Vector rs = wb.rowwise().sum();
      gu = (wb * v - rs.asDiagonal() * v) / m;
      gv = (wb.transpose() * u - rs.asDiagonal() * u) / m;
      return;
    }
    case Family::b: {
      Vector rst = wb.rowwise().sum() + wc.rowwise().sum();
      gu = (wb * v + wc * u + wc.transpose() * u - rst.asDiagonal() * v) / m;
      gv = (wb.transpose() * u - rst.asDiagonal() * u) / m;
      return;
    }
    case Family::c: {
      Vector rs = wc.rowwise().sum();
      gu = (wc * u + wc.transpose() * u - rs.asDiagonal() * v) / m;
      gv = -(rs.asDiagonal() * u) / m;
      return;
    }
  }
}

void named_grad(LossVariant variant, double tau, const Matrix& u,
                const Matrix& v, Matrix& gu, Matrix& gv) {
  const Eigen::Index m = u.rows();
  const Family fam = family_of(variant);
  const bool one_plus = uses_one_plus(variant);
  const Matrix g_uv = u * v.transpose();
  Matrix g_uu;
  if (fam != Family::a) {
    g_uu = u * u.transpose();
  }

  Matrix wb = Matrix::Zero(m, m);
  Matrix wc = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double anchor = g_uv(i, i);
    double mx = one_plus ? 0.0 : -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      if (fam != Family::c) mx = std::max(mx, (g_uv(i, j) - anchor) / tau);
      if (fam != Family::a) mx = std::max(mx, (g_uu(i, j) - anchor) / tau);
    }
    double z = one_plus ? std::exp(-mx) : 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      if (fam != Family::c) {
        wb(i, j) = std::exp((g_uv(i, j) - anchor) / tau - mx);
        z += wb(i, j);
      }
      if (fam != Family::a) {
        wc(i, j) = std::exp((g_uu(i, j) - anchor) / tau - mx);
        z += wc(i, j);
      }
    }
    const double scale = 1.0 / (z * tau);
    wb.row(i) *= scale;
    wc.row(i) *= scale;
  }
  assemble_pair_grads(fam, wb, wc, u, v, gu, gv);
}

double generic_value(Family fam, const PhiPsi& pp, const Matrix& u,
                     const Matrix& v) {
  const Eigen::Index m = u.rows();
  const Matrix g_uv = u * v.transpose();
  Matrix g_uu;
  if (fam != Family::a) {
    g_uu = u * u.transpose();
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double anchor = g_uv(i, i);
    double inner = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      if (fam != Family::c) inner += pp.phi(g_uv(i, j) - anchor);
      if (fam != Family::a) inner += pp.phi(g_uu(i, j) - anchor);
    }
    total += pp.psi(inner);
  }
  return total / static_cast<double>(m);
}

void generic_grad(Family fam, const PhiPsi& pp, const Matrix& u,
                  const Matrix& v, Matrix& gu, Matrix& gv) {
  const Eigen::Index m = u.rows();
  const Matrix g_uv = u * v.transpose();
  Matrix g_uu;
  if (fam != Family::a) {
    g_uu = u * u.transpose();
  }
  Matrix wb = Matrix::Zero(m, m);
  Matrix wc = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double anchor = g_uv(i, i);
    double inner = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      if (fam != Family::c) inner += pp.phi(g_uv(i, j) - anchor);
      if (fam != Family::a) inner += pp.phi(g_uu(i, j) - anchor);
    }
    const double outer = pp.dpsi(inner);
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      if (fam != Family::c) wb(i, j) = outer * pp.dphi(g_uv(i, j) - anchor);
      if (fam != Family::a) wc(i, j) = outer * pp.dphi(g_uu(i, j) - anchor);
    }
  }
  assemble_pair_grads(fam, wb, wc, u, v, gu, gv);
}

double kcl_value(const LossSpec& spec, const Matrix& u, const Matrix& v) {
  const Eigen::Index m = u.rows();
  double align = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    align += kernel_eval(spec.kernel_a, (u.row(i) - v.row(i)).squaredNorm());
  }
  align /= static_cast<double>(m);
  double energy = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      energy +=
          2.0 * kernel_eval(spec.kernel_u, (u.row(i) - u.row(j)).squaredNorm());
    }
  }
  energy /= static_cast<double>(m) * static_cast<double>(m - 1);
  return -align + spec.gamma * energy;
}

void kcl_grad(const LossSpec& spec, const Matrix& u, const Matrix& v,
              Matrix& gu, Matrix& gv) {
  const Eigen::Index m = u.rows();
  const double md = static_cast<double>(m);
  gu = Matrix::Zero(m, u.cols());
  gv = Matrix::Zero(m, u.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::RowVectorXd diff = u.row(i) - v.row(i);
    const double slope =
        kernel_derivative(spec.kernel_a, diff.squaredNorm(), 1);
    gu.row(i) -= (2.0 / md) * slope * diff;
    gv.row(i) += (2.0 / md) * slope * diff;
  }
  const double c = 4.0 * spec.gamma / (md * (md - 1.0));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const Eigen::RowVectorXd diff = u.row(i) - u.row(j);
      const double slope =
          kernel_derivative(spec.kernel_u, diff.squaredNorm(), 1);
      gu.row(i) += c * slope * diff;
      gu.row(j) -= c * slope * diff;
    }
  }
}

double raw_value(const LossSpec& spec, const Matrix& u, const Matrix& v) {
  if (is_named_infonce_family(spec.variant)) {
    return named_value(spec.variant, spec.tau, u, v);
  }
  if (spec.variant == LossVariant::kcl) {
    return kcl_value(spec, u, v);
  }
  return generic_value(family_of(spec.variant), *spec.phi_psi, u, v);
}

void raw_grad(const LossSpec& spec, const Matrix& u, const Matrix& v,
              Matrix& gu, Matrix& gv) {
  if (is_named_infonce_family(spec.variant)) {
    named_grad(spec.variant, spec.tau, u, v, gu, gv);
    return;
  }
  if (spec.variant == LossVariant::kcl) {
    kcl_grad(spec, u, v, gu, gv);
    return;
  }
  generic_grad(family_of(spec.variant), *spec.phi_psi, u, v, gu, gv);
}

}  // namespace

namespace detail {

double loss_value_ambient(const LossSpec& spec, const Matrix& u,
                          const Matrix& v) {
  validate(spec);
  check_pair_shape(u, v);
  if (spec.symmetric) {
    return 0.5 * (raw_value(spec, u, v) + raw_value(spec, v, u));
  }
  return raw_value(spec, u, v);
}

void loss_grad_ambient(const LossSpec& spec, const Matrix& u, const Matrix& v,
                       Matrix& grad_u, Matrix& grad_v) {
  validate(spec);
  check_pair_shape(u, v);
  if (!spec.symmetric) {
    raw_grad(spec, u, v, grad_u, grad_v);
    return;
  }
  Matrix gu_fwd, gv_fwd, gu_rev, gv_rev;
  raw_grad(spec, u, v, gu_fwd, gv_fwd);
  raw_grad(spec, v, u, gu_rev, gv_rev);
  grad_u = 0.5 * (gu_fwd + gv_rev);
  grad_v = 0.5 * (gv_fwd + gu_rev);
}

}  // namespace detail

double loss_eval(const LossSpec& spec, const EmbeddingBatch& u,
                 const EmbeddingBatch& v) {
  return detail::loss_value_ambient(spec, u.points(), v.points());
}

double loss_generic_a(const EmbeddingBatch& u, const EmbeddingBatch& v,
                      const PhiPsi& pp) {
  check_pair_shape(u.points(), v.points());
  return generic_value(Family::a, pp, u.points(), v.points());
}

double loss_generic_b(const EmbeddingBatch& u, const EmbeddingBatch& v,
                      const PhiPsi& pp) {
  check_pair_shape(u.points(), v.points());
  return generic_value(Family::b, pp, u.points(), v.points());
}

double loss_generic_c(const EmbeddingBatch& u, const EmbeddingBatch& v,
                      const PhiPsi& pp) {
  check_pair_shape(u.points(), v.points());
  return generic_value(Family::c, pp, u.points(), v.points());
}

double loss_named(const LossSpec& spec, const EmbeddingBatch& u,
                  const EmbeddingBatch& v) {
  if (!is_named_infonce_family(spec.variant)) {
    throw SpecError("loss_named takes infonce, simclr, dcl, or dhel");
  }
  return detail::loss_value_ambient(spec, u.points(), v.points());
}

double loss_kcl(const LossSpec& spec, const EmbeddingBatch& u,
                const EmbeddingBatch& v) {
  if (spec.variant != LossVariant::kcl) {
    throw SpecError("loss_kcl requires a kcl spec");
  }
  return detail::loss_value_ambient(spec, u.points(), v.points());
}

std::pair<Matrix, Matrix> loss_grad(const LossSpec& spec,
                                    const EmbeddingBatch& u,
                                    const EmbeddingBatch& v) {
  Matrix gu, gv;
  detail::loss_grad_ambient(spec, u.points(), v.points(), gu, gv);
  return {std::move(gu), std::move(gv)};
}

std::pair<Matrix, Matrix> finite_diff_grad(const LossSpec& spec,
                                           const EmbeddingBatch& u,
                                           const EmbeddingBatch& v, double h) {
  if (!(h >= 1e-8 && h <= 1e-3)) {
    throw SpecError("finite_diff_grad step must lie in [1e-8, 1e-3]");
  }
  Matrix pu = u.points();
  Matrix pv = v.points();
  Matrix gu(pu.rows(), pu.cols());
  Matrix gv(pv.rows(), pv.cols());
  for (Eigen::Index i = 0; i < pu.rows(); ++i) {
    for (Eigen::Index j = 0; j < pu.cols(); ++j) {
      const double saved = pu(i, j);
      pu(i, j) = saved + h;
      const double up = detail::loss_value_ambient(spec, pu, pv);
      pu(i, j) = saved - h;
      const double down = detail::loss_value_ambient(spec, pu, pv);
      pu(i, j) = saved;
      gu(i, j) = (up - down) / (2.0 * h);
    }
  }
  for (Eigen::Index i = 0; i < pv.rows(); ++i) {
    for (Eigen::Index j = 0; j < pv.cols(); ++j) {
      const double saved = pv(i, j);
      pv(i, j) = saved + h;
      const double up = detail::loss_value_ambient(spec, pu, pv);
      pv(i, j) = saved - h;
      const double down = detail::loss_value_ambient(spec, pu, pv);
      pv(i, j) = saved;
      gv(i, j) = (up - down) / (2.0 * h);
    }
  }
  return {std::move(gu), std::move(gv)};
}

double normalizing_constant(LossVariant variant, int m) {
  if (m < 2) {
    throw ArityError("normalizing_constant needs M >= 2");
  }
  switch (variant) {
    case LossVariant::infonce:
    case LossVariant::dhel:
      return std::log(static_cast<double>(m - 1));
    case LossVariant::simclr:
    case LossVariant::dcl:
      return std::log(static_cast<double>(2 * m - 2));
    case LossVariant::kcl:
      return 0.0;
    default:
      throw SpecError("no tabulated normalizing constant for " +
                      loss_variant_name(variant));
  }
}

double hyperspherical_energy(const KernelSpec& kernel,
                             const EmbeddingBatch& u) {
  const int m = u.size();
  if (m < 2) {
    throw ArityError("hyperspherical energy needs M >= 2");
  }
  double energy = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      energy += 2.0 * kernel_eval(
                          kernel,
                          (u.points().row(i) - u.points().row(j)).squaredNorm());
    }
  }
  return energy / (static_cast<double>(m) * (m - 1));
}

}  // namespace spherecl
