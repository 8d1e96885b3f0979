#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "spherecl/geometry.hpp"
#include "spherecl/kernels.hpp"

namespace spherecl {

// phi and psi with their derivatives, for the generic loss families.
struct PhiPsi {
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
  std::function<double(double)> psi;
  std::function<double(double)> dpsi;
  std::string name;
};

// phi(x) = e^{x/tau} paired with psi = log(1+x) (one_plus) or psi = log(x):
// the pairs that instantiate the named InfoNCE-family variants.
PhiPsi exp_log_phi_psi(double tau, bool one_plus);

enum class LossVariant {
  infonce,
  simclr,
  dcl,
  dhel,
  kcl,
  generic_a,
  generic_b,
  generic_c,
};

std::string loss_variant_name(LossVariant variant);
LossVariant loss_variant_from_name(const std::string& name);
bool is_named_infonce_family(LossVariant variant);

struct LossSpec {
  LossVariant variant = LossVariant::infonce;
  double tau = 1.0;                       // infonce, simclr, dcl, dhel
  KernelSpec kernel_a;                    // kcl alignment kernel
  KernelSpec kernel_u;                    // kcl uniformity kernel
  double gamma = 1.0;                     // kcl
  std::shared_ptr<const PhiPsi> phi_psi;  // generic_a, generic_b, generic_c
  bool symmetric = false;
};

LossSpec named_loss(LossVariant variant, double tau, bool symmetric = false);
LossSpec kcl_loss(const KernelSpec& kernel_a, const KernelSpec& kernel_u,
                  double gamma, bool symmetric = false);
LossSpec generic_loss(LossVariant variant, PhiPsi pp, bool symmetric = false);

void validate(const LossSpec& spec);

// Single entry point for every variant; applies the symmetric wrapper
// 0.5 * (L(U,V) + L(V,U)) when spec.symmetric is set.
double loss_eval(const LossSpec& spec, const EmbeddingBatch& u,
                 const EmbeddingBatch& v);

// Anchor differences taken against the positive pair: inner sums over
// phi((v_j - v_i)^T u_i), the two-term expansion adding phi((u_j - v_i)^T u_i),
// and the same-view-only sum phi((u_j - v_i)^T u_i), respectively.
double loss_generic_a(const EmbeddingBatch& u, const EmbeddingBatch& v,
                      const PhiPsi& pp);
double loss_generic_b(const EmbeddingBatch& u, const EmbeddingBatch& v,
                      const PhiPsi& pp);
double loss_generic_c(const EmbeddingBatch& u, const EmbeddingBatch& v,
                      const PhiPsi& pp);

double loss_named(const LossSpec& spec, const EmbeddingBatch& u,
                  const EmbeddingBatch& v);
double loss_kcl(const LossSpec& spec, const EmbeddingBatch& u,
                const EmbeddingBatch& v);

// Ambient Euclidean gradients (dL/dU, dL/dV); tangent projection is the
// optimizer's job.
std::pair<Matrix, Matrix> loss_grad(const LossSpec& spec,
                                    const EmbeddingBatch& u,
                                    const EmbeddingBatch& v);

// Central-difference oracle, h in [1e-8, 1e-3]. Perturbed points leave the
// sphere, so this differentiates the same ambient extension loss_grad
// reports.
std::pair<Matrix, Matrix> finite_diff_grad(const LossSpec& spec,
                                           const EmbeddingBatch& u,
                                           const EmbeddingBatch& v, double h);

// Constant to subtract from a mini-batch mean before comparing against the
// batch-size-free asymptotic value.
double normalizing_constant(LossVariant variant, int m);

// Mean pairwise kernel value over ordered pairs: the uniformity energy a
// batch scores under the given kernel.
double hyperspherical_energy(const KernelSpec& kernel, const EmbeddingBatch& u);

namespace detail {
// Evaluation on raw coordinate matrices whose rows need not be unit norm:
// the ambient extension used by gradients and finite differences. Honors
// spec.symmetric.
double loss_value_ambient(const LossSpec& spec, const Matrix& u,
                          const Matrix& v);
void loss_grad_ambient(const LossSpec& spec, const Matrix& u, const Matrix& v,
                       Matrix& grad_u, Matrix& grad_v);
}  // namespace detail

}  // namespace spherecl
