#ifndef SPECTRAL_RBM_OPERATOR_FAMILY_HPP
#define SPECTRAL_RBM_OPERATOR_FAMILY_HPP

#include "spectral_rbm/core.hpp"
#include "spectral_rbm/linalg.hpp"

#include <optional>
#include <vector>

namespace srbm {

struct ReducedSpace;  // reduced_basis.hpp

/// Polynomial operator family sum_n lambda^n H^n with the energy operator A.
/// Terms beyond the stored degree are zero.
struct OperatorFamily {
  HermitianMatrix A;
  std::vector<HermitianMatrix> terms;  // H^0 .. H^M

  OperatorFamily() = default;

  OperatorFamily(HermitianMatrix a, std::vector<HermitianMatrix> t)
      : A(std::move(a)), terms(std::move(t)) {
    if (terms.empty()) {
      throw InvalidInput("OperatorFamily: at least H^0 is required");
    }
    for (const auto& h : terms) {
      if (h.dim() != A.dim()) {
        throw ShapeMismatch("OperatorFamily: term dimension mismatch");
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(A.mat());
    if (es.eigenvalues().cwiseAbs().minCoeff() <= 0.0) {
      throw SingularEnergyOperator("OperatorFamily: A must be invertible");
    }
  }

  Index dim() const { return A.dim(); }
  int degree() const { return static_cast<int>(terms.size()) - 1; }

  /// H^n, with H^n = 0 for n beyond the stored degree.
  Matrix term(int n) const {
    if (n < 0) throw InvalidOrder("OperatorFamily::term: negative order");
    if (n > degree()) return Matrix::Zero(dim(), dim());
    return terms[static_cast<std::size_t>(n)].mat();
  }
};

/// Horner evaluation of sum_{n<=M} lambda^n H^n.
inline HermitianMatrix assemble(const OperatorFamily& family, double lam) {
  Matrix acc = family.terms.back().mat();
  for (int n = family.degree() - 1; n >= 0; --n) {
    acc = family.terms[static_cast<std::size_t>(n)].mat() + lam * acc;
  }
  return HermitianMatrix(acc);
}

/// Norm constants of the standing assumptions.
struct NormContext {
  double c_A = 0.0;      // ||A^-1||
  double c_H = 0.0;      // ||A^-1 H^0 A^-1||
  double c_H_inf = 0.0;  // max_n ||A^-1 H^n A^-1||
  std::optional<double> c_P;   // ||A P A^-1|| for a given reduced space
  std::optional<double> c_K;   // max_mu ||A K_mu(0) A|| for a given cluster
  std::optional<double> c_PR;  // max over sweep of ||A R_mu(lam) A^-1||
};

/// A cluster of nu eigenmodes of H(lam) with its density matrix and the gap
/// to the rest of the spectrum (infinite when the cluster exhausts it).
struct EigenCluster {
  double lam = 0.0;
  std::vector<std::pair<double, Vector>> modes;
  Projector Gamma;
  double kappa = 0.0;

  Index nu() const { return static_cast<Index>(modes.size()); }
  Index dim() const { return Gamma.dim(); }

  std::vector<Vector> frame() const {
    std::vector<Vector> f;
    f.reserve(modes.size());
    for (const auto& m : modes) f.push_back(m.second);
    return f;
  }
  std::vector<double> energies() const {
    std::vector<double> e;
    e.reserve(modes.size());
    for (const auto& m : modes) e.push_back(m.first);
    return e;
  }
};

namespace detail {
inline Matrix a_inverse(const OperatorFamily& family) {
  return family.A.mat().inverse();
}
}  // namespace detail

inline NormContext validate(const OperatorFamily& family,
                            const Projector* space = nullptr) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(family.A.mat());
  double min_abs = es.eigenvalues().cwiseAbs().minCoeff();
  if (min_abs <= 0.0) {
    throw SingularEnergyOperator("validate: A is singular");
  }
  NormContext ctx;
  ctx.c_A = 1.0 / min_abs;
  Matrix ainv = detail::a_inverse(family);
  ctx.c_H = operator_norm(ainv * family.terms.front().mat() * ainv);
  ctx.c_H_inf = 0.0;
  for (const auto& h : family.terms) {
    ctx.c_H_inf = std::max(ctx.c_H_inf, operator_norm(ainv * h.mat() * ainv));
  }
  if (space != nullptr) {
    ctx.c_P = operator_norm(family.A.mat() * space->mat * ainv);
  }
  return ctx;
}

/// Select the eigenmodes of H(lam) with the given positions in the ascending
/// spectrum. The selection must be closed under numerical degeneracy and
/// separated from the rest by more than gap_tol.
inline EigenCluster select_cluster(const OperatorFamily& family, double lam,
                                   const std::vector<Index>& targets,
                                   double gap_tol_rel = tol::gap_rel,
                                   double degeneracy_rel = tol::degeneracy_rel) {
  if (targets.empty()) throw InvalidInput("select_cluster: empty target set");
  HermitianMatrix h = assemble(family, lam);
  SpectralDecomposition dec = spectral_decompose(h);
  const Index n = dec.dim();
  std::vector<bool> selected(static_cast<std::size_t>(n), false);
  for (Index t : targets) {
    if (t < 0 || t >= n) throw InvalidInput("select_cluster: index out of range");
    selected[static_cast<std::size_t>(t)] = true;
  }

  const double scale = std::max(1e-300, dec.spectral_radius());
  const double deg_tol = degeneracy_rel * scale;
  double kappa = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    if (!selected[static_cast<std::size_t>(i)]) continue;
    for (Index j = 0; j < n; ++j) {
      if (selected[static_cast<std::size_t>(j)]) continue;
      double d = std::abs(dec.eigenvalues(i) - dec.eigenvalues(j));
      if (d <= deg_tol) {
        throw IncompleteCluster(
            "select_cluster: degenerate partner excluded from the cluster");
      }
      kappa = std::min(kappa, d);
    }
  }
  if (kappa <= gap_tol_rel * scale) {
    throw DegenerateGap("select_cluster: cluster gap below tolerance", kappa);
  }

  EigenCluster cluster;
  cluster.lam = lam;
  std::vector<Vector> frame;
  for (Index i = 0; i < n; ++i) {
    if (selected[static_cast<std::size_t>(i)]) {
      cluster.modes.emplace_back(dec.eigenvalues(i), dec.eigenvectors.col(i));
      frame.push_back(dec.eigenvectors.col(i));
    }
  }
  cluster.Gamma = density_matrix(frame);
  cluster.kappa = kappa;
  return cluster;
}

/// K_mu(0)-style partial inverse: (E - H(lam))^-1 on the complement of the
/// cluster space, zero on it.
inline HermitianMatrix cluster_partial_inverse(const OperatorFamily& family,
                                               const EigenCluster& cluster,
                                               double energy,
                                               double gap_tol_rel = tol::gap_rel) {
  SpectralDecomposition dec =
      spectral_decompose(assemble(family, cluster.lam));
  return partial_inverse(dec, energy, cluster.Gamma, gap_tol_rel);
}

}  // namespace srbm

#endif  // SPECTRAL_RBM_OPERATOR_FAMILY_HPP
