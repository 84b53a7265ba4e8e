#ifndef SPECTRAL_RBM_LINALG_HPP
#define SPECTRAL_RBM_LINALG_HPP

#include "spectral_rbm/core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace srbm {

/// Largest singular value.
inline double operator_norm(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

inline double frobenius_norm(const Matrix& m) { return m.norm(); }

namespace detail {

// Within a numerically degenerate eigenvalue block the eigensolver basis is
// arbitrary; rebuild it from coordinate axes in index order so the
// decomposition is a stable function of the input.
inline void canonicalize_block(Matrix& vecs, Index begin, Index end) {
  const Index n = vecs.rows();
  const Index k = end - begin;
  if (k <= 0) return;
  Matrix block = vecs.middleCols(begin, k);
  Matrix pg = block * block.adjoint();  // projector onto the eigenspace
  Matrix basis(n, k);
  Index found = 0;
  for (Index j = 0; j < n && found < k; ++j) {
    Vector cand = pg.col(j);
    for (Index i = 0; i < found; ++i) {
      cand -= basis.col(i).dot(cand) * basis.col(i);
    }
    double nrm = cand.norm();
    if (nrm > 1e-6) {
      basis.col(found++) = cand / nrm;
    }
  }
  if (found < k) return;  // pathological; keep solver basis
  // Re-orthonormalize once more for 1e-13-level orthogonality.
  for (Index j = 0; j < k; ++j) {
    Vector v = basis.col(j);
    for (Index i = 0; i < j; ++i) v -= basis.col(i).dot(v) * basis.col(i);
    basis.col(j) = v / v.norm();
  }
  vecs.middleCols(begin, k) = basis;
}

inline void fix_column_phase(Matrix& vecs) {
  for (Index j = 0; j < vecs.cols(); ++j) {
    Index imax = 0;
    double amax = -1.0;
    for (Index i = 0; i < vecs.rows(); ++i) {
      double a = std::abs(vecs(i, j));
      if (a > amax + 1e-14) {
        amax = a;
        imax = i;
      }
    }
    Complex z = vecs(imax, j);
    if (std::abs(z) > 0) vecs.col(j) *= std::conj(z) / std::abs(z);
  }
}

}  // namespace detail

/// Full spectral decomposition H = V diag(lambda) V*. Deterministic:
/// degenerate blocks are re-based on coordinate axes in index order and
/// column phases are pinned.
inline SpectralDecomposition spectral_decompose(const HermitianMatrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h.mat());
  if (solver.info() != Eigen::Success) {
    throw InvalidOperator("spectral_decompose: eigensolver failed");
  }
  SpectralDecomposition dec{solver.eigenvalues(), solver.eigenvectors()};
  const Index n = dec.dim();
  const double scale = std::max(1.0, dec.spectral_radius());
  Index begin = 0;
  for (Index i = 1; i <= n; ++i) {
    if (i == n || dec.eigenvalues(i) - dec.eigenvalues(i - 1) > 1e-12 * scale) {
      if (i - begin > 1) detail::canonicalize_block(dec.eigenvectors, begin, i);
      begin = i;
    }
  }
  detail::fix_column_phase(dec.eigenvectors);
  return dec;
}

/// Density matrix of an orthonormal frame: sum of |phi><phi|. An empty
/// frame yields the zero projector; its dimension must then be supplied.
inline Projector density_matrix(const std::vector<Vector>& vectors,
                                std::optional<Index> dim = std::nullopt) {
  if (vectors.empty()) {
    if (!dim) {
      throw InvalidInput("density_matrix: empty frame needs a dimension");
    }
    return Projector::zero(*dim);
  }
  const Index n = vectors.front().size();
  Matrix p = Matrix::Zero(n, n);
  for (std::size_t a = 0; a < vectors.size(); ++a) {
    if (vectors[a].size() != n) {
      throw ShapeMismatch("density_matrix: mixed dimensions");
    }
    for (std::size_t b = 0; b <= a; ++b) {
      Complex ov = vectors[b].dot(vectors[a]);
      double target = (a == b) ? 1.0 : 0.0;
      if (std::abs(ov - target) > tol::orthonormal_input) {
        throw NotOrthonormal("density_matrix: frame is not orthonormal");
      }
    }
    p += vectors[a] * vectors[a].adjoint();
  }
  return Projector(0.5 * (p + Matrix(p.adjoint())),
                   static_cast<Index>(vectors.size()));
}

/// Inverse of (z - H) on the complement of `excluded`, zero on its range.
/// The complement must be (numerically) invariant under H; z has to stay
/// at least gap_tol away from the spectrum of the restriction.
inline HermitianMatrix partial_inverse(const SpectralDecomposition& dec,
                                       double z, const Projector& excluded,
                                       double gap_tol_rel = tol::gap_rel) {
  const Index n = dec.dim();
  if (excluded.dim() != n) {
    throw ShapeMismatch("partial_inverse: projector dimension mismatch");
  }
  const Index m = n - excluded.rank;
  if (m == 0) return HermitianMatrix::zero(n);

  // Orthonormal basis of the complement of the excluded range.
  Eigen::SelfAdjointEigenSolver<Matrix> qs(Matrix::Identity(n, n) -
                                           excluded.mat);
  Matrix w(n, m);
  Index got = 0;
  for (Index i = 0; i < n; ++i) {
    if (qs.eigenvalues()(i) > 0.5) {
      if (got == m) throw InvalidOperator("partial_inverse: rank mismatch");
      w.col(got++) = qs.eigenvectors().col(i);
    }
  }
  if (got != m) throw InvalidOperator("partial_inverse: rank mismatch");

  Matrix h = dec.reconstruct();
  Matrix compressed = w.adjoint() * (z * Matrix::Identity(n, n) - h) * w;
  Eigen::SelfAdjointEigenSolver<Matrix> cs(0.5 * (compressed +
                                                  Matrix(compressed.adjoint())));
  const double gap_tol = gap_tol_rel * std::max(1e-300, dec.spectral_radius());
  RealVector inv(m);
  for (Index i = 0; i < m; ++i) {
    double d = cs.eigenvalues()(i);
    if (std::abs(d) <= gap_tol) {
      throw DegenerateGap("partial_inverse: z touches the spectrum",
                          std::abs(d));
    }
    inv(i) = 1.0 / d;
  }
  Matrix core = cs.eigenvectors() * inv.cast<Complex>().asDiagonal() *
                cs.eigenvectors().adjoint();
  return HermitianMatrix(w * core * w.adjoint());
}

/// Vector norms ||A^delta phi||.
inline double vec_norm_ed(const Vector& phi, const HermitianMatrix& a,
                          int delta) {
  if (delta == 0) return phi.norm();
  return (a.mat() * phi).norm();
}

/// Hilbert-Schmidt norms ||A^delta B||_2.
inline double hs_norm_ed(const Matrix& b, const HermitianMatrix& a,
                         int delta) {
  if (delta == 0) return b.norm();
  return (a.mat() * b).norm();
}

namespace detail {
inline void require_invertible(const HermitianMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.mat());
  if (es.eigenvalues().cwiseAbs().minCoeff() <= 0.0) {
    throw SingularEnergyOperator("energy operator A is singular");
  }
}

inline Matrix inverse_of(const HermitianMatrix& a) {
  require_invertible(a);
  return a.mat().inverse();
}
}  // namespace detail

inline double norm(NormKind kind, const Vector& phi,
                   const HermitianMatrix& a) {
  switch (kind) {
    case NormKind::plain:
      return phi.norm();
    case NormKind::energy_vec:
      detail::require_invertible(a);
      return (a.mat() * phi).norm();
    default:
      throw InvalidInput("norm: matrix norm kind applied to a vector");
  }
}

inline double norm(NormKind kind, const Matrix& b, const HermitianMatrix& a) {
  switch (kind) {
    case NormKind::hs0:
      return b.norm();
    case NormKind::hs1:
      detail::require_invertible(a);
      return (a.mat() * b).norm();
    case NormKind::op:
      return operator_norm(b);
    case NormKind::param: {
      Matrix ainv = detail::inverse_of(a);
      return operator_norm(ainv * b * ainv);
    }
    case NormKind::double_energy:
      detail::require_invertible(a);
      return (a.mat() * b * a.mat()).norm();
    default:
      throw InvalidInput("norm: vector norm kind applied to a matrix");
  }
}

/// Modified Gram-Schmidt with re-orthogonalization. Vectors whose residual
/// after projection falls below rank_tol are dropped.
inline std::pair<std::vector<Vector>, Index> orthonormalize(
    const std::vector<Vector>& vectors, double rank_tol) {
  if (vectors.empty()) {
    throw InvalidInput("orthonormalize: empty input");
  }
  const Index n = vectors.front().size();
  std::vector<Vector> basis;
  for (const Vector& v : vectors) {
    if (v.size() != n) throw ShapeMismatch("orthonormalize: mixed dimensions");
    Vector w = v;
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vector& b : basis) w -= b.dot(w) * b;
    }
    double nrm = w.norm();
    if (nrm >= rank_tol) basis.push_back(w / nrm);
  }
  return {basis, static_cast<Index>(basis.size())};
}

struct ProcrustesResult {
  Matrix rotation;              // nu x nu unitary U
  std::vector<Vector> aligned;  // (U psi)_alpha
  double distance = 0.0;        // || phi - U psi ||
};

/// Unitary U minimizing || phi - U psi || over U(nu), via the SVD of the
/// overlap Gram matrix. The aligned overlap matrix <aligned_a, phi_m> comes
/// out Hermitian positive semidefinite.
inline ProcrustesResult procrustes_align(const std::vector<Vector>& phi,
                                         const std::vector<Vector>& psi) {
  if (phi.size() != psi.size()) {
    throw ShapeMismatch("procrustes_align: frame lengths differ");
  }
  const auto nu = static_cast<Index>(phi.size());
  if (nu == 0) return {};
  Matrix s(nu, nu);  // S_ab = <psi_b, phi_a>
  for (Index a = 0; a < nu; ++a) {
    for (Index b = 0; b < nu; ++b) {
      s(a, b) = psi[b].dot(phi[a]);
    }
  }
  Eigen::JacobiSVD<Matrix> svd(s, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix u = svd.matrixU() * svd.matrixV().adjoint();

  ProcrustesResult out;
  out.rotation = u;
  out.aligned.resize(phi.size());
  double dist2 = 0.0;
  for (Index a = 0; a < nu; ++a) {
    Vector v = Vector::Zero(psi.front().size());
    for (Index b = 0; b < nu; ++b) v += u(a, b) * psi[b];
    out.aligned[a] = v;
    dist2 += (phi[a] - v).squaredNorm();
  }
  out.distance = std::sqrt(std::max(0.0, dist2));
  return out;
}

/// Phase e^{i theta} such that <psi, phi> becomes real nonnegative after
/// psi -> phase * psi. Throws when the overlap vanishes.
inline Complex alignment_phase(const Vector& psi, const Vector& phi) {
  Complex ov = psi.dot(phi);
  double a = std::abs(ov);
  if (a < 1e-14 * std::max(1.0, phi.norm() * psi.norm())) {
    throw GaugeFailure("alignment_phase: <psi, phi> vanishes");
  }
  return ov / a;
}

}  // namespace srbm

#endif  // SPECTRAL_RBM_LINALG_HPP
