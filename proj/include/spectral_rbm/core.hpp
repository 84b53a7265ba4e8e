#ifndef SPECTRAL_RBM_CORE_HPP
#define SPECTRAL_RBM_CORE_HPP

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace srbm {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace tol {
// Construction / invariant tolerances.
inline constexpr double hermiticity = 1e-13;
inline constexpr double projector = 1e-11;
inline constexpr double orthonormal_input = 1e-9;
inline constexpr double orthonormalize_out = 1e-12;
// Relative spectral-gap floor for partial inverses.
inline constexpr double gap_rel = 1e-10;
// Cluster closure: eigenvalues closer than this (relative) are degenerate.
inline constexpr double degeneracy_rel = 1e-8;
// Reduced solve at lam = 0 must reproduce targeted modes this well.
inline constexpr double match_rel = 1e-8;
// Branch continuation: ambiguous below this overlap.
inline constexpr double branch_overlap = 0.5;
}  // namespace tol

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidOperator : public Error {
 public:
  using Error::Error;
};

class DegenerateGap : public Error {
 public:
  DegenerateGap(const std::string& what, double distance)
      : Error(what + " (distance " + std::to_string(distance) + ")"),
        distance_(distance) {}
  double distance() const { return distance_; }

 private:
  double distance_;
};

class NotOrthonormal : public Error {
 public:
  using Error::Error;
};

class SingularEnergyOperator : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class IncompleteCluster : public Error {
 public:
  using Error::Error;
};

class DegeneracyNotLifted : public Error {
 public:
  using Error::Error;
};

class InvalidOrder : public Error {
 public:
  using Error::Error;
};

class EmptySpace : public Error {
 public:
  using Error::Error;
};

class BadSeed : public Error {
 public:
  using Error::Error;
};

class SpectralPollution : public Error {
 public:
  using Error::Error;
};

class BranchCrossing : public Error {
 public:
  using Error::Error;
};

class GaugeFailure : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Dense Hermitian operator. Symmetrized on construction so that rounding
/// drift in callers can never leak a non-self-adjoint matrix into the
/// spectral machinery.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  explicit HermitianMatrix(const Matrix& m) {
    if (m.rows() != m.cols()) {
      throw InvalidOperator("HermitianMatrix: matrix must be square");
    }
    if (!m.allFinite()) {
      throw InvalidOperator("HermitianMatrix: non-finite entries");
    }
    double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - Matrix(m.adjoint())).cwiseAbs().maxCoeff() >
        1e-8 * scale) {
      // Far from Hermitian: symmetrization would silently change the input.
      throw InvalidOperator("HermitianMatrix: input is not Hermitian");
    }
    mat_ = 0.5 * (m + m.adjoint());
  }

  static HermitianMatrix identity(Index n) {
    return HermitianMatrix(Matrix::Identity(n, n));
  }
  static HermitianMatrix zero(Index n) {
    return HermitianMatrix(Matrix::Zero(n, n));
  }
  static HermitianMatrix diagonal(const RealVector& d) {
    Matrix m = Matrix::Zero(d.size(), d.size());
    m.diagonal() = d.cast<Complex>();
    return HermitianMatrix(m);
  }

  Index dim() const { return mat_.rows(); }
  const Matrix& mat() const { return mat_; }

 private:
  Matrix mat_;
};

/// Orthogonal projector with its rank. Idempotency, self-adjointness and
/// trace are validated at construction.
struct Projector {
  Matrix mat;
  Index rank = 0;

  Projector() = default;

  Projector(Matrix m, Index r) : mat(std::move(m)), rank(r) {
    if (mat.rows() != mat.cols()) {
      throw InvalidOperator("Projector: matrix must be square");
    }
    if (!mat.allFinite()) {
      throw InvalidOperator("Projector: non-finite entries");
    }
    double herm = (mat - Matrix(mat.adjoint())).norm();
    double idem = (mat * mat - mat).norm();
    if (herm > tol::projector || idem > tol::projector) {
      throw InvalidOperator("Projector: P^2 = P = P* violated");
    }
    if (std::abs(mat.trace().real() - static_cast<double>(rank)) > 1e-9 ||
        std::abs(mat.trace().imag()) > 1e-9) {
      throw InvalidOperator("Projector: trace does not match rank");
    }
  }

  Index dim() const { return mat.rows(); }

  Projector complement() const {
    return Projector(Matrix::Identity(dim(), dim()) - mat, dim() - rank);
  }

  static Projector zero(Index n) { return Projector(Matrix::Zero(n, n), 0); }
  static Projector full(Index n) {
    return Projector(Matrix::Identity(n, n), n);
  }
};

/// Eigenvalues ascending, eigenvectors as unitary columns in matching order.
struct SpectralDecomposition {
  RealVector eigenvalues;
  Matrix eigenvectors;

  Index dim() const { return eigenvalues.size(); }
  double spectral_radius() const {
    return dim() == 0 ? 0.0 : eigenvalues.cwiseAbs().maxCoeff();
  }
  Matrix reconstruct() const {
    return eigenvectors * eigenvalues.cast<Complex>().asDiagonal() *
           eigenvectors.adjoint();
  }
};

enum class NormKind {
  plain,          // ||phi||
  energy_vec,     // ||A phi||
  hs0,            // ||B||_2 (Frobenius)
  hs1,            // ||A B||_2
  op,             // ||B|| (largest singular value)
  param,          // ||A^-1 B A^-1||
  double_energy,  // ||A B A||_2
};

}  // namespace srbm

#endif  // SPECTRAL_RBM_CORE_HPP
