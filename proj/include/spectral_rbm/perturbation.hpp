#ifndef SPECTRAL_RBM_PERTURBATION_HPP
#define SPECTRAL_RBM_PERTURBATION_HPP

#include "spectral_rbm/core.hpp"
#include "spectral_rbm/linalg.hpp"
#include "spectral_rbm/operator_family.hpp"

#include <cmath>
#include <vector>

namespace srbm {

// 2 zeta(3/2); the growth constant of the Cauchy-square majorant.
inline constexpr double two_zeta_3_2 = 5.2247506973709766866971351358;

/// Rayleigh-Schroedinger series of one analytic eigenmode branch. Phi holds
/// the intermediate normalization (all orders past 0 orthogonal to Phi^0),
/// phi the unit normalization, E the eigenvalue Taylor coefficients.
struct RSSeries {
  int order = 0;
  std::vector<double> E;
  std::vector<Vector> Phi;
  std::vector<Vector> phi;
  std::vector<double> Y;  // Taylor series of ||Phi(lambda)||
  std::vector<double> X;  // Taylor series of 1 / ||Phi(lambda)||
};

/// Degenerate cluster prepared for the first-order-lifted recursion: the
/// frame diagonalizes the restriction of H^1 to the cluster space, Eprime
/// are its eigenvalues, K0/K1 the two partial inverses of the recursion.
struct DegenerateContext {
  EigenCluster cluster;  // frame rotated to diagonalize frakH
  Matrix frakH;          // nu x nu restriction of H^1
  std::vector<double> Eprime;
  Index mu = 0;
  double kappa_frakH = 0.0;
  HermitianMatrix K0;
  HermitianMatrix K1;
};

/// McWeeny blocks and density-matrix Taylor coefficients.
struct DMSeries {
  int order = 0;
  std::vector<Matrix> Gamma;
  std::vector<Matrix> An, Bn, Cn, bn;
};

namespace detail {

inline void require_order(int ell) {
  if (ell < 0) throw InvalidOrder("series order must be nonnegative");
}

}  // namespace detail

/// Unit-normalization series from the intermediate one. Fills phi, Y, X of
/// the input; Phi must already satisfy <Phi^0, Phi^n> = 0 for n >= 1.
inline RSSeries intermediate_to_unit(RSSeries series) {
  const int ell = series.order;
  series.Y.assign(static_cast<std::size_t>(ell) + 1, 0.0);
  series.X.assign(static_cast<std::size_t>(ell) + 1, 0.0);
  series.Y[0] = series.X[0] = 1.0;
  for (int n = 2; n <= ell; ++n) {
    double acc = 0.0;
    for (int k = 1; k <= n - 1; ++k) {
      acc += 0.5 * (series.Phi[static_cast<std::size_t>(n - k)]
                        .dot(series.Phi[static_cast<std::size_t>(k)])
                        .real() -
                    series.Y[static_cast<std::size_t>(n - k)] *
                        series.Y[static_cast<std::size_t>(k)]);
    }
    series.Y[static_cast<std::size_t>(n)] = acc;
    double xacc = 0.0;
    for (int k = 0; k <= n - 2; ++k) {
      xacc -= series.X[static_cast<std::size_t>(k)] *
              series.Y[static_cast<std::size_t>(n - k)];
    }
    series.X[static_cast<std::size_t>(n)] = xacc;
  }
  series.phi.resize(static_cast<std::size_t>(ell) + 1);
  for (int n = 0; n <= ell; ++n) {
    Vector v = series.Phi[static_cast<std::size_t>(n)];
    for (int k = 0; k <= n - 2; ++k) {
      v += series.X[static_cast<std::size_t>(n - k)] *
           series.Phi[static_cast<std::size_t>(k)];
    }
    series.phi[static_cast<std::size_t>(n)] = v;
  }
  return series;
}

/// Non-degenerate Rayleigh-Schroedinger series up to the given order. The
/// operator recursion is q^n = H^n + sum_s h^{n-s} K Q^s with
/// E^n = <Phi^0, q^n Phi^0>, Q^n = q^n - E^n and Phi^n = K Q^n Phi^0.
inline RSSeries rs_nondegenerate(const OperatorFamily& family,
                                 const EigenCluster& mode, int ell,
                                 double gap_tol_rel = tol::gap_rel) {
  detail::require_order(ell);
  if (mode.nu() != 1) {
    throw InvalidInput("rs_nondegenerate: cluster must contain one mode");
  }
  const Index n = family.dim();
  const Vector phi0 = mode.modes.front().second;
  const double e0 = mode.modes.front().first;

  Matrix k = cluster_partial_inverse(family, mode, e0, gap_tol_rel).mat();

  RSSeries out;
  out.order = ell;
  out.E.assign(static_cast<std::size_t>(ell) + 1, 0.0);
  out.Phi.assign(static_cast<std::size_t>(ell) + 1, Vector::Zero(n));
  out.E[0] = e0;
  out.Phi[0] = phi0;

  std::vector<Matrix> bigQ;  // Q^1 .. on demand
  bigQ.reserve(static_cast<std::size_t>(std::max(ell, 0)));
  auto h_term = [&](int m) -> Matrix {
    Matrix hm = family.term(m);
    if (m <= ell && m >= 0) {
      hm -= out.E[static_cast<std::size_t>(m)] * Matrix::Identity(n, n);
    }
    return hm;
  };

  for (int m = 1; m <= ell; ++m) {
    Matrix q = family.term(m);
    for (int s = 1; s <= m - 1; ++s) {
      q += h_term(m - s) * k * bigQ[static_cast<std::size_t>(s - 1)];
    }
    double em = phi0.dot(q * phi0).real();
    out.E[static_cast<std::size_t>(m)] = em;
    Matrix qm = q - em * Matrix::Identity(n, n);
    bigQ.push_back(qm);
    out.Phi[static_cast<std::size_t>(m)] = k * (qm * phi0);
  }
  return intermediate_to_unit(std::move(out));
}

/// Restriction of H^1 to an exactly degenerate cluster. Rotates the cluster
/// frame into the basis diagonalizing it, checks that the requested branch
/// is lifted at first order, and assembles the two partial inverses.
inline DegenerateContext first_order_matrix(const OperatorFamily& family,
                                            const EigenCluster& cluster,
                                            Index mu = 0,
                                            double gap_tol_rel = tol::gap_rel) {
  const Index nu = cluster.nu();
  if (mu < 0 || mu >= nu) throw InvalidInput("first_order_matrix: bad mu");
  HermitianMatrix hlam = assemble(family, cluster.lam);
  const double scale =
      std::max(1e-300, operator_norm(hlam.mat()));
  for (const auto& m : cluster.modes) {
    if (std::abs(m.first - cluster.modes.front().first) >
        tol::degeneracy_rel * scale) {
      throw InvalidInput("first_order_matrix: cluster is not degenerate");
    }
  }

  Matrix h1 = family.term(1);
  Matrix frak(nu, nu);
  auto frame = cluster.frame();
  for (Index a = 0; a < nu; ++a) {
    for (Index b = 0; b < nu; ++b) {
      frak(a, b) = frame[static_cast<std::size_t>(a)].dot(
          h1 * frame[static_cast<std::size_t>(b)]);
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (frak + Matrix(frak.adjoint())));

  DegenerateContext ctx;
  ctx.cluster = cluster;
  ctx.frakH = frak;
  ctx.mu = mu;
  ctx.Eprime.resize(static_cast<std::size_t>(nu));
  std::vector<Vector> rotated(static_cast<std::size_t>(nu));
  for (Index a = 0; a < nu; ++a) {
    ctx.Eprime[static_cast<std::size_t>(a)] = es.eigenvalues()(a);
    Vector v = Vector::Zero(cluster.dim());
    for (Index b = 0; b < nu; ++b) {
      v += es.eigenvectors()(b, a) * frame[static_cast<std::size_t>(b)];
    }
    rotated[static_cast<std::size_t>(a)] = v;
  }
  for (Index a = 0; a < nu; ++a) {
    ctx.cluster.modes[static_cast<std::size_t>(a)].second =
        rotated[static_cast<std::size_t>(a)];
  }

  const double h1_scale = std::max(1e-300, operator_norm(h1));
  double kappa = std::numeric_limits<double>::infinity();
  for (Index a = 0; a < nu; ++a) {
    if (a == mu) continue;
    kappa = std::min(kappa, std::abs(ctx.Eprime[static_cast<std::size_t>(mu)] -
                                     ctx.Eprime[static_cast<std::size_t>(a)]));
  }
  if (nu > 1 && kappa <= gap_tol_rel * h1_scale) {
    throw DegeneracyNotLifted(
        "first_order_matrix: E'_mu is degenerate for frakH");
  }
  ctx.kappa_frakH = kappa;

  ctx.K0 = cluster_partial_inverse(family, cluster,
                                   cluster.modes.front().first, gap_tol_rel);
  // K^1 = sum_{a != mu} (E'_mu - E'_a)^-1 |phi_a><phi_a| on the cluster space.
  Matrix k1 = Matrix::Zero(cluster.dim(), cluster.dim());
  for (Index a = 0; a < nu; ++a) {
    if (a == mu) continue;
    double d = ctx.Eprime[static_cast<std::size_t>(mu)] -
               ctx.Eprime[static_cast<std::size_t>(a)];
    k1 += (1.0 / d) * rotated[static_cast<std::size_t>(a)] *
          rotated[static_cast<std::size_t>(a)].adjoint();
  }
  ctx.K1 = HermitianMatrix(k1);
  return ctx;
}

/// Degenerate Rayleigh-Schroedinger series (degeneracy lifted at first
/// order) for the branch selected in the context. Uses the double recursion
/// q^n_0 = H^n + sum_s h^s K^0 Q^{n-s}_0,
/// q^n_1 = q^n_0 + sum_{s>=2} Q^s_0 K^1 Q^{n-s+1}_1,
/// with E^m = <phi^0_mu, q^m_1 phi^0_mu> and
/// Phi^n = (K^0 Q^n_1 + K^1 Q^{n+1}_1) phi^0_mu.
inline RSSeries rs_degenerate(const OperatorFamily& family,
                              const DegenerateContext& ctx, int ell) {
  detail::require_order(ell);
  const Index n = family.dim();
  const Vector phi0 =
      ctx.cluster.modes[static_cast<std::size_t>(ctx.mu)].second;
  const Matrix k0 = ctx.K0.mat();
  const Matrix k1 = ctx.K1.mat();
  const Matrix id = Matrix::Identity(n, n);

  const int top = ell + 1;  // Phi^ell needs Q^{ell+1}
  std::vector<double> e(static_cast<std::size_t>(top) + 1, 0.0);
  e[0] = ctx.cluster.modes[static_cast<std::size_t>(ctx.mu)].first;
  std::vector<Matrix> q0(static_cast<std::size_t>(top) + 1),
      q1(static_cast<std::size_t>(top) + 1),
      Q0(static_cast<std::size_t>(top) + 1),
      Q1(static_cast<std::size_t>(top) + 1);

  auto h_term = [&](int m) -> Matrix {
    return family.term(m) - e[static_cast<std::size_t>(m)] * id;
  };

  for (int m = 1; m <= top; ++m) {
    Matrix a = family.term(m);
    for (int s = 1; s <= m - 1; ++s) {
      a += h_term(s) * k0 * Q0[static_cast<std::size_t>(m - s)];
    }
    q0[static_cast<std::size_t>(m)] = a;
    Matrix b = a;
    for (int s = 2; s <= m - 1; ++s) {
      b += Q0[static_cast<std::size_t>(s)] * k1 *
           Q1[static_cast<std::size_t>(m - s + 1)];
    }
    q1[static_cast<std::size_t>(m)] = b;
    e[static_cast<std::size_t>(m)] = phi0.dot(b * phi0).real();
    Q0[static_cast<std::size_t>(m)] =
        a - e[static_cast<std::size_t>(m)] * id;
    Q1[static_cast<std::size_t>(m)] =
        b - e[static_cast<std::size_t>(m)] * id;
  }

  RSSeries out;
  out.order = ell;
  out.E.assign(static_cast<std::size_t>(ell) + 1, 0.0);
  out.Phi.assign(static_cast<std::size_t>(ell) + 1, Vector::Zero(n));
  out.E[0] = e[0];
  out.Phi[0] = phi0;
  for (int m = 1; m <= ell; ++m) {
    out.E[static_cast<std::size_t>(m)] = e[static_cast<std::size_t>(m)];
    out.Phi[static_cast<std::size_t>(m)] =
        k0 * (Q1[static_cast<std::size_t>(m)] * phi0) +
        k1 * (Q1[static_cast<std::size_t>(m + 1)] * phi0);
  }
  return intermediate_to_unit(std::move(out));
}

/// Majorant alpha (2 zeta(3/2) alpha beta)^{n-1} n^{-3/2}.
inline double cauchy_square_bound(double alpha, double beta, int n) {
  if (alpha <= 0 || beta <= 0) {
    throw InvalidInput("cauchy_square_bound: alpha, beta must be positive");
  }
  if (n < 1) throw InvalidOrder("cauchy_square_bound: n must be >= 1");
  return alpha * std::pow(two_zeta_3_2 * alpha * beta, n - 1) *
         std::pow(static_cast<double>(n), -1.5);
}

/// Exact recursion x_1 = alpha, x_n = beta sum_{s<n} x_{n-s} x_s.
inline std::vector<double> cauchy_square_sequence(double alpha, double beta,
                                                  int n) {
  if (alpha <= 0 || beta <= 0) {
    throw InvalidInput("cauchy_square_sequence: alpha, beta must be positive");
  }
  if (n < 1) throw InvalidOrder("cauchy_square_sequence: n must be >= 1");
  std::vector<long double> x(static_cast<std::size_t>(n) + 1, 0.0L);
  x[1] = alpha;
  for (int m = 2; m <= n; ++m) {
    long double acc = 0.0L;
    for (int s = 1; s <= m - 1; ++s) {
      acc += x[static_cast<std::size_t>(m - s)] * x[static_cast<std::size_t>(s)];
    }
    x[static_cast<std::size_t>(m)] = beta * acc;
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int m = 1; m <= n; ++m) {
    out[static_cast<std::size_t>(m - 1)] =
        static_cast<double>(x[static_cast<std::size_t>(m)]);
  }
  return out;
}

/// log x_n for the same recursion. Uses the rescaling x_n(alpha, beta) =
/// alpha (alpha beta)^{n-1} x_n(1, 1), which keeps the evaluation finite for
/// parameter ranges where the sequence itself overflows.
inline std::vector<double> cauchy_square_log_sequence(double alpha,
                                                      double beta, int n) {
  std::vector<double> unit = cauchy_square_sequence(1.0, 1.0, n);
  std::vector<double> out(static_cast<std::size_t>(n));
  const double lab = std::log(alpha * beta);
  for (int m = 1; m <= n; ++m) {
    out[static_cast<std::size_t>(m - 1)] =
        std::log(alpha) + (m - 1) * lab +
        std::log(unit[static_cast<std::size_t>(m - 1)]);
  }
  return out;
}

inline double cauchy_square_log_bound(double alpha, double beta, int n) {
  return std::log(alpha) + (n - 1) * std::log(two_zeta_3_2 * alpha * beta) -
         1.5 * std::log(static_cast<double>(n));
}

/// Density-matrix perturbation coefficients Gamma^n by the block recursion
/// A_n = -sum (A A + B* B), C_n = sum (C C + B B*),
/// b_n = P^perp sum (H (A + B) - (B + C) H) P,
/// B_n = sum_mu K_mu(0) b_n P_mu, Gamma^n = A_n + B_n + B_n* + C_n.
inline DMSeries dm_coefficients(const OperatorFamily& family,
                                const EigenCluster& cluster, int order,
                                double gap_tol_rel = tol::gap_rel) {
  detail::require_order(order);
  const Index n = family.dim();
  const Matrix p = cluster.Gamma.mat;
  const Matrix pperp = Matrix::Identity(n, n) - p;

  std::vector<Matrix> kmu;
  std::vector<Matrix> pmu;
  for (const auto& mode : cluster.modes) {
    kmu.push_back(
        cluster_partial_inverse(family, cluster, mode.first, gap_tol_rel)
            .mat());
    pmu.push_back(mode.second * mode.second.adjoint());
  }

  DMSeries out;
  out.order = order;
  const auto sz = static_cast<std::size_t>(order) + 1;
  out.Gamma.assign(sz, Matrix::Zero(n, n));
  out.An.assign(sz, Matrix::Zero(n, n));
  out.Bn.assign(sz, Matrix::Zero(n, n));
  out.Cn.assign(sz, Matrix::Zero(n, n));
  out.bn.assign(sz, Matrix::Zero(n, n));
  out.An[0] = p;
  out.Gamma[0] = p;

  for (int m = 1; m <= order; ++m) {
    Matrix am = Matrix::Zero(n, n);
    Matrix cm = Matrix::Zero(n, n);
    for (int k = 1; k <= m - 1; ++k) {
      const auto i = static_cast<std::size_t>(m - k);
      const auto j = static_cast<std::size_t>(k);
      am -= out.An[i] * out.An[j] + out.Bn[i].adjoint() * out.Bn[j];
      cm += out.Cn[i] * out.Cn[j] + out.Bn[i] * out.Bn[j].adjoint();
    }
    Matrix bm_rhs = Matrix::Zero(n, n);
    for (int k = 0; k <= m - 1; ++k) {
      const auto j = static_cast<std::size_t>(k);
      Matrix hterm = family.term(m - k);
      bm_rhs += hterm * (out.An[j] + out.Bn[j]) -
                (out.Bn[j] + out.Cn[j]) * hterm;
    }
    Matrix bm = pperp * bm_rhs * p;
    Matrix bigB = Matrix::Zero(n, n);
    for (std::size_t mu = 0; mu < kmu.size(); ++mu) {
      bigB += kmu[mu] * bm * pmu[mu];
    }
    const auto s = static_cast<std::size_t>(m);
    out.An[s] = am;
    out.Cn[s] = cm;
    out.bn[s] = bm;
    out.Bn[s] = bigB;
    out.Gamma[s] = am + bigB + bigB.adjoint() + cm;
  }
  return out;
}

/// Commutator super-operator [H(lam), .] of the cluster's operator.
inline Matrix liouvillian_apply(const OperatorFamily& family,
                                const EigenCluster& cluster, const Matrix& f) {
  Matrix h = assemble(family, cluster.lam).mat();
  return h * f - f * h;
}

/// Partial inverse of the Liouvillian: L+ F = -sum_mu K_mu(0) F P_mu.
/// Satisfies L+ L F = P^perp F P on the cluster projector P.
inline Matrix liouvillian_pinv_apply(const OperatorFamily& family,
                                     const EigenCluster& cluster,
                                     const Matrix& f,
                                     double gap_tol_rel = tol::gap_rel) {
  if (f.rows() != cluster.dim() || f.cols() != cluster.dim()) {
    throw ShapeMismatch("liouvillian_pinv_apply: shape mismatch");
  }
  Matrix out = Matrix::Zero(f.rows(), f.cols());
  for (const auto& mode : cluster.modes) {
    Matrix k =
        cluster_partial_inverse(family, cluster, mode.first, gap_tol_rel)
            .mat();
    out -= k * f * (mode.second * mode.second.adjoint());
  }
  return out;
}

/// Geometric envelope a b^n dominating the series coefficients; least
/// squares in log scale, then a inflated until the envelope majorizes every
/// coefficient. All-zero tails report b = 0.
inline std::pair<double, double> series_growth_fit(
    const std::vector<double>& magnitudes) {
  if (magnitudes.size() < 3) {
    throw InvalidInput("series_growth_fit: need at least 3 coefficients");
  }
  const double peak =
      *std::max_element(magnitudes.begin(), magnitudes.end());
  if (peak <= 0.0) return {0.0, 0.0};
  std::vector<std::pair<double, double>> pts;  // (n, log c_n)
  for (std::size_t i = 0; i < magnitudes.size(); ++i) {
    if (magnitudes[i] > peak * 1e-250) {
      pts.emplace_back(static_cast<double>(i), std::log(magnitudes[i]));
    }
  }
  bool tail_alive = false;
  for (std::size_t i = 1; i < magnitudes.size(); ++i) {
    if (magnitudes[i] > peak * 1e-250) tail_alive = true;
  }
  if (!tail_alive || pts.size() < 2) {
    return {peak, 0.0};
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double npts = static_cast<double>(pts.size());
  const double denom = npts * sxx - sx * sx;
  double slope = denom > 0 ? (npts * sxy - sx * sy) / denom : 0.0;
  double b = std::exp(slope);
  double a = 0.0;
  for (std::size_t i = 0; i < magnitudes.size(); ++i) {
    if (magnitudes[i] <= 0.0) continue;
    a = std::max(a, magnitudes[i] / std::pow(b, static_cast<double>(i)));
  }
  return {a, b};
}

inline std::vector<double> series_magnitudes(const RSSeries& series,
                                             const HermitianMatrix& a) {
  std::vector<double> mags;
  for (std::size_t i = 0; i <= static_cast<std::size_t>(series.order); ++i) {
    double m = std::abs(series.E[i]);
    m = std::max(m, vec_norm_ed(series.Phi[i], a, 1));
    if (i < series.phi.size()) {
      m = std::max(m, vec_norm_ed(series.phi[i], a, 1));
    }
    mags.push_back(m);
  }
  return mags;
}

inline std::vector<double> series_magnitudes(const DMSeries& series,
                                             const HermitianMatrix& a) {
  std::vector<double> mags;
  for (const Matrix& g : series.Gamma) {
    mags.push_back((a.mat() * g * a.mat()).norm());
  }
  return mags;
}

inline std::pair<double, double> series_growth_fit(const RSSeries& series,
                                                   const HermitianMatrix& a) {
  return series_growth_fit(series_magnitudes(series, a));
}

inline std::pair<double, double> series_growth_fit(const DMSeries& series,
                                                   const HermitianMatrix& a) {
  return series_growth_fit(series_magnitudes(series, a));
}

}  // namespace srbm

#endif  // SPECTRAL_RBM_PERTURBATION_HPP
