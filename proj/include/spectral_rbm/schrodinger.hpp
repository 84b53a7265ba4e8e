#ifndef SPECTRAL_RBM_SCHRODINGER_HPP
#define SPECTRAL_RBM_SCHRODINGER_HPP

#include "spectral_rbm/certifier.hpp"
#include "spectral_rbm/core.hpp"
#include "spectral_rbm/operator_family.hpp"
#include "spectral_rbm/parallel.hpp"
#include "spectral_rbm/perturbation.hpp"
#include "spectral_rbm/reduced_basis.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace srbm::lab {

/// Uniform periodic grid with an odd number of collocation points.
struct Grid1D {
  double L = 2.0 * std::numbers::pi;
  int N = 129;

  Grid1D() = default;
  Grid1D(double length, int points) : L(length), N(points) {
    if (!(L > 0)) throw InvalidInput("Grid1D: period must be positive");
    if (N < 5 || N % 2 == 0) throw InvalidInput("Grid1D: N must be odd, >= 5");
  }

  double x(int j) const { return L * static_cast<double>(j) / N; }
  int half_modes() const { return (N - 1) / 2; }
};

enum class PotentialKind { gaussian_bumps, cosine_series, samples };

/// Real L-periodic potential in one of three parameterizations.
struct PotentialSpec {
  PotentialKind kind = PotentialKind::samples;
  // gaussian_bumps
  std::vector<double> centers, widths, amplitudes;
  // cosine_series: pairs (k, coefficient)
  std::vector<std::pair<int, double>> cos_terms, sin_terms;
  // samples
  std::vector<double> values;

  static PotentialSpec zero() {
    PotentialSpec p;
    p.kind = PotentialKind::cosine_series;
    return p;
  }

  static PotentialSpec gaussians(std::vector<double> c, std::vector<double> w,
                                 std::vector<double> a) {
    if (c.size() != w.size() || c.size() != a.size()) {
      throw InvalidInput("PotentialSpec: bump parameter lengths differ");
    }
    PotentialSpec p;
    p.kind = PotentialKind::gaussian_bumps;
    p.centers = std::move(c);
    p.widths = std::move(w);
    p.amplitudes = std::move(a);
    return p;
  }

  static PotentialSpec cosine(std::vector<std::pair<int, double>> cs,
                              std::vector<std::pair<int, double>> sn = {}) {
    PotentialSpec p;
    p.kind = PotentialKind::cosine_series;
    p.cos_terms = std::move(cs);
    p.sin_terms = std::move(sn);
    return p;
  }

  static PotentialSpec sampled(std::vector<double> v) {
    PotentialSpec p;
    p.kind = PotentialKind::samples;
    p.values = std::move(v);
    return p;
  }

  double evaluate(double x, double L) const {
    switch (kind) {
      case PotentialKind::gaussian_bumps: {
        double acc = 0.0;
        for (std::size_t i = 0; i < centers.size(); ++i) {
          // Periodize by summing images; the tails die out fast.
          for (int m = -4; m <= 4; ++m) {
            double t = (x - centers[i] + m * L) / widths[i];
            acc += amplitudes[i] * std::exp(-t * t);
          }
        }
        return acc;
      }
      case PotentialKind::cosine_series: {
        double acc = 0.0;
        const double w = 2.0 * std::numbers::pi / L;
        for (const auto& [k, c] : cos_terms) acc += c * std::cos(w * k * x);
        for (const auto& [k, c] : sin_terms) acc += c * std::sin(w * k * x);
        return acc;
      }
      case PotentialKind::samples:
        throw InvalidInput("PotentialSpec: sampled potential has no closed form");
    }
    return 0.0;
  }

  std::vector<double> sample(const Grid1D& grid) const {
    if (kind == PotentialKind::samples) {
      if (static_cast<int>(values.size()) != grid.N) {
        throw InvalidInput("PotentialSpec: sample count differs from grid");
      }
      return values;
    }
    std::vector<double> out(static_cast<std::size_t>(grid.N));
    for (int j = 0; j < grid.N; ++j) {
      out[static_cast<std::size_t>(j)] = evaluate(grid.x(j), grid.L);
    }
    return out;
  }
};

/// Paper-style default instance: one Gaussian well, one cosine, one sine.
struct LabDefaults {
  static Grid1D grid() { return Grid1D(2.0 * std::numbers::pi, 129); }
  static PotentialSpec V0() {
    const double L = 2.0 * std::numbers::pi;
    return PotentialSpec::gaussians({L / 2.0}, {L / 10.0}, {-4.0});
  }
  static PotentialSpec V1() { return PotentialSpec::cosine({{1, 2.0}}); }
  static PotentialSpec V2() {
    return PotentialSpec::cosine({}, {{2, 1.0}});
  }
};

struct DiscretizedFamily {
  OperatorFamily family;
  std::vector<std::string> warnings;
};

namespace detail {

inline Matrix dft_matrix(const Grid1D& grid) {
  const int n = grid.N;
  const int half = grid.half_modes();
  Matrix f(n, n);
  const double w = 2.0 * std::numbers::pi / n;
  for (int kk = -half; kk <= half; ++kk) {
    for (int j = 0; j < n; ++j) {
      f(kk + half, j) =
          std::exp(Complex(0.0, -w * kk * j)) / std::sqrt(double(n));
    }
  }
  return f;
}

inline RealVector fourier_symbol(const Grid1D& grid,
                                 double (*fn)(double)) {
  const int half = grid.half_modes();
  RealVector s(grid.N);
  for (int kk = -half; kk <= half; ++kk) {
    double freq = 2.0 * std::numbers::pi * kk / grid.L;
    s(kk + half) = fn(freq);
  }
  return s;
}

inline void check_alias(const Grid1D& grid, const std::vector<double>& v,
                        const std::string& name,
                        std::vector<std::string>& warnings) {
  // Estimate the potential bandwidth from the decay of its DFT: sizable
  // content in the top 20% of |k| means the grid undersamples it.
  Matrix f = dft_matrix(grid);
  Vector samples(grid.N);
  for (int j = 0; j < grid.N; ++j) samples(j) = v[static_cast<std::size_t>(j)];
  Vector coeffs = f * samples;
  const int half = grid.half_modes();
  double peak = coeffs.cwiseAbs().maxCoeff();
  double high = 0.0;
  for (int kk = -half; kk <= half; ++kk) {
    if (std::abs(kk) >= (4 * half) / 5) {
      high = std::max(high, std::abs(coeffs(kk + half)));
    }
  }
  if (peak > 0 && high > 1e-10 * peak) {
    warnings.push_back("AliasWarning: potential " + name +
                       " has significant content near the grid Nyquist mode");
  }
}

}  // namespace detail

/// H^0 = -Laplacian + V0, H^1 = V1, H^2 = V2 on the periodic grid, with the
/// Laplacian realized spectrally and A = (1 - Laplacian)^{1/2}. Everything
/// is conjugated into the position representation, where real potentials
/// give real symmetric matrices.
inline DiscretizedFamily discretize(const Grid1D& grid,
                                    const PotentialSpec& V0,
                                    const PotentialSpec& V1,
                                    const PotentialSpec& V2) {
  const int n = grid.N;
  Matrix f = detail::dft_matrix(grid);
  RealVector ksq = detail::fourier_symbol(
      grid, +[](double freq) { return freq * freq; });
  RealVector asym = detail::fourier_symbol(
      grid, +[](double freq) { return std::sqrt(1.0 + freq * freq); });

  Matrix minus_laplacian =
      f.adjoint() * ksq.cast<Complex>().asDiagonal() * f;
  Matrix a_mat = f.adjoint() * asym.cast<Complex>().asDiagonal() * f;

  DiscretizedFamily out;
  auto v0 = V0.sample(grid);
  auto v1 = V1.sample(grid);
  auto v2 = V2.sample(grid);
  detail::check_alias(grid, v0, "V0", out.warnings);
  detail::check_alias(grid, v1, "V1", out.warnings);
  detail::check_alias(grid, v2, "V2", out.warnings);

  Matrix h0 = minus_laplacian;
  for (int j = 0; j < n; ++j) h0(j, j) += v0[static_cast<std::size_t>(j)];
  Matrix h1 = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) h1(j, j) = v1[static_cast<std::size_t>(j)];
  Matrix h2 = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) h2(j, j) = v2[static_cast<std::size_t>(j)];

  out.family = OperatorFamily(
      HermitianMatrix(a_mat),
      {HermitianMatrix(h0), HermitianMatrix(h1), HermitianMatrix(h2)});
  return out;
}

inline std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0) || !(hi > lo) || points < 2) {
    throw InvalidInput("log_grid: bad range");
  }
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    double t = static_cast<double>(i) / (points - 1);
    g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, t);
  }
  return g;
}

/// Least-squares slope of log(err) against log(lam) over a lambda window.
inline double fit_loglog_slope(const std::vector<double>& lams,
                               const std::vector<double>& errs, double lo,
                               double hi, double floor = 1e-300) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < lams.size(); ++i) {
    if (lams[i] < lo || lams[i] > hi || !(errs[i] > floor)) continue;
    double x = std::log(lams[i]);
    double y = std::log(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) throw InvalidInput("fit_loglog_slope: too few usable points");
  double denom = m * sxx - sx * sx;
  return (m * sxy - sx * sy) / denom;
}

struct EllSweepRow {
  int ell;
  double lam;
  double err_vec_rbmpt;
  double err_vec_pt;
  double err_eig_rbmpt;
  double err_eig_pt;
};

struct EllSweepSlopes {
  int ell;
  double slope_vec_rbmpt;
  double slope_vec_pt;
  double slope_eig_rbmpt;
  double slope_eig_pt;
};

struct EllSweepResult {
  std::vector<EllSweepRow> rows;
  std::vector<EllSweepSlopes> slopes;
  std::vector<std::string> warnings;
};

struct LabConfig {
  Grid1D grid = LabDefaults::grid();
  PotentialSpec V0 = LabDefaults::V0();
  PotentialSpec V1 = LabDefaults::V1();
  PotentialSpec V2 = LabDefaults::V2();
  std::vector<double> lambda_grid = log_grid(1e-3, 0.5, 28);
  int ell_max = 2;
  int delta = 0;
  double fit_lo = 1e-3;
  double fit_hi = 1e-2;
  std::vector<int> beta_list = {0, 1, 2, 3, 4, 5};
  double es_compare_lam = 0.3;
  std::uint64_t seed = 0;
};

namespace detail {

// |E - <v, H v>| evaluated through the quadratic identity
// <phi - v, (E - H)(phi - v)>; no subtractive cancellation, so slopes stay
// clean far below the eigensolver noise floor.
inline double quadratic_eig_err(const Matrix& h, double e, const Vector& phi,
                                const Vector& v) {
  Vector d = phi - v;
  return std::abs(d.dot(e * d - h * d).real());
}

inline double aligned_vec_err(const Vector& phi, const Vector& v,
                              const HermitianMatrix& a, int delta) {
  Vector w = v * alignment_phase(v, phi);
  return vec_norm_ed(phi - w, a, delta);
}

}  // namespace detail

/// Error-versus-lambda sweep for RBM+PT and PT at orders 0..ell_max, plus
/// fitted small-lambda slopes.
inline EllSweepResult experiment_ell_sweep(const LabConfig& config) {
  DiscretizedFamily disc =
      discretize(config.grid, config.V0, config.V1, config.V2);
  const OperatorFamily& family = disc.family;

  EigenCluster ground = select_cluster(family, 0.0, {0});
  const int top_order = config.ell_max + 1;
  RSSeries series = rs_nondegenerate(family, ground, top_order);

  EllSweepResult out;
  out.warnings = disc.warnings;
  std::vector<std::vector<EllSweepRow>> shards(
      static_cast<std::size_t>(config.ell_max) + 1);
  std::vector<EllSweepSlopes> slope_shards(
      static_cast<std::size_t>(config.ell_max) + 1);

  parallel_for_index(
      static_cast<std::size_t>(config.ell_max) + 1, [&](std::size_t li) {
        const int ell = static_cast<int>(li);
        ReducedSpace space = space_from_derivatives(series, ell);
        auto points = sweep(family, space, config.lambda_grid, ground);
        std::vector<double> lams, ev_rbm, ev_pt, ee_rbm, ee_pt;
        for (const auto& pt : points) {
          const Matrix h = assemble(family, pt.lam).mat();
          const double e_exact = pt.exact.modes.front().first;
          const Vector& phi = pt.exact.modes.front().second;
          const Vector& psi = pt.reduced.modes.front().second;
          Vector pt_vec = pt_approximant(series, ell, pt.lam);

          EllSweepRow row;
          row.ell = ell;
          row.lam = pt.lam;
          row.err_vec_rbmpt =
              detail::aligned_vec_err(phi, psi, family.A, config.delta);
          row.err_vec_pt =
              detail::aligned_vec_err(phi, pt_vec, family.A, config.delta);
          row.err_eig_rbmpt = detail::quadratic_eig_err(h, e_exact, phi, psi);
          row.err_eig_pt = detail::quadratic_eig_err(h, e_exact, phi, pt_vec);
          shards[li].push_back(row);

          lams.push_back(pt.lam);
          ev_rbm.push_back(row.err_vec_rbmpt);
          ev_pt.push_back(row.err_vec_pt);
          ee_rbm.push_back(row.err_eig_rbmpt);
          ee_pt.push_back(row.err_eig_pt);
        }
        EllSweepSlopes s;
        s.ell = ell;
        s.slope_vec_rbmpt =
            fit_loglog_slope(lams, ev_rbm, config.fit_lo, config.fit_hi);
        s.slope_vec_pt =
            fit_loglog_slope(lams, ev_pt, config.fit_lo, config.fit_hi);
        s.slope_eig_rbmpt =
            fit_loglog_slope(lams, ee_rbm, config.fit_lo, config.fit_hi);
        s.slope_eig_pt =
            fit_loglog_slope(lams, ee_pt, config.fit_lo, config.fit_hi);
        slope_shards[li] = s;
      });

  for (auto& shard : shards) {
    out.rows.insert(out.rows.end(), shard.begin(), shard.end());
  }
  out.slopes = slope_shards;
  return out;
}

struct XiGrowthRow {
  int ell;
  double xi_pt;
  double xi_rbmpt;
  double xi_l;
  double xi_l_simple;
};

struct XiGrowthResult {
  std::vector<XiGrowthRow> rows;
  double s_pt = 0.0;  // geometric rate of xi_pt against ell
  double s_ec = 0.0;  // geometric rate of xi_rbmpt against ell
};

/// Acceleration constants against the order, with geometric fits.
inline XiGrowthResult experiment_xi_growth(const LabConfig& config) {
  if (config.ell_max < 2) {
    throw InvalidInput("experiment_xi_growth: ell_max must be >= 2");
  }
  DiscretizedFamily disc =
      discretize(config.grid, config.V0, config.V1, config.V2);
  const OperatorFamily& family = disc.family;
  EigenCluster ground = select_cluster(family, 0.0, {0});
  RSSeries series = rs_nondegenerate(family, ground, config.ell_max + 1);

  XiGrowthResult out;
  std::vector<double> log_pt, log_ec, xs;
  for (int ell = 0; ell <= config.ell_max; ++ell) {
    ReducedSpace space = space_from_derivatives(series, ell);
    ReducedEigenCluster red0 = solve_reduced(family, space, 0.0, ground);
    XiRecord xi = xi_constants(family, series, space, red0.R.front(), ell,
                               config.delta);
    XiGrowthRow row{ell, xi.xi_pt, xi.xi_rbmpt, xi.xi_l, xi.xi_l_simple};
    out.rows.push_back(row);
    if (xi.xi_pt > 0 && xi.xi_rbmpt > 0) {
      xs.push_back(static_cast<double>(ell));
      log_pt.push_back(std::log(xi.xi_pt));
      log_ec.push_back(std::log(xi.xi_rbmpt));
    }
  }
  auto fit = [](const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sx += x[i];
      sy += y[i];
      sxx += x[i] * x[i];
      sxy += x[i] * y[i];
    }
    double nn = static_cast<double>(x.size());
    return std::exp((nn * sxy - sx * sy) / (nn * sxx - sx * sx));
  };
  if (xs.size() >= 2) {
    out.s_pt = fit(xs, log_pt);
    out.s_ec = fit(xs, log_ec);
  }
  return out;
}

struct EsComparisonRow {
  double lam;
  int budget;  // reduced dimension
  double err_rbmpt;
  double err_rbmes;
};

/// Equal-budget comparison between derivative spaces and excited-state
/// spaces.
inline std::vector<EsComparisonRow> experiment_es_comparison(
    const LabConfig& config) {
  DiscretizedFamily disc =
      discretize(config.grid, config.V0, config.V1, config.V2);
  const OperatorFamily& family = disc.family;
  EigenCluster ground = select_cluster(family, 0.0, {0});
  const int beta_max =
      *std::max_element(config.beta_list.begin(), config.beta_list.end());
  RSSeries series = rs_nondegenerate(family, ground, beta_max + 1);

  std::vector<EsComparisonRow> rows;
  std::vector<std::vector<EsComparisonRow>> shards(config.beta_list.size());
  parallel_for_index(config.beta_list.size(), [&](std::size_t bi) {
    const int beta = config.beta_list[bi];
    ReducedSpace pt_space = space_from_derivatives(series, beta);
    bool full = beta + 1 >= family.dim();
    ReducedSpace es_space = space_from_excited_states(family, beta, full);
    auto pt_points = sweep(family, pt_space, config.lambda_grid, ground);
    auto es_points = sweep(family, es_space, config.lambda_grid, ground);
    for (std::size_t i = 0; i < pt_points.size(); ++i) {
      EsComparisonRow row;
      row.lam = pt_points[i].lam;
      row.budget = beta + 1;
      const Vector& phi = pt_points[i].exact.modes.front().second;
      row.err_rbmpt = detail::aligned_vec_err(
          phi, pt_points[i].reduced.modes.front().second, family.A,
          config.delta);
      row.err_rbmes = detail::aligned_vec_err(
          phi, es_points[i].reduced.modes.front().second, family.A,
          config.delta);
      shards[bi].push_back(row);
    }
  });
  for (auto& shard : shards) {
    rows.insert(rows.end(), shard.begin(), shard.end());
  }
  return rows;
}

}  // namespace srbm::lab

#endif  // SPECTRAL_RBM_SCHRODINGER_HPP
