#ifndef SPECTRAL_RBM_REDUCED_BASIS_HPP
#define SPECTRAL_RBM_REDUCED_BASIS_HPP

#include "spectral_rbm/core.hpp"
#include "spectral_rbm/linalg.hpp"
#include "spectral_rbm/operator_family.hpp"
#include "spectral_rbm/perturbation.hpp"

#include <algorithm>
#include <vector>

namespace srbm {

enum class SpaceRecipe { derivatives, gamma_images, excited_states, custom };

/// Orthonormal basis of the reduced space with its projector.
struct ReducedSpace {
  std::vector<Vector> basis;
  Projector P;
  SpaceRecipe recipe = SpaceRecipe::custom;
  int ell = -1;
  int beta = -1;

  ReducedSpace() = default;
  ReducedSpace(std::vector<Vector> b, SpaceRecipe r, int ell_ = -1,
               int beta_ = -1)
      : basis(std::move(b)), recipe(r), ell(ell_), beta(beta_) {
    if (basis.empty()) throw EmptySpace("ReducedSpace: empty basis");
    P = density_matrix(basis);
    if (recipe != SpaceRecipe::custom && P.rank >= P.dim()) {
      throw InvalidInput("ReducedSpace: reduced space must be proper");
    }
  }

  Index dim() const { return P.dim(); }
  Index d() const { return P.rank; }

  Matrix basis_matrix() const {
    Matrix b(dim(), d());
    for (Index j = 0; j < d(); ++j) b.col(j) = basis[static_cast<std::size_t>(j)];
    return b;
  }

  Vector restrict(const Vector& full) const {
    return basis_matrix().adjoint() * full;
  }
  Vector lift(const Vector& reduced) const {
    return basis_matrix() * reduced;
  }
};

namespace detail {

// Normalize inputs before rank decisions so rank_tol acts relatively.
inline std::vector<Vector> normalized_nonzero(const std::vector<Vector>& vs) {
  double peak = 0.0;
  for (const Vector& v : vs) peak = std::max(peak, v.norm());
  std::vector<Vector> out;
  for (const Vector& v : vs) {
    double nrm = v.norm();
    if (nrm > 1e-250 * std::max(1.0, peak)) out.push_back(v / nrm);
  }
  return out;
}

}  // namespace detail

/// Span of the intermediate-normalization derivative vectors Phi^0..Phi^ell;
/// identical to the span of the unit-normalization ones.
inline ReducedSpace space_from_derivatives(const RSSeries& series, int ell,
                                           double rank_tol = 1e-8) {
  if (ell < 0 || ell > series.order) {
    throw InvalidOrder("space_from_derivatives: order out of range");
  }
  std::vector<Vector> vs(series.Phi.begin(),
                         series.Phi.begin() + (ell + 1));
  auto [basis, rank] = orthonormalize(detail::normalized_nonzero(vs), rank_tol);
  if (rank == 0) throw EmptySpace("space_from_derivatives: rank collapse");
  return ReducedSpace(std::move(basis), SpaceRecipe::derivatives, ell);
}

/// Span of { Gamma^n v } over the seed frame; equals Span(phi^n_mu).
inline ReducedSpace space_from_gamma_images(const DMSeries& dm, int ell,
                                            const std::vector<Vector>& seed,
                                            double rank_tol = 1e-8) {
  if (ell < 0 || ell > dm.order) {
    throw InvalidOrder("space_from_gamma_images: order out of range");
  }
  const Matrix& gamma0 = dm.Gamma.front();
  const auto nu = static_cast<Index>(std::lround(gamma0.trace().real()));
  std::vector<Vector> projected;
  for (const Vector& s : seed) projected.push_back(gamma0 * s);
  auto [seed_basis, seed_rank] =
      orthonormalize(detail::normalized_nonzero(projected), 1e-10);
  (void)seed_basis;
  if (seed_rank != nu) {
    throw BadSeed("space_from_gamma_images: seed does not span Gamma^0 H");
  }
  std::vector<Vector> vs;
  for (int n = 0; n <= ell; ++n) {
    for (const Vector& s : seed) {
      vs.push_back(dm.Gamma[static_cast<std::size_t>(n)] * s);
    }
  }
  auto [basis, rank] = orthonormalize(detail::normalized_nonzero(vs), rank_tol);
  if (rank == 0) throw EmptySpace("space_from_gamma_images: rank collapse");
  return ReducedSpace(std::move(basis), SpaceRecipe::gamma_images, ell);
}

/// Lowest beta+1 eigenvectors of H(0). allow_full permits beta+1 = dim and
/// tags the space as custom.
inline ReducedSpace space_from_excited_states(const OperatorFamily& family,
                                              int beta,
                                              bool allow_full = false) {
  if (beta < 0 || beta + 1 > family.dim()) {
    throw InvalidInput("space_from_excited_states: beta out of range");
  }
  SpectralDecomposition dec = spectral_decompose(assemble(family, 0.0));
  std::vector<Vector> basis;
  for (int i = 0; i <= beta; ++i) basis.push_back(dec.eigenvectors.col(i));
  bool full = (beta + 1 == family.dim());
  if (full && !allow_full) {
    throw InvalidInput("space_from_excited_states: full space needs custom flag");
  }
  return ReducedSpace(std::move(basis),
                      full ? SpaceRecipe::custom : SpaceRecipe::excited_states,
                      -1, beta);
}

/// Reduced operator in the reduced basis: (i, j) -> <b_i, H(lam) b_j>.
inline HermitianMatrix project(const OperatorFamily& family,
                               const ReducedSpace& space, double lam) {
  Matrix b = space.basis_matrix();
  Matrix t = b.adjoint() * assemble(family, lam).mat() * b;
  return HermitianMatrix(t);
}

/// One reduced eigencluster: modes live in the full space but stay inside
/// the reduced space; R holds the lifted partial inverses R_mu.
struct ReducedEigenCluster {
  double lam = 0.0;
  std::vector<std::pair<double, Vector>> modes;
  Projector Lambda;
  std::vector<Matrix> R;
  std::vector<Index> match;  // reduced eigenvalue indices backing each mode

  Index nu() const { return static_cast<Index>(modes.size()); }
  std::vector<Vector> frame() const {
    std::vector<Vector> f;
    for (const auto& m : modes) f.push_back(m.second);
    return f;
  }
  std::vector<double> energies() const {
    std::vector<double> e;
    for (const auto& m : modes) e.push_back(m.first);
    return e;
  }
};

namespace detail {

struct BranchStep {
  std::vector<double> values;
  std::vector<Vector> vectors;  // continued, orthonormal per group
  std::vector<std::pair<Index, Index>> group;  // eigen index range per branch
};

// Subspace-projection continuation: group the spectrum into numerically
// degenerate blocks, send each tracked vector to the block with maximal
// overlap, then re-orthonormalize the projections inside each block. The
// projection gauge keeps <prev, new> real positive.
inline BranchStep continue_branches(const RealVector& eigvals,
                                    const std::vector<Vector>& eigvecs,
                                    const std::vector<Vector>& prev,
                                    double group_tol, double min_overlap) {
  const auto n = static_cast<Index>(eigvecs.size());
  std::vector<std::pair<Index, Index>> groups;  // [begin, end)
  Index begin = 0;
  for (Index i = 1; i <= n; ++i) {
    if (i == n || eigvals(i) - eigvals(i - 1) > group_tol) {
      groups.emplace_back(begin, i);
      begin = i;
    }
  }

  const auto nb = static_cast<Index>(prev.size());
  std::vector<Index> chosen(static_cast<std::size_t>(nb));
  for (Index m = 0; m < nb; ++m) {
    double best = -1.0;
    Index best_g = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      double acc = 0.0;
      for (Index i = groups[g].first; i < groups[g].second; ++i) {
        acc += std::norm(eigvecs[static_cast<std::size_t>(i)].dot(
            prev[static_cast<std::size_t>(m)]));
      }
      if (acc > best) {
        best = acc;
        best_g = static_cast<Index>(g);
      }
    }
    if (std::sqrt(std::max(0.0, best)) < min_overlap) {
      throw BranchCrossing("branch continuation: ambiguous overlap");
    }
    chosen[static_cast<std::size_t>(m)] = best_g;
  }

  BranchStep out;
  out.values.resize(static_cast<std::size_t>(nb));
  out.vectors.resize(static_cast<std::size_t>(nb));
  out.group.resize(static_cast<std::size_t>(nb));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<Index> members;
    for (Index m = 0; m < nb; ++m) {
      if (chosen[static_cast<std::size_t>(m)] == static_cast<Index>(g)) {
        members.push_back(m);
      }
    }
    if (members.empty()) continue;
    std::vector<Vector> projections;
    for (Index m : members) {
      Vector v = Vector::Zero(prev.front().size());
      for (Index i = groups[g].first; i < groups[g].second; ++i) {
        const Vector& e = eigvecs[static_cast<std::size_t>(i)];
        v += e.dot(prev[static_cast<std::size_t>(m)]) * e;
      }
      projections.push_back(v);
    }
    auto [ortho, rank] = orthonormalize(projections, 1e-12);
    if (rank != static_cast<Index>(members.size())) {
      throw BranchCrossing("branch continuation: branches collapsed");
    }
    for (std::size_t j = 0; j < members.size(); ++j) {
      double value = 0.0;
      for (Index i = groups[g].first; i < groups[g].second; ++i) {
        value += std::norm(eigvecs[static_cast<std::size_t>(i)].dot(ortho[j])) *
                 eigvals(i);
      }
      out.values[static_cast<std::size_t>(members[j])] = value;
      out.vectors[static_cast<std::size_t>(members[j])] = ortho[j];
      out.group[static_cast<std::size_t>(members[j])] = groups[g];
    }
  }
  return out;
}

}  // namespace detail

/// Solve the reduced eigenproblem and attach the cluster branches. At
/// lam = 0 the targeted exact modes must be reproduced by the reduced
/// operator (no spectral pollution); away from 0 the branch identity comes
/// from maximal-overlap continuation against `reference` (defaults to the
/// lam = 0 solve).
inline ReducedEigenCluster solve_reduced(
    const OperatorFamily& family, const ReducedSpace& space, double lam,
    const EigenCluster& exact_at_0,
    const ReducedEigenCluster* reference = nullptr,
    double gap_tol_rel = tol::gap_rel) {
  const Matrix b = space.basis_matrix();
  HermitianMatrix t = project(family, space, lam);
  SpectralDecomposition dec = spectral_decompose(t);
  const Index d = space.d();
  std::vector<Vector> lifted;
  for (Index i = 0; i < d; ++i) lifted.push_back(b * dec.eigenvectors.col(i));

  const double scale =
      std::max(1e-300, operator_norm(assemble(family, 0.0).mat()));

  ReducedEigenCluster out;
  out.lam = lam;

  std::vector<Vector> prev_frame;
  if (reference == nullptr && lam != 0.0) {
    // Single shot: establish identity at lam = 0 first, then hop.
    ReducedEigenCluster at0 =
        solve_reduced(family, space, 0.0, exact_at_0, nullptr, gap_tol_rel);
    return solve_reduced(family, space, lam, exact_at_0, &at0, gap_tol_rel);
  }

  if (reference != nullptr) {
    prev_frame = reference->frame();
    detail::BranchStep step = detail::continue_branches(
        dec.eigenvalues, lifted, prev_frame, tol::degeneracy_rel * scale,
        tol::branch_overlap);
    for (std::size_t m = 0; m < prev_frame.size(); ++m) {
      out.modes.emplace_back(step.values[m], step.vectors[m]);
      out.match.push_back(step.group[m].first);
    }
  } else {
    // lam = 0: match each targeted exact mode against the reduced spectrum.
    const double match_tol = tol::match_rel * scale;
    for (const auto& [e0, phi0] : exact_at_0.modes) {
      std::vector<Index> hits;
      for (Index i = 0; i < d; ++i) {
        if (std::abs(dec.eigenvalues(i) - e0) <= match_tol) hits.push_back(i);
      }
      Vector proj = Vector::Zero(space.dim());
      for (Index i : hits) {
        proj += lifted[static_cast<std::size_t>(i)].dot(phi0) *
                lifted[static_cast<std::size_t>(i)];
      }
      double overlap = proj.norm();
      if (hits.empty() || overlap * overlap < 1.0 - 2e-8) {
        throw SpectralPollution(
            "solve_reduced: reduced operator does not reproduce the target "
            "at lam = 0");
      }
      out.modes.emplace_back(e0, proj / overlap);
      out.match.push_back(hits.front());
    }
    // Restore orthonormality at roundoff level within degenerate targets.
    std::vector<Vector> frame;
    for (auto& m : out.modes) frame.push_back(m.second);
    auto [ortho, rank] = orthonormalize(frame, 1e-10);
    if (rank != static_cast<Index>(out.modes.size())) {
      throw SpectralPollution("solve_reduced: targets collapsed at lam = 0");
    }
    for (std::size_t i = 0; i < out.modes.size(); ++i) {
      out.modes[i].second = ortho[i];
    }
  }

  out.Lambda = density_matrix(out.frame());

  // R_mu: invert (cE_mu - P H P) away from Lambda inside the reduced space,
  // then lift; the lift vanishes on P^perp H by construction.
  std::vector<Vector> reduced_frame;
  for (const auto& m : out.modes) reduced_frame.push_back(b.adjoint() * m.second);
  Matrix lam_red = Matrix::Zero(d, d);
  for (const Vector& w : reduced_frame) lam_red += w * w.adjoint();
  Projector lambda_red(0.5 * (lam_red + Matrix(lam_red.adjoint())),
                       static_cast<Index>(reduced_frame.size()));
  for (const auto& m : out.modes) {
    HermitianMatrix r_red = partial_inverse(dec, m.first, lambda_red,
                                            gap_tol_rel);
    out.R.push_back(b * r_red.mat() * b.adjoint());
  }
  return out;
}

struct SweepPoint {
  double lam = 0.0;
  EigenCluster exact;
  ReducedEigenCluster reduced;
};

namespace detail {

inline EigenCluster exact_step(const OperatorFamily& family, double lam,
                               const std::vector<Vector>& prev_frame,
                               double scale) {
  HermitianMatrix h = assemble(family, lam);
  SpectralDecomposition dec = spectral_decompose(h);
  std::vector<Vector> cols;
  for (Index i = 0; i < dec.dim(); ++i) cols.push_back(dec.eigenvectors.col(i));
  BranchStep step = continue_branches(dec.eigenvalues, cols, prev_frame,
                                      tol::degeneracy_rel * scale,
                                      tol::branch_overlap);
  EigenCluster out;
  out.lam = lam;
  std::vector<bool> selected(static_cast<std::size_t>(dec.dim()), false);
  for (std::size_t m = 0; m < prev_frame.size(); ++m) {
    out.modes.emplace_back(step.values[m], step.vectors[m]);
    for (Index i = step.group[m].first; i < step.group[m].second; ++i) {
      selected[static_cast<std::size_t>(i)] = true;
    }
  }
  out.Gamma = density_matrix(out.frame());
  double kappa = std::numeric_limits<double>::infinity();
  for (const auto& mode : out.modes) {
    for (Index i = 0; i < dec.dim(); ++i) {
      if (!selected[static_cast<std::size_t>(i)]) {
        kappa = std::min(kappa, std::abs(mode.first - dec.eigenvalues(i)));
      }
    }
  }
  out.kappa = kappa;
  return out;
}

}  // namespace detail

/// Track exact and reduced branches over a lambda grid. The grid is walked
/// outward from 0 in both directions; it must contain 0 or a point adjacent
/// to it.
inline std::vector<SweepPoint> sweep(const OperatorFamily& family,
                                     const ReducedSpace& space,
                                     std::vector<double> lam_grid,
                                     const EigenCluster& exact_at_0,
                                     double gap_tol_rel = tol::gap_rel) {
  if (lam_grid.empty()) throw InvalidInput("sweep: empty grid");
  std::sort(lam_grid.begin(), lam_grid.end());

  const double scale =
      std::max(1e-300, operator_norm(assemble(family, 0.0).mat()));
  ReducedEigenCluster reduced0 =
      solve_reduced(family, space, 0.0, exact_at_0, nullptr, gap_tol_rel);

  std::vector<SweepPoint> points(lam_grid.size());
  auto run_direction = [&](std::vector<std::size_t> order) {
    const EigenCluster* prev_exact = &exact_at_0;
    const ReducedEigenCluster* prev_reduced = &reduced0;
    for (std::size_t idx : order) {
      double lam = lam_grid[idx];
      SweepPoint pt;
      pt.lam = lam;
      if (lam == 0.0) {
        pt.exact = exact_at_0;
        pt.reduced = reduced0;
      } else {
        pt.exact = detail::exact_step(family, lam, prev_exact->frame(), scale);
        pt.reduced = solve_reduced(family, space, lam, exact_at_0,
                                   prev_reduced, gap_tol_rel);
      }
      points[idx] = std::move(pt);
      prev_exact = &points[idx].exact;
      prev_reduced = &points[idx].reduced;
    }
  };

  std::vector<std::size_t> up, down;
  for (std::size_t i = 0; i < lam_grid.size(); ++i) {
    if (lam_grid[i] >= 0.0) up.push_back(i);
    else down.push_back(i);
  }
  std::reverse(down.begin(), down.end());
  run_direction(up);
  run_direction(down);
  return points;
}

}  // namespace srbm

#endif  // SPECTRAL_RBM_REDUCED_BASIS_HPP
