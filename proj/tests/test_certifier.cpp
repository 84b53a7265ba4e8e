#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace srbm;
using oracle::TestRng;

namespace {

// Reduced operator of a bare Hermitian matrix (no family needed here).
HermitianMatrix project_plain(const Matrix& h, const ReducedSpace& space) {
  Matrix b = space.basis_matrix();
  return HermitianMatrix(Matrix(b.adjoint() * h * b));
}

SpectralDecomposition reduced_dec(const Matrix& h, const ReducedSpace& sp) {
  return spectral_decompose(project_plain(h, sp));
}

// Instances for the identity checks: any Hermitian H, any proper reduced
// space, any selection of exact and reduced eigenmodes.

CertInputs selection_instance(TestRng& rng, Index n, Index nu, Index d) {
  CertInputs in;
  in.H = oracle::random_hermitian(rng, n, 2.0);
  in.A = oracle::random_spd(rng, n, 0.8, 2.0);
  ReducedSpace space(oracle::random_orthonormal(rng, n, d),
                     SpaceRecipe::custom);
  in.P = space.P;

  auto full = spectral_decompose(HermitianMatrix(in.H));
  for (Index m = 0; m < nu; ++m) {
    in.E.push_back(full.eigenvalues(m));
    in.phi.push_back(full.eigenvectors.col(m));
  }
  in.Gamma = density_matrix(in.phi);

  Matrix b = space.basis_matrix();
  auto red = reduced_dec(in.H, space);
  std::vector<Vector> red_frame;
  for (Index m = 0; m < nu; ++m) {
    in.cE.push_back(red.eigenvalues(m));
    in.psi.push_back(b * red.eigenvectors.col(m));
    red_frame.push_back(red.eigenvectors.col(m));
  }
  in.Lambda = density_matrix(in.psi);
  Matrix lam_red = Matrix::Zero(d, d);
  for (const Vector& w : red_frame) lam_red += w * w.adjoint();
  Projector lambda_red(0.5 * (lam_red + Matrix(lam_red.adjoint())), nu);
  for (Index m = 0; m < nu; ++m) {
    HermitianMatrix rr = partial_inverse(
        red, in.cE[static_cast<std::size_t>(m)], lambda_red);
    in.R.push_back(b * rr.mat() * b.adjoint());
  }
  return in;
}

// Perturbative instance: RBM+PT space at small lambda, matched branches.
struct PerturbativeInstance {
  OperatorFamily family;
  ReducedSpace space;
  RSSeries series;
  EigenCluster ground0;
  CertInputs inputs;
  ReducedEigenCluster reduced0;
};

PerturbativeInstance perturbative_instance(TestRng& rng, Index n, int ell,
                                           double lam,
                                           bool identity_A = true) {
  PerturbativeInstance inst{
      oracle::random_family(rng, n, 2, 0.7, identity_A), {}, {}, {}, {}, {}};
  inst.ground0 = select_cluster(inst.family, 0.0, {0});
  inst.series =
      rs_nondegenerate(inst.family, inst.ground0, std::max(2, ell + 1));
  inst.space = space_from_derivatives(inst.series, ell);
  auto pts = sweep(inst.family, inst.space, {0.0, lam}, inst.ground0);
  inst.inputs = make_cert_inputs(inst.family, inst.space, pts[1].exact,
                                 pts[1].reduced);
  inst.reduced0 =
      solve_reduced(inst.family, inst.space, 0.0, inst.ground0);
  return inst;
}

}  // namespace

TEST_CASE("vector identities") {
  SECTION("exact space gives zero") {
    TestRng rng(301);
    Matrix h = oracle::random_hermitian(rng, 6, 2.0);
    auto dec = spectral_decompose(HermitianMatrix(h));
    std::vector<Vector> basis{dec.eigenvectors.col(0),
                              dec.eigenvectors.col(2)};
    ReducedSpace sp(basis, SpaceRecipe::custom);
    CertInputs in;
    in.H = h;
    in.A = HermitianMatrix::identity(6);
    in.P = sp.P;
    in.E = {dec.eigenvalues(0)};
    in.phi = {dec.eigenvectors.col(0)};
    in.cE = in.E;
    in.psi = in.phi;
    in.Gamma = density_matrix(in.phi);
    in.Lambda = in.Gamma;
    auto red = reduced_dec(h, sp);
    Matrix b = sp.basis_matrix();
    Vector w = b.adjoint() * in.psi[0];
    Projector lam_red(w * w.adjoint(), 1);
    in.R = {Matrix(b * partial_inverse(red, in.E[0], lam_red).mat() *
                   b.adjoint())};
    auto ids = vector_identity_residuals(in.H, in.P, in.E[0], in.phi[0],
                                         in.cE[0], in.psi[0], in.R[0]);
    for (const auto& r : ids) {
      CHECK(r.lhs_norm < 1e-12);
      CHECK(r.residual < 1e-12);
      CHECK(r.pass());
    }
  }

  SECTION("random selections satisfy both identities") {
    TestRng rng(302);
    for (int rep = 0; rep < 20; ++rep) {
      Index n = 5 + static_cast<Index>(rep % 4);
      CertInputs in = selection_instance(rng, n, 1, 3);
      auto ids = vector_identity_residuals(in.H, in.P, in.E[0], in.phi[0],
                                           in.cE[0], in.psi[0], in.R[0]);
      for (const auto& r : ids) {
        INFO(r.name << " residual " << r.residual);
        CHECK(r.pass());
      }
    }
  }

  SECTION("gauge failure when the overlap vanishes") {
    Vector e0 = Vector::Zero(3), e1 = Vector::Zero(3);
    e0(0) = 1;
    e1(1) = 1;
    CHECK_THROWS_AS(alignment_phase(e0, e1), GaugeFailure);
  }

  SECTION("leading term dominates as lambda shrinks") {
    TestRng rng(303);
    OperatorFamily fam = oracle::random_family(rng, 7, 2, 0.7);
    EigenCluster g0 = select_cluster(fam, 0.0, {0});
    RSSeries s = rs_nondegenerate(fam, g0, 2);
    ReducedSpace sp = space_from_derivatives(s, 1);
    std::vector<double> lams{0.04, 0.08, 0.16};
    std::vector<double> remainders, errors;
    auto pts = sweep(fam, sp, {0.0, 0.04, 0.08, 0.16}, g0);
    for (const auto& p : pts) {
      if (p.lam == 0.0) continue;
      CertInputs in = make_cert_inputs(fam, sp, p.exact, p.reduced);
      Vector phi = in.phi[0];
      Vector psi = in.psi[0] * alignment_phase(in.psi[0], phi);
      Matrix pperp = in.Pperp();
      Vector lead = pperp * phi + in.R[0] * (in.H * (pperp * phi));
      remainders.push_back((phi - psi - lead).norm());
      errors.push_back((phi - psi).norm());
    }
    double slope =
        lab::fit_loglog_slope(lams, remainders, 0.0, 1.0);
    double err_slope = lab::fit_loglog_slope(lams, errors, 0.0, 1.0);
    // Remainder decays at twice the rate of the error itself.
    CHECK(slope > 1.8 * err_slope);
  }
}

TEST_CASE("cluster identity and omega") {
  TestRng rng(311);
  SECTION("exact cluster gives zero omega") {
    Matrix h = oracle::random_hermitian(rng, 8, 2.0);
    auto dec = spectral_decompose(HermitianMatrix(h));
    std::vector<Vector> basis{dec.eigenvectors.col(0), dec.eigenvectors.col(1),
                              dec.eigenvectors.col(4)};
    ReducedSpace sp(basis, SpaceRecipe::custom);
    CertInputs in;
    in.H = h;
    in.A = HermitianMatrix::identity(8);
    in.P = sp.P;
    for (Index m = 0; m < 2; ++m) {
      in.E.push_back(dec.eigenvalues(m));
      in.phi.push_back(dec.eigenvectors.col(m));
    }
    in.cE = in.E;
    in.psi = in.phi;
    in.Gamma = density_matrix(in.phi);
    in.Lambda = in.Gamma;
    Matrix b = sp.basis_matrix();
    auto red = reduced_dec(h, sp);
    Matrix lam_red = Matrix::Zero(3, 3);
    for (const Vector& v : in.psi) {
      Vector w = b.adjoint() * v;
      lam_red += w * w.adjoint();
    }
    Projector lr(0.5 * (lam_red + Matrix(lam_red.adjoint())), 2);
    for (double e : in.cE) {
      in.R.push_back(
          Matrix(b * partial_inverse(red, e, lr).mat() * b.adjoint()));
    }
    CHECK(omega_term(in).norm() < 1e-12);
    auto r = cluster_identity_residual(in);
    CHECK(r.lhs_norm < 1e-12);
    CHECK(r.pass());
  }

  SECTION("random selections satisfy the identity and the bound") {
    for (int rep = 0; rep < 12; ++rep) {
      Index n = 8 + static_cast<Index>(rep % 3);
      Index nu = 1 + static_cast<Index>(rep % 3);
      Index d = 4 + static_cast<Index>(rep % 3);
      CertInputs in = selection_instance(rng, n, nu, d);
      auto r = cluster_identity_residual(in);
      INFO("residual " << r.residual << " at rep " << rep);
      CHECK(r.pass());
      for (int delta : {0, 1}) {
        auto b = omega_bound_check(in, delta);
        INFO(b.name << " lhs " << b.lhs << " rhs " << b.rhs);
        CHECK(b.pass());
      }
    }
  }

  SECTION("omega is quadratic in the density matrix error") {
    TestRng rng2(312);
    OperatorFamily fam = oracle::random_family(rng2, 8, 2, 0.7);
    EigenCluster g0 = select_cluster(fam, 0.0, {0, 1});
    DMSeries dm = dm_coefficients(fam, g0, 2);
    ReducedSpace sp = space_from_gamma_images(dm, 1, g0.frame());
    double prev_ratio = 0.0;
    for (double lam : {0.16, 0.08, 0.04, 0.02}) {
      auto pts = sweep(fam, sp, {0.0, lam}, g0);
      CertInputs in = make_cert_inputs(fam, sp, pts[1].exact, pts[1].reduced);
      double diff = (in.Gamma.mat - in.Lambda.mat).norm();
      double ratio = omega_term(in).norm() / (diff * diff);
      if (prev_ratio > 0.0) {
        CHECK(ratio < 8.0 * prev_ratio + 10.0);  // bounded, no blow-up
      }
      prev_ratio = ratio;
    }
  }
}

TEST_CASE("eigenvalue_gap") {
  TestRng rng(321);
  Matrix h = oracle::random_hermitian(rng, 6, 2.0);
  auto dec = spectral_decompose(HermitianMatrix(h));
  HermitianMatrix a = oracle::random_spd(rng, 6, 0.7, 2.0);

  SECTION("identical vectors") {
    auto [exact, bound] = eigenvalue_gap(a, h, dec.eigenvalues(0),
                                         dec.eigenvectors.col(0),
                                         dec.eigenvectors.col(0));
    CHECK(std::abs(exact) < 1e-13);
    CHECK(bound < 1e-13);
  }
  SECTION("other eigenvector gives the eigenvalue difference") {
    auto [exact, bound] = eigenvalue_gap(a, h, dec.eigenvalues(0),
                                         dec.eigenvectors.col(0),
                                         dec.eigenvectors.col(3));
    CHECK(exact ==
          Catch::Approx(dec.eigenvalues(0) - dec.eigenvalues(3)));
    CHECK(std::abs(exact) <= bound + 1e-12);
  }
  SECTION("random psi keeps |exact| below the bound") {
    for (int rep = 0; rep < 10; ++rep) {
      Vector psi = oracle::random_orthonormal(rng, 6, 1).front();
      auto [exact, bound] =
          eigenvalue_gap(a, h, dec.eigenvalues(1), dec.eigenvectors.col(1),
                         psi);
      CHECK(std::abs(exact) <= bound + 1e-11);
    }
  }
  SECTION("zero psi rejected") {
    CHECK_THROWS_AS(eigenvalue_gap(a, h, dec.eigenvalues(0),
                                   dec.eigenvectors.col(0),
                                   Vector(Vector::Zero(6))),
                    InvalidInput);
  }
}

TEST_CASE("a-priori bounds on perturbative instances") {
  TestRng rng(331);
  SECTION("exact space gives zero left-hand sides") {
    PerturbativeInstance inst = perturbative_instance(rng, 7, 1, 0.0);
    // At lambda = 0 the reduced mode equals the exact one.
    auto pts = sweep(inst.family, inst.space, {0.0}, inst.ground0);
    CertInputs in = make_cert_inputs(inst.family, inst.space, pts[0].exact,
                                     pts[0].reduced);
    for (int delta : {0, 1}) {
      for (const auto& b : a_priori_vector_bounds(in, delta)) {
        if (b.asserted && b.applicable) {
          CHECK(b.lhs < 1e-9);
        }
      }
    }
  }
  SECTION("small-lambda instances pass every applicable bound") {
    for (int rep = 0; rep < 8; ++rep) {
      PerturbativeInstance inst =
          perturbative_instance(rng, 7 + (rep % 3), 1, 0.05, rep % 2 == 0);
      for (int delta : {0, 1}) {
        for (const auto& b : a_priori_vector_bounds(inst.inputs, delta)) {
          INFO(b.name << " lhs " << b.lhs << " rhs " << b.rhs << " rep "
                      << rep);
          CHECK(b.pass());
        }
      }
    }
  }
  SECTION("far selections are flagged inapplicable, not failed") {
    TestRng rng2(332);
    // A selection pairing the exact ground state with an unrelated reduced
    // mode: the absorption proviso fails and the entry must say so.
    bool saw_inapplicable = false;
    for (int rep = 0; rep < 10 && !saw_inapplicable; ++rep) {
      CertInputs in = selection_instance(rng2, 8, 1, 4);
      // Pair phi_0 with the top reduced mode instead.
      auto red = reduced_dec(in.H, ReducedSpace({in.psi[0]}, SpaceRecipe::custom));
      (void)red;
      for (const auto& b : a_priori_vector_bounds(in, 1)) {
        if (!b.applicable) saw_inapplicable = true;
        CHECK(b.pass());
      }
    }
    CHECK(saw_inapplicable);
  }
}

TEST_CASE("frame comparison bounds") {
  TestRng rng(341);
  for (int rep = 0; rep < 10; ++rep) {
    Index nu = 1 + static_cast<Index>(rep % 3);
    CertInputs in = selection_instance(rng, 9, nu, 5);
    if (rep % 2 == 0) {
      // The natural energy operator: A = (|H| + shift)^{1/2}.
      auto hd = spectral_decompose(HermitianMatrix(in.H));
      RealVector shifted =
          hd.eigenvalues.cwiseAbs().array() + 1.0;
      RealVector root = shifted.array().sqrt();
      in.A = HermitianMatrix(Matrix(hd.eigenvectors *
                                    root.cast<Complex>().asDiagonal() *
                                    hd.eigenvectors.adjoint()));
    }
    for (const auto& b : frame_comparison_bounds(in)) {
      INFO(b.name << " lhs " << b.lhs << " rhs " << b.rhs << " rep " << rep);
      CHECK(b.pass());
    }
  }
}

TEST_CASE("alternative cluster bound") {
  TestRng rng(351);
  SECTION("random selections with healthy gaps") {
    int applicable = 0;
    for (int rep = 0; rep < 12; ++rep) {
      Index nu = 1 + static_cast<Index>(rep % 2);
      CertInputs in = selection_instance(rng, 9, nu, 5);
      for (int delta : {0, 1}) {
        auto b = alternative_cluster_bound(in, delta);
        INFO(b.name << " lhs " << b.lhs << " rhs " << b.rhs);
        CHECK(b.pass());
        if (b.applicable) ++applicable;
      }
    }
    CHECK(applicable > 0);
  }
  SECTION("side-by-side with the omega-route bound") {
    PerturbativeInstance inst = perturbative_instance(rng, 8, 1, 0.08);
    auto alt = alternative_cluster_bound(inst.inputs, 0);
    auto omega = omega_bound_check(inst.inputs, 0);
    REQUIRE(alt.applicable);
    CHECK(alt.pass());
    CHECK(omega.pass());
    // Both right-hand sides are recorded; nothing asserts their ordering.
    CHECK(alt.rhs > 0.0);
  }
}

TEST_CASE("xi constants") {
  TestRng rng(361);
  SECTION("ell = 0 convention") {
    PerturbativeInstance inst = perturbative_instance(rng, 7, 0, 0.05);
    XiRecord xi = xi_constants(inst.family, inst.series, inst.space,
                               inst.reduced0.R.front(), 0, 0);
    CHECK(xi.xi_l == 1.0);
    // With a one-dimensional space the raw ratio also collapses to one.
    CHECK(xi.xi_l_ratio == Catch::Approx(xi.xi_l_simple).epsilon(0.3));
  }
  SECTION("self-consistency at ell >= 1") {
    PerturbativeInstance inst = perturbative_instance(rng, 8, 1, 0.05);
    XiRecord xi = xi_constants(inst.family, inst.series, inst.space,
                               inst.reduced0.R.front(), 1, 0);
    CHECK(xi.xi_l * xi.xi_rbmpt == Catch::Approx(xi.xi_pt).margin(1e-12));
  }
  SECTION("sentinel when the next derivative stays inside the space") {
    // Family block-diagonal on a two-dimensional invariant subspace: every
    // derivative of the tracked branch lives inside it.
    Matrix h0 = Matrix::Zero(4, 4);
    h0(1, 1) = 1;
    h0(2, 2) = 5;
    h0(3, 3) = 7;
    Matrix h1 = Matrix::Zero(4, 4);
    h1(0, 1) = h1(1, 0) = 0.7;
    OperatorFamily fam(HermitianMatrix::identity(4),
                       {HermitianMatrix(h0), HermitianMatrix(h1)});
    EigenCluster g = select_cluster(fam, 0.0, {0});
    RSSeries s = rs_nondegenerate(fam, g, 2);
    Vector e0 = Vector::Zero(4), e1 = Vector::Zero(4);
    e0(0) = 1;
    e1(1) = 1;
    ReducedSpace block({e0, e1}, SpaceRecipe::custom);
    ReducedEigenCluster red = solve_reduced(fam, block, 0.0, g);
    XiRecord xi = xi_constants(fam, s, block, red.R.front(), 1, 0);
    CHECK(std::isinf(xi.xi_l_simple));
    CHECK(std::isinf(xi.xi_l_ratio));
  }
  SECTION("limit identity: the error ratio approaches xi_l") {
    PerturbativeInstance inst = perturbative_instance(rng, 8, 1, 1e-3);
    XiRecord xi = xi_constants(inst.family, inst.series, inst.space,
                               inst.reduced0.R.front(), 1, 0);
    const CertInputs& in = inst.inputs;
    Vector phi = in.phi[0];
    Vector psi = in.psi[0] * alignment_phase(in.psi[0], phi);
    Vector pt = pt_approximant(inst.series, 1, 1e-3);
    pt *= alignment_phase(pt, phi);
    double ratio = (phi - pt).norm() / (phi - psi).norm();
    CHECK(std::abs(ratio - xi.xi_l) / xi.xi_l < 0.1);
  }
  SECTION("degenerate constants exist and are finite") {
    TestRng rng2(362);
    OperatorFamily fam = oracle::random_degenerate_family(rng2, 7, 2, 2, 0.7);
    EigenCluster c = select_cluster(fam, 0.0, {0, 1});
    DegenerateContext ctx = first_order_matrix(fam, c, 0);
    RSSeries s = rs_degenerate(fam, ctx, 2);
    DMSeries dm = dm_coefficients(fam, ctx.cluster, 2);

    // Space per the degenerate-vector theorem: the whole cluster at 0 plus
    // the tracked branch derivatives.
    std::vector<Vector> vs = ctx.cluster.frame();
    for (int nn = 1; nn <= 1; ++nn) {
      vs.push_back(s.Phi[static_cast<std::size_t>(nn)]);
    }
    auto [basis, rank] = orthonormalize(vs, 1e-9);
    ReducedSpace sp(basis, SpaceRecipe::custom);
    ReducedEigenCluster red0 = solve_reduced(fam, sp, 0.0, ctx.cluster);

    double xc = xi_deg_cluster_constant(fam, dm, sp, red0.R,
                                        ctx.cluster.frame(), 1, 0);
    CHECK(std::isfinite(xc));
    double xm = xi_deg_mu_constant(fam, ctx, s, sp, red0.R.front(), 1, 0);
    CHECK(std::isfinite(xm));
    (void)rank;
  }
}

TEST_CASE("pt error constants") {
  TestRng rng(371);
  SECTION("zero perturbation") {
    RealVector d(3);
    d << 0, 1, 2;
    OperatorFamily fam(HermitianMatrix::identity(3),
                       {HermitianMatrix::diagonal(d),
                        HermitianMatrix::zero(3)});
    RSSeries s = rs_nondegenerate(fam, select_cluster(fam, 0.0, {0}), 4);
    for (int ell = 0; ell <= 3; ++ell) {
      auto c = pt_error_constants(s, ell, 0, fam.A);
      CHECK(c.xi_pt < 1e-14);
    }
  }
  SECTION("two-level family at order zero") {
    Matrix h0(2, 2), h1(2, 2);
    h0 << 0, 0, 0, 1;
    h1 << 0, 1, 1, 0;
    OperatorFamily fam(HermitianMatrix::identity(2),
                       {HermitianMatrix(h0), HermitianMatrix(h1)});
    RSSeries s = rs_nondegenerate(fam, select_cluster(fam, 0.0, {0}), 2);
    auto c = pt_error_constants(s, 0, 0, fam.A);
    CHECK(c.xi_pt == Catch::Approx(1.0));  // phi^1 = -e1
    REQUIRE(c.xi_pt_E.has_value());
    CHECK(*c.xi_pt_E == Catch::Approx(1.0));  // |E^2|
  }
  SECTION("PT error slope is ell + 1") {
    OperatorFamily fam = oracle::random_family(rng, 7, 2, 0.6);
    EigenCluster g = select_cluster(fam, 0.0, {0});
    RSSeries s = rs_nondegenerate(fam, g, 3);
    oracle::ClusterTracker tracker(fam, {g.modes.front().second});
    for (int ell : {0, 1}) {
      std::vector<double> lams, errs;
      for (double lam : {0.01, 0.02, 0.04}) {
        Vector phi = tracker.vector(lam, 0);
        Vector pt = pt_approximant(s, ell, lam);
        pt *= alignment_phase(pt, phi);
        lams.push_back(lam);
        errs.push_back((phi - pt).norm());
      }
      double slope = lab::fit_loglog_slope(lams, errs, 0.0, 1.0);
      CHECK(slope == Catch::Approx(ell + 1.0).margin(0.15));
    }
  }
}
