#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace srbm;
using oracle::TestRng;

TEST_CASE("assemble") {
  Matrix h0(2, 2), h1(2, 2);
  h0 << 0, 0, 0, 1;
  h1 << 0, 1, 1, 0;
  OperatorFamily fam(HermitianMatrix::identity(2),
                     {HermitianMatrix(h0), HermitianMatrix(h1)});

  SECTION("lambda = 0 returns H^0") {
    CHECK((assemble(fam, 0.0).mat() - h0).norm() == 0.0);
  }
  SECTION("direct sum at lambda = 1") {
    Matrix want(2, 2);
    want << 0, 1, 1, 1;
    CHECK((assemble(fam, 1.0).mat() - want).norm() < 1e-15);
  }
  SECTION("geometric partial sum") {
    OperatorFamily geo(HermitianMatrix::identity(2),
                       {HermitianMatrix::identity(2),
                        HermitianMatrix::identity(2),
                        HermitianMatrix::identity(2)});
    CHECK((assemble(geo, 0.5).mat() - 1.75 * Matrix::Identity(2, 2)).norm() <
          1e-15);
  }
  SECTION("terms beyond the degree vanish") {
    CHECK(fam.term(5).norm() == 0.0);
  }
  SECTION("finite differences recover n! H^n") {
    TestRng rng(71);
    OperatorFamily f = oracle::random_family(rng, 5, 2, 1.0);
    for (int n = 0; n <= 2; ++n) {
      Matrix coeff = oracle::taylor_coefficient<Matrix>(
          [&](double lam) { return Matrix(assemble(f, lam).mat()); }, n, 0.05,
          4);
      CHECK((coeff - f.term(n)).norm() <
            1e-6 * std::max(1.0, f.term(n).norm()));
    }
  }
}

TEST_CASE("validate") {
  SECTION("scalar A") {
    OperatorFamily fam(
        HermitianMatrix(Matrix(2.0 * Matrix::Identity(3, 3))),
        {HermitianMatrix::zero(3)});
    CHECK(validate(fam).c_A == Catch::Approx(0.5));
  }
  SECTION("c_H for a diagonal operator") {
    RealVector d(1);
    d << 3;
    OperatorFamily fam(HermitianMatrix::identity(1),
                       {HermitianMatrix::diagonal(d)});
    NormContext ctx = validate(fam);
    CHECK(ctx.c_H == Catch::Approx(3.0));
    CHECK(ctx.c_H_inf == Catch::Approx(3.0));
  }
  SECTION("c_P when A and the projector commute") {
    RealVector a(2);
    a << 1, 2;
    Vector e1 = Vector::Zero(2);
    e1(1) = 1;
    OperatorFamily fam(HermitianMatrix::diagonal(a),
                       {HermitianMatrix::zero(2)});
    Projector p = density_matrix({e1});
    NormContext ctx = validate(fam, &p);
    REQUIRE(ctx.c_P.has_value());
    CHECK(*ctx.c_P == Catch::Approx(1.0));
  }
  SECTION("c_H_inf maximizes over the terms") {
    TestRng rng(81);
    OperatorFamily fam = oracle::random_family(rng, 5, 2, 2.0, false);
    NormContext ctx = validate(fam);
    Matrix ainv = fam.A.mat().inverse();
    double want = 0.0;
    for (int n = 0; n <= 2; ++n) {
      want = std::max(want, operator_norm(ainv * fam.term(n) * ainv));
    }
    CHECK(ctx.c_H_inf == Catch::Approx(want));
  }
}

TEST_CASE("select_cluster") {
  RealVector d(3);
  d << 0, 0, 5;
  OperatorFamily fam(HermitianMatrix::identity(3),
                     {HermitianMatrix::diagonal(d)});

  SECTION("degenerate pair selected jointly") {
    EigenCluster c = select_cluster(fam, 0.0, {0, 1});
    CHECK(c.nu() == 2);
    CHECK(c.kappa == Catch::Approx(5.0));
    CHECK(c.Gamma.rank == 2);
  }
  SECTION("excluding a degenerate partner is rejected") {
    CHECK_THROWS_AS(select_cluster(fam, 0.0, {0}), IncompleteCluster);
  }
  SECTION("simple mode") {
    RealVector d2(2);
    d2 << 0, 1;
    OperatorFamily f2(HermitianMatrix::identity(2),
                      {HermitianMatrix::diagonal(d2)});
    EigenCluster c = select_cluster(f2, 0.0, {1});
    CHECK(c.nu() == 1);
    CHECK(c.modes.front().first == Catch::Approx(1.0));
    CHECK(c.kappa == Catch::Approx(1.0));
  }
  SECTION("cluster covering the whole spectrum has infinite gap") {
    RealVector d2(2);
    d2 << 0, 1;
    OperatorFamily f2(HermitianMatrix::identity(2),
                      {HermitianMatrix::diagonal(d2)});
    EigenCluster c = select_cluster(f2, 0.0, {0, 1});
    CHECK(std::isinf(c.kappa));
  }
  SECTION("Gamma commutes with H(lam)") {
    TestRng rng(91);
    for (int rep = 0; rep < 4; ++rep) {
      OperatorFamily f = oracle::random_family(rng, 8, 2);
      double lam = rng.uniform(-0.2, 0.2);
      EigenCluster c = select_cluster(f, lam, {2, 3});
      Matrix h = assemble(f, lam).mat();
      CHECK((h * c.Gamma.mat - c.Gamma.mat * h).norm() <
            1e-9 * operator_norm(h));
      // Eigen residuals.
      for (const auto& [e, v] : c.modes) {
        CHECK((h * v - e * v).norm() < 1e-9 * operator_norm(h));
      }
    }
  }
}
