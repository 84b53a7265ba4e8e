#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace srbm;
namespace fs = std::filesystem;

namespace {

const char* cli_path() { return SPECTRAL_RBM_CLI_PATH; }

int run(const std::string& args) {
  std::string cmd = std::string(cli_path()) + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("srbm_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_sigma_x_family(const fs::path& path) {
  Matrix h0(2, 2), h1(2, 2);
  h0 << 0, 0, 0, 1;
  h1 << 0, 1, 1, 0;
  OperatorFamily fam(HermitianMatrix::identity(2),
                     {HermitianMatrix(h0), HermitianMatrix(h1)});
  write_file(path.string(), to_json(fam).dump(2) + "\n");
}

void write_random_family(const fs::path& path, std::uint64_t seed, Index n) {
  oracle::TestRng rng(seed);
  OperatorFamily fam = oracle::random_family(rng, n, 2, 0.7);
  write_file(path.string(), to_json(fam).dump(2) + "\n");
}

}  // namespace

TEST_CASE("cli series") {
  fs::path dir = fresh_dir("series");
  fs::path family = dir / "family.json";
  write_sigma_x_family(family);

  SECTION("closed-form eigenvalue series of the two-level file") {
    REQUIRE(run("series --family " + family.string() + " --targets 0 --ell 4" +
                " --out " + (dir / "out").string()) == 0);
    Json j = Json::parse(read_file((dir / "out" / "series.json").string()));
    std::vector<double> e = j.at("E").get<std::vector<double>>();
    REQUIRE(e.size() == 5);
    CHECK(std::abs(e[0]) < 1e-13);
    CHECK(std::abs(e[1]) < 1e-13);
    CHECK(e[2] == Catch::Approx(-1.0));
    CHECK(std::abs(e[3]) < 1e-12);
    CHECK(e[4] == Catch::Approx(1.0));
  }
  SECTION("same invocation twice gives identical bytes") {
    REQUIRE(run("series --family " + family.string() +
                " --targets 0 --ell 3 --seed 7 --out " +
                (dir / "a").string()) == 0);
    REQUIRE(run("series --family " + family.string() +
                " --targets 0 --ell 3 --seed 7 --out " +
                (dir / "b").string()) == 0);
    CHECK(read_file((dir / "a" / "series.json").string()) ==
          read_file((dir / "b" / "series.json").string()));
  }
  SECTION("rejects a bad family file with the validation exit code") {
    write_file((dir / "broken.json").string(), "{\"A\": 3}\n");
    CHECK(run("series --family " + (dir / "broken.json").string() +
              " --targets 0 --ell 2 --out " + dir.string()) == 2);
  }
  SECTION("degenerate-partner exclusion maps to the numerical exit code") {
    RealVector d(3);
    d << 0, 0, 5;
    OperatorFamily deg(HermitianMatrix::identity(3),
                       {HermitianMatrix::diagonal(d)});
    write_file((dir / "deg.json").string(), to_json(deg).dump() + "\n");
    CHECK(run("series --family " + (dir / "deg.json").string() +
              " --targets 0 --ell 2 --out " + dir.string()) == 4);
  }
}

TEST_CASE("cli certify") {
  fs::path dir = fresh_dir("certify");
  fs::path family = dir / "family.json";
  write_random_family(family, 1234, 7);

  SECTION("well-posed run passes and writes a report") {
    REQUIRE(run("certify --family " + family.string() +
                " --targets 0 --ell 1 --space derivatives --lam 0.05" +
                " --out " + (dir / "out").string()) == 0);
    Json report =
        Json::parse(read_file((dir / "out" / "report.json").string()));
    CHECK(report.at("all_pass").get<bool>());
    CHECK(report.at("identities").size() >= 3);
  }
  SECTION("corrupted psi fixture fails with a named identity") {
    oracle::TestRng rng(55);
    OperatorFamily fam = oracle::random_family(rng, 6, 2, 0.7);
    EigenCluster g = select_cluster(fam, 0.0, {0});
    RSSeries s = rs_nondegenerate(fam, g, 2);
    ReducedSpace sp = space_from_derivatives(s, 1);
    auto pts = sweep(fam, sp, {0.0, 0.1}, g);
    CertInputs in = make_cert_inputs(fam, sp, pts[1].exact, pts[1].reduced);

    fs::path good = dir / "fixture_good.json";
    write_file(good.string(), to_json(in).dump() + "\n");
    REQUIRE(run("certify --fixture " + good.string() + " --out " +
                (dir / "g").string()) == 0);

    // Corrupt psi: rotate it inside the reduced space away from the
    // eigenvector while keeping it normalized.
    Vector other = sp.basis.front();
    Vector bad = 0.8 * in.psi[0] + 0.6 * (other - in.psi[0].dot(other) * in.psi[0]).normalized();
    in.psi[0] = bad / bad.norm();
    in.Lambda = density_matrix(in.psi);
    fs::path corrupted = dir / "fixture_bad.json";
    write_file(corrupted.string(), to_json(in).dump() + "\n");
    CHECK(run("certify --fixture " + corrupted.string() + " --out " +
              (dir / "b").string()) == 3);
    Json report = Json::parse(read_file((dir / "b" / "report.json").string()));
    bool saw_failing_identity = false;
    for (const auto& id : report.at("identities")) {
      if (!id.at("pass").get<bool>()) saw_failing_identity = true;
    }
    CHECK(saw_failing_identity);
  }
}

TEST_CASE("cli sweep") {
  fs::path dir = fresh_dir("sweep");
  fs::path family = dir / "family.json";
  write_random_family(family, 77, 6);

  REQUIRE(run("sweep --family " + family.string() +
              " --targets 0 --ell 1 --lam 0 --lam 0.05 --lam 0.1 --out " +
              (dir / "out").string()) == 0);
  std::string csv = read_file((dir / "out" / "sweep.csv").string());
  CHECK(csv.rfind("lam,mu,E_exact,E_reduced,err_vec_l2,err_vec_energy,"
                  "err_eig\n",
                  0) == 0);
  CHECK(csv.find("\r") == std::string::npos);
  // Zero row at lam = 0.
  CHECK(csv.find("\n0,0,") != std::string::npos);
  Json meta = Json::parse(read_file((dir / "out" / "sweep_meta.json").string()));
  CHECK(meta.contains("csv_hash"));
}

TEST_CASE("cli experiment determinism") {
  fs::path dir = fresh_dir("experiment");
  Json cfg{{"grid", {{"L", 2.0 * std::numbers::pi}, {"N", 33}}},
           {"lambda_grid", {{"kind", "log"}, {"min", 1e-3}, {"max", 2e-2},
                            {"points", 8}}},
           {"ell_max", 1},
           {"seed", 42},
           {"beta_list", {1, 2}},
           {"es_compare_lam", 0.3}};
  fs::path cfg_path = dir / "config.json";
  write_file(cfg_path.string(), cfg.dump(2) + "\n");

  auto run_once = [&](const std::string& tag) {
    fs::path out = dir / tag;
    REQUIRE(run("experiment --config " + cfg_path.string() + " --out " +
                out.string() + " --stamp fixed") == 0);
    return read_file((out / "manifest_fixed.json").string());
  };
  std::string m1 = run_once("a");
  std::string m2 = run_once("b");
  Json j1 = Json::parse(m1), j2 = Json::parse(m2);
  REQUIRE(j1.at("artifacts").size() == j2.at("artifacts").size());
  for (std::size_t i = 0; i < j1.at("artifacts").size(); ++i) {
    CHECK(j1.at("artifacts")[i].at("hash") == j2.at("artifacts")[i].at("hash"));
  }
  // CSVs exist and carry the slope summary rows.
  std::string csv = read_file((dir / "a" / "ell_sweep_fixed.csv").string());
  CHECK(csv.find("slope,") != std::string::npos);
}
