// Command-line harness: series, certify, sweep and experiment runs over
// operator-family files and lab configurations.

#include "spectral_rbm/spectral_rbm.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace srbm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitCertification = 3;
constexpr int kExitNumerical = 4;

std::string default_stamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d%H%M%S", std::gmtime(&t));
  return buf;
}

std::string fmt(double v) { return CsvWriter::format(v); }

struct CommonOpts {
  std::string family_file;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int delta = 0;
  int ell = 1;
  bool quiet = false;
};

std::vector<Index> parse_targets(const std::string& csv) {
  std::vector<Index> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    out.push_back(std::stol(csv.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  if (out.empty()) throw ValidationError("empty target list");
  return out;
}

lab::PotentialSpec potential_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian_bumps") {
    return lab::PotentialSpec::gaussians(
        j.at("centers").get<std::vector<double>>(),
        j.at("widths").get<std::vector<double>>(),
        j.at("amplitudes").get<std::vector<double>>());
  }
  if (kind == "cosine_series") {
    std::vector<std::pair<int, double>> cs, sn;
    if (j.contains("cos")) {
      for (const auto& p : j.at("cos")) {
        cs.emplace_back(p.at(0).get<int>(), p.at(1).get<double>());
      }
    }
    if (j.contains("sin")) {
      for (const auto& p : j.at("sin")) {
        sn.emplace_back(p.at(0).get<int>(), p.at(1).get<double>());
      }
    }
    return lab::PotentialSpec::cosine(std::move(cs), std::move(sn));
  }
  if (kind == "samples") {
    return lab::PotentialSpec::sampled(
        j.at("values").get<std::vector<double>>());
  }
  throw ValidationError("unknown potential kind: " + kind);
}

std::vector<double> lambda_grid_from_json(const Json& j) {
  if (j.contains("values")) return j.at("values").get<std::vector<double>>();
  const std::string kind =
      j.contains("kind") ? j.at("kind").get<std::string>() : "log";
  double lo = j.value("min", 1e-3);
  double hi = j.value("max", 0.5);
  int points = j.value("points", 28);
  if (kind == "log") return lab::log_grid(lo, hi, points);
  if (kind == "linear") {
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
      g[static_cast<std::size_t>(i)] =
          lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    }
    return g;
  }
  throw ValidationError("unknown lambda_grid kind: " + kind);
}

lab::LabConfig lab_config_from_json(const Json& j) {
  lab::LabConfig cfg;
  if (j.contains("grid")) {
    cfg.grid = lab::Grid1D(j.at("grid").value("L", 2.0 * std::numbers::pi),
                           j.at("grid").value("N", 129));
  }
  if (j.contains("potentials")) {
    const auto& p = j.at("potentials");
    if (p.contains("V0")) cfg.V0 = potential_from_json(p.at("V0"));
    if (p.contains("V1")) cfg.V1 = potential_from_json(p.at("V1"));
    if (p.contains("V2")) cfg.V2 = potential_from_json(p.at("V2"));
  }
  if (j.contains("lambda_grid")) {
    cfg.lambda_grid = lambda_grid_from_json(j.at("lambda_grid"));
  }
  cfg.ell_max = j.value("ell_max", 2);
  cfg.delta = j.value("delta", 0);
  cfg.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("fit_window")) {
    cfg.fit_lo = j.at("fit_window").value("lo", 1e-3);
    cfg.fit_hi = j.at("fit_window").value("hi", 1e-2);
  }
  if (j.contains("beta_list")) {
    cfg.beta_list = j.at("beta_list").get<std::vector<int>>();
  }
  cfg.es_compare_lam = j.value("es_compare_lam", 0.3);
  return cfg;
}

ReducedSpace build_space(const OperatorFamily& family, const RSSeries& series,
                         const EigenCluster& cluster, const std::string& kind,
                         int ell, int beta) {
  if (kind == "derivatives") return space_from_derivatives(series, ell);
  if (kind == "gamma") {
    DMSeries dm = dm_coefficients(family, cluster, ell);
    return space_from_gamma_images(dm, ell, cluster.frame());
  }
  if (kind == "excited") {
    return space_from_excited_states(family, beta,
                                     beta + 1 >= family.dim());
  }
  throw ValidationError("unknown space recipe: " + kind);
}

int run_series(const CommonOpts& opts, const std::string& targets_csv,
               bool degenerate, Index mu) {
  OperatorFamily family = load_family(opts.family_file);
  auto targets = parse_targets(targets_csv);
  EigenCluster cluster = select_cluster(family, 0.0, targets);

  RSSeries series;
  if (degenerate) {
    DegenerateContext ctx = first_order_matrix(family, cluster, mu);
    series = rs_degenerate(family, ctx, opts.ell);
  } else {
    series = rs_nondegenerate(family, cluster, opts.ell);
  }
  auto [a, b] = series_growth_fit(series, family.A);

  fs::create_directories(opts.out_dir);
  Json j = to_json(series);
  j["growth_fit"] = {{"a", a}, {"b", b}};
  j["seed"] = opts.seed;
  std::string path = (fs::path(opts.out_dir) / "series.json").string();
  write_file(path, j.dump(2) + "\n");
  if (!opts.quiet) {
    std::printf("series written to %s\n", path.c_str());
    std::printf("growth fit: a = %s, b = %s\n", fmt(a).c_str(),
                fmt(b).c_str());
  }
  return kExitOk;
}

void append_fixture_checks(CertificateReport& report, const CertInputs& in) {
  if (in.nu() == 1) {
    for (auto r : vector_identity_residuals(in.H, in.P, in.E[0], in.phi[0],
                                            in.cE[0], in.psi[0], in.R[0])) {
      report.identities.push_back(r);
    }
  }
  report.identities.push_back(cluster_identity_residual(in));
  for (int delta : {0, 1}) {
    report.bounds.push_back(omega_bound_check(in, delta));
    for (auto b : a_priori_vector_bounds(in, delta)) {
      report.bounds.push_back(b);
    }
    report.bounds.push_back(alternative_cluster_bound(in, delta));
  }
  for (auto b : frame_comparison_bounds(in)) report.bounds.push_back(b);
}

int run_certify_fixture(const CommonOpts& opts,
                        const std::string& fixture_file) {
  Json j;
  try {
    j = Json::parse(read_file(fixture_file));
  } catch (const std::exception& e) {
    throw ValidationError(std::string("fixture parse: ") + e.what());
  }
  CertInputs in = cert_inputs_from_json(j);
  CertificateReport report;
  append_fixture_checks(report, in);
  fs::create_directories(opts.out_dir);
  std::string path = (fs::path(opts.out_dir) / "report.json").string();
  write_file(path, to_json(report).dump(2) + "\n");
  if (!opts.quiet) {
    for (const auto& r : report.identities) {
      std::printf("%-38s residual %12.4e  %s\n", r.name.c_str(), r.residual,
                  r.pass() ? "pass" : "FAIL");
    }
    for (const auto& b : report.bounds) {
      std::printf("%-38s lhs %12.4e rhs %12.4e  %s\n", b.name.c_str(), b.lhs,
                  b.rhs,
                  !b.applicable ? "not-applicable"
                                : (b.asserted ? (b.pass() ? "pass" : "FAIL")
                                              : "recorded"));
    }
  }
  return report.all_pass() ? kExitOk : kExitCertification;
}

int run_certify(const CommonOpts& opts, const std::string& targets_csv,
                const std::string& space_kind, int beta,
                std::vector<double> lams) {
  OperatorFamily family = load_family(opts.family_file);
  auto targets = parse_targets(targets_csv);
  EigenCluster cluster = select_cluster(family, 0.0, targets);
  const int series_order = std::max(opts.ell + 1, 2 * (opts.ell + 1));
  RSSeries series;
  const bool nondeg = cluster.nu() == 1;
  if (nondeg) {
    series = rs_nondegenerate(family, cluster, series_order);
  } else {
    DegenerateContext ctx = first_order_matrix(family, cluster, 0);
    cluster = ctx.cluster;
    series = rs_degenerate(family, ctx, series_order);
  }
  ReducedSpace space =
      build_space(family, series, cluster, space_kind, opts.ell, beta);

  if (lams.empty()) lams = {0.1};
  std::vector<double> grid = lams;
  grid.push_back(0.0);
  auto points = sweep(family, space, grid, cluster);

  CertificateReport report;
  report.constants = validate(family, &space.P);
  for (const auto& pt : points) {
    if (pt.lam == 0.0) continue;
    CertInputs in = make_cert_inputs(family, space, pt.exact, pt.reduced);
    std::string at = "[lam=" + fmt(pt.lam) + "]";
    if (in.nu() == 1) {
      for (auto r : vector_identity_residuals(in.H, in.P, in.E[0], in.phi[0],
                                              in.cE[0], in.psi[0], in.R[0])) {
        r.name += at;
        report.identities.push_back(r);
      }
    }
    auto cid = cluster_identity_residual(in);
    cid.name += at;
    report.identities.push_back(cid);
    for (int delta : {0, 1}) {
      auto ob = omega_bound_check(in, delta);
      ob.name += at;
      report.bounds.push_back(ob);
      for (auto b : a_priori_vector_bounds(in, delta)) {
        b.name += at;
        report.bounds.push_back(b);
      }
      auto alt = alternative_cluster_bound(in, delta);
      alt.name += at;
      report.bounds.push_back(alt);
    }
    for (auto b : frame_comparison_bounds(in)) {
      b.name += at;
      report.bounds.push_back(b);
    }
  }
  ReducedEigenCluster red0 = solve_reduced(family, space, 0.0, cluster);
  if (nondeg) {
    report.xi.push_back(xi_constants(family, series, space, red0.R.front(),
                                     opts.ell, opts.delta));
  }

  fs::create_directories(opts.out_dir);
  std::string path = (fs::path(opts.out_dir) / "report.json").string();
  write_file(path, to_json(report).dump(2) + "\n");

  if (!opts.quiet) {
    std::printf("%-38s %12s %12s %12s  %s\n", "identity", "lhs", "rhs",
                "residual", "status");
    for (const auto& r : report.identities) {
      std::printf("%-38s %12.4e %12.4e %12.4e  %s\n", r.name.c_str(),
                  r.lhs_norm, r.rhs_norm, r.residual,
                  r.pass() ? "pass" : "FAIL");
    }
    std::printf("%-38s %12s %12s %12s  %s\n", "bound", "lhs", "rhs", "slack",
                "status");
    for (const auto& b : report.bounds) {
      std::printf("%-38s %12.4e %12.4e %12.4e  %s\n", b.name.c_str(), b.lhs,
                  b.rhs, b.slack(),
                  !b.applicable ? "not-applicable"
                                : (b.asserted ? (b.pass() ? "pass" : "FAIL")
                                              : "recorded"));
    }
    std::printf("report written to %s\n", path.c_str());
  }
  return report.all_pass() ? kExitOk : kExitCertification;
}

int run_sweep(const CommonOpts& opts, const std::string& targets_csv,
              const std::string& space_kind, int beta,
              std::vector<double> grid) {
  OperatorFamily family = load_family(opts.family_file);
  auto targets = parse_targets(targets_csv);
  EigenCluster cluster = select_cluster(family, 0.0, targets);
  RSSeries series;
  if (cluster.nu() == 1) {
    series = rs_nondegenerate(family, cluster, opts.ell + 1);
  } else {
    DegenerateContext ctx = first_order_matrix(family, cluster, 0);
    cluster = ctx.cluster;
    series = rs_degenerate(family, ctx, opts.ell + 1);
  }
  ReducedSpace space =
      build_space(family, series, cluster, space_kind, opts.ell, beta);
  if (grid.empty()) grid = {0.0};
  if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) {
    grid.push_back(0.0);
  }
  auto points = sweep(family, space, grid, cluster);

  CsvWriter csv({"lam", "mu", "E_exact", "E_reduced", "err_vec_l2",
                 "err_vec_energy", "err_eig"});
  for (const auto& pt : points) {
    Matrix h = assemble(family, pt.lam).mat();
    for (Index mu = 0; mu < pt.exact.nu(); ++mu) {
      const auto& [e, phi] = pt.exact.modes[static_cast<std::size_t>(mu)];
      const auto& [ce, psi] = pt.reduced.modes[static_cast<std::size_t>(mu)];
      Vector aligned = psi * alignment_phase(psi, phi);
      csv.row({fmt(pt.lam), std::to_string(mu), fmt(e), fmt(ce),
               fmt((phi - aligned).norm()),
               fmt((family.A.mat() * (phi - aligned)).norm()),
               fmt(std::abs(
                   Vector(phi - aligned)
                       .dot(e * (phi - aligned) - h * (phi - aligned))
                       .real()))});
    }
  }
  fs::create_directories(opts.out_dir);
  std::string path = (fs::path(opts.out_dir) / "sweep.csv").string();
  csv.write(path);
  Json meta{{"family", opts.family_file},
            {"family_hash", fnv1a_hex(read_file(opts.family_file))},
            {"targets", targets_csv},
            {"space", space_kind},
            {"ell", opts.ell},
            {"beta", beta},
            {"seed", opts.seed},
            {"csv_hash", fnv1a_hex(read_file(path))}};
  write_file((fs::path(opts.out_dir) / "sweep_meta.json").string(),
             meta.dump(2) + "\n");
  if (!opts.quiet) std::printf("sweep written to %s\n", path.c_str());
  return kExitOk;
}

int run_experiment(const CommonOpts& opts, const std::string& config_file,
                   const std::string& which, std::string stamp) {
  lab::LabConfig cfg;
  if (!config_file.empty()) {
    Json j;
    try {
      j = Json::parse(read_file(config_file));
    } catch (const std::exception& e) {
      throw ValidationError(std::string("config parse: ") + e.what());
    }
    cfg = lab_config_from_json(j);
  }
  if (stamp.empty()) stamp = default_stamp();
  fs::create_directories(opts.out_dir);
  std::map<std::string, std::string> artifacts;

  auto emit = [&](const std::string& name, const CsvWriter& csv) {
    std::string path =
        (fs::path(opts.out_dir) / (name + "_" + stamp + ".csv")).string();
    csv.write(path);
    artifacts[path] = fnv1a_hex(csv.str());
    if (!opts.quiet) std::printf("wrote %s\n", path.c_str());
  };

  Json summary;
  if (which == "ell_sweep" || which == "all") {
    auto res = lab::experiment_ell_sweep(cfg);
    CsvWriter csv({"kind", "ell", "lam", "err_vec_rbmpt", "err_vec_pt",
                   "err_eig_rbmpt", "err_eig_pt", "slope_vec_rbmpt",
                   "slope_vec_pt", "slope_eig_rbmpt", "slope_eig_pt"});
    for (const auto& r : res.rows) {
      csv.row({"data", std::to_string(r.ell), fmt(r.lam),
               fmt(r.err_vec_rbmpt), fmt(r.err_vec_pt), fmt(r.err_eig_rbmpt),
               fmt(r.err_eig_pt), "", "", "", ""});
    }
    for (const auto& s : res.slopes) {
      csv.row({"slope", std::to_string(s.ell), "", "", "", "", "",
               fmt(s.slope_vec_rbmpt), fmt(s.slope_vec_pt),
               fmt(s.slope_eig_rbmpt), fmt(s.slope_eig_pt)});
    }
    emit("ell_sweep", csv);
    Json slopes = Json::array();
    for (const auto& s : res.slopes) {
      slopes.push_back({{"ell", s.ell},
                        {"slope_vec_rbmpt", s.slope_vec_rbmpt},
                        {"slope_vec_pt", s.slope_vec_pt},
                        {"slope_eig_rbmpt", s.slope_eig_rbmpt},
                        {"slope_eig_pt", s.slope_eig_pt}});
    }
    summary["ell_sweep"] = {{"slopes", slopes}, {"warnings", res.warnings}};
  }
  if (which == "xi_growth" || which == "all") {
    auto res = lab::experiment_xi_growth(cfg);
    CsvWriter csv({"kind", "ell", "xi_pt", "xi_rbmpt", "xi_l", "xi_l_simple",
                   "s_pt", "s_ec"});
    for (const auto& r : res.rows) {
      csv.row({"data", std::to_string(r.ell), fmt(r.xi_pt), fmt(r.xi_rbmpt),
               fmt(r.xi_l), fmt(r.xi_l_simple), "", ""});
    }
    csv.row({"fit", "", "", "", "", "", fmt(res.s_pt), fmt(res.s_ec)});
    emit("xi_growth", csv);
    summary["xi_growth"] = {{"s_pt", res.s_pt}, {"s_ec", res.s_ec}};
  }
  if (which == "es_comparison" || which == "all") {
    auto rows = lab::experiment_es_comparison(cfg);
    CsvWriter csv({"lam", "budget", "err_rbmpt", "err_rbmes"});
    for (const auto& r : rows) {
      csv.row({fmt(r.lam), std::to_string(r.budget), fmt(r.err_rbmpt),
               fmt(r.err_rbmes)});
    }
    emit("es_comparison", csv);
  }

  summary["seed"] = cfg.seed;
  std::string report_path =
      (fs::path(opts.out_dir) / ("experiment_report_" + stamp + ".json"))
          .string();
  write_file(report_path, summary.dump(2) + "\n");
  artifacts[report_path] = fnv1a_hex(read_file(report_path));

  Json manifest;
  for (const auto& [path, hash] : artifacts) {
    manifest["artifacts"].push_back({{"path", path}, {"hash", hash}});
  }
  manifest["seed"] = cfg.seed;
  write_file(
      (fs::path(opts.out_dir) / ("manifest_" + stamp + ".json")).string(),
      manifest.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced-basis approximation of self-adjoint eigenproblems "
               "coupled with perturbation theory"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string targets_csv = "0";
  std::string space_kind = "derivatives";
  std::string config_file;
  std::string which = "all";
  std::string stamp;
  std::vector<double> lams;
  int beta = 0;
  bool degenerate = false;
  Index mu = 0;

  auto add_common = [&](CLI::App* cmd, bool family) {
    if (family) {
      cmd->add_option("--family", opts.family_file, "operator family JSON")
          ->required();
      cmd->add_option("--targets", targets_csv,
                      "comma-separated eigenvalue indices at lam = 0");
    }
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "run seed (recorded in metadata)");
    cmd->add_option("--delta", opts.delta, "norm flavor, 0 or 1")
        ->check(CLI::Range(0, 1));
    cmd->add_option("--ell", opts.ell, "series / space order");
    cmd->add_flag("--quiet", opts.quiet, "suppress stdout tables");
  };

  auto* series_cmd = app.add_subcommand("series", "compute an RS series");
  add_common(series_cmd, true);
  series_cmd->add_flag("--degenerate", degenerate,
                       "use the first-order-lifted degenerate recursion");
  series_cmd->add_option("--mu", mu, "tracked branch inside the cluster");

  std::string fixture_file;
  auto* certify_cmd =
      app.add_subcommand("certify", "evaluate identities and bounds");
  certify_cmd->add_option("--family", opts.family_file,
                          "operator family JSON");
  certify_cmd->add_option("--targets", targets_csv,
                          "comma-separated eigenvalue indices at lam = 0");
  certify_cmd->add_option("--out", opts.out_dir, "output directory");
  certify_cmd->add_option("--seed", opts.seed, "run seed");
  certify_cmd->add_option("--delta", opts.delta, "norm flavor, 0 or 1")
      ->check(CLI::Range(0, 1));
  certify_cmd->add_option("--ell", opts.ell, "series / space order");
  certify_cmd->add_flag("--quiet", opts.quiet, "suppress stdout tables");
  certify_cmd->add_option("--space", space_kind,
                          "derivatives | gamma | excited");
  certify_cmd->add_option("--beta", beta, "excited-state budget");
  certify_cmd->add_option("--lam", lams, "lambda samples");
  certify_cmd->add_option("--fixture", fixture_file,
                          "explicit certification inputs JSON");

  auto* sweep_cmd = app.add_subcommand("sweep", "branch-tracked error sweep");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--space", space_kind, "derivatives | gamma | excited");
  sweep_cmd->add_option("--beta", beta, "excited-state budget");
  sweep_cmd->add_option("--lam", lams, "lambda grid points");

  auto* exp_cmd =
      app.add_subcommand("experiment", "run the lab experiment set");
  add_common(exp_cmd, false);
  exp_cmd->add_option("--config", config_file, "lab configuration JSON");
  exp_cmd->add_option("--experiment", which,
                      "ell_sweep | xi_growth | es_comparison | all");
  exp_cmd->add_option("--stamp", stamp,
                      "artifact name stamp (default: UTC time)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (series_cmd->parsed()) {
      return run_series(opts, targets_csv, degenerate, mu);
    }
    if (certify_cmd->parsed()) {
      if (!fixture_file.empty()) {
        return run_certify_fixture(opts, fixture_file);
      }
      if (opts.family_file.empty()) {
        throw ValidationError("certify needs --family or --fixture");
      }
      return run_certify(opts, targets_csv, space_kind, beta, lams);
    }
    if (sweep_cmd->parsed()) {
      return run_sweep(opts, targets_csv, space_kind, beta, lams);
    }
    if (exp_cmd->parsed()) {
      return run_experiment(opts, config_file, which, stamp);
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const InvalidOrder& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const Error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return kExitValidation;
}
