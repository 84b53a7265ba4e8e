#ifndef SPECTRAL_RBM_IO_HPP
#define SPECTRAL_RBM_IO_HPP

#include "spectral_rbm/certifier.hpp"
#include "spectral_rbm/core.hpp"
#include "spectral_rbm/operator_family.hpp"
#include "spectral_rbm/perturbation.hpp"

#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace srbm {

using Json = nlohmann::json;

inline Json to_json(const Matrix& m) {
  Json re = Json::array(), im = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json rrow = Json::array(), irow = Json::array();
    for (Index j = 0; j < m.cols(); ++j) {
      rrow.push_back(m(i, j).real());
      irow.push_back(m(i, j).imag());
    }
    re.push_back(std::move(rrow));
    im.push_back(std::move(irow));
  }
  return Json{{"dim", m.rows()}, {"re", std::move(re)}, {"im", std::move(im)}};
}

inline Json to_json(const Vector& v) {
  Json re = Json::array(), im = Json::array();
  for (Index i = 0; i < v.size(); ++i) {
    re.push_back(v(i).real());
    im.push_back(v(i).imag());
  }
  return Json{{"dim", v.size()}, {"re", std::move(re)}, {"im", std::move(im)}};
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("re") ||
      !j.contains("im")) {
    throw ValidationError("matrix JSON must carry dim/re/im");
  }
  const auto n = j.at("dim").get<Index>();
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (static_cast<Index>(re.size()) != n ||
      static_cast<Index>(im.size()) != n) {
    throw ValidationError("matrix JSON row count does not match dim");
  }
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& rrow = re.at(static_cast<std::size_t>(i));
    const auto& irow = im.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(rrow.size()) != n ||
        static_cast<Index>(irow.size()) != n) {
      throw ValidationError("matrix JSON column count does not match dim");
    }
    for (Index k = 0; k < n; ++k) {
      m(i, k) = Complex(rrow.at(static_cast<std::size_t>(k)).get<double>(),
                        irow.at(static_cast<std::size_t>(k)).get<double>());
    }
  }
  return m;
}

inline Vector vector_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("re") ||
      !j.contains("im")) {
    throw ValidationError("vector JSON must carry dim/re/im");
  }
  const auto n = j.at("dim").get<Index>();
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (static_cast<Index>(re.size()) != n ||
      static_cast<Index>(im.size()) != n) {
    throw ValidationError("vector JSON length does not match dim");
  }
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = Complex(re.at(static_cast<std::size_t>(i)).get<double>(),
                   im.at(static_cast<std::size_t>(i)).get<double>());
  }
  return v;
}

inline Json to_json(const OperatorFamily& family) {
  Json terms = Json::array();
  for (const auto& t : family.terms) terms.push_back(to_json(t.mat()));
  return Json{{"A", to_json(family.A.mat())}, {"terms", std::move(terms)}};
}

inline OperatorFamily family_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("A") || !j.contains("terms")) {
    throw ValidationError("family JSON must carry A and terms");
  }
  std::vector<HermitianMatrix> terms;
  for (const auto& t : j.at("terms")) {
    terms.emplace_back(matrix_from_json(t));
  }
  return OperatorFamily(HermitianMatrix(matrix_from_json(j.at("A"))),
                        std::move(terms));
}

inline OperatorFamily load_family(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open family file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError("family file " + path + ": " + e.what());
  }
  return family_from_json(j);
}

inline Json to_json(const RSSeries& s) {
  Json phi = Json::array(), Phi = Json::array();
  for (const auto& v : s.Phi) Phi.push_back(to_json(v));
  for (const auto& v : s.phi) phi.push_back(to_json(v));
  return Json{{"order", s.order},
              {"E", s.E},
              {"Phi", std::move(Phi)},
              {"phi", std::move(phi)}};
}

inline Json to_json(const DMSeries& s) {
  Json gamma = Json::array();
  for (const auto& g : s.Gamma) gamma.push_back(to_json(g));
  return Json{{"order", s.order}, {"Gamma", std::move(gamma)}};
}

inline Json to_json(const IdentityResidual& r) {
  return Json{{"name", r.name},          {"lhs_norm", r.lhs_norm},
              {"rhs_norm", r.rhs_norm},  {"residual", r.residual},
              {"tolerance", r.tolerance}, {"pass", r.pass()}};
}

inline Json to_json(const BoundEntry& b) {
  Json j{{"name", b.name},
         {"lhs", b.lhs},
         {"rhs", b.rhs},
         {"slack", b.slack()},
         {"applicable", b.applicable},
         {"asserted", b.asserted},
         {"pass", b.pass()}};
  if (b.fitted_c) j["fitted_c"] = *b.fitted_c;
  return j;
}

inline Json to_json(const XiRecord& x) {
  Json j{{"ell", x.ell},
         {"delta", x.delta},
         {"xi_pt", x.xi_pt},
         {"xi_rbmpt", x.xi_rbmpt},
         {"xi_l", x.xi_l},
         {"xi_l_ratio", x.xi_l_ratio},
         {"xi_l_simple", x.xi_l_simple},
         {"xi_rbmpt_E", x.xi_rbmpt_E}};
  if (x.xi_pt_E) j["xi_pt_E"] = *x.xi_pt_E;
  if (x.xi_deg_cluster) j["xi_deg_cluster"] = *x.xi_deg_cluster;
  if (x.xi_deg_mu) j["xi_deg_mu"] = *x.xi_deg_mu;
  return j;
}

inline Json to_json(const NormContext& c) {
  Json j{{"c_A", c.c_A}, {"c_H", c.c_H}, {"c_H_inf", c.c_H_inf}};
  if (c.c_P) j["c_P"] = *c.c_P;
  if (c.c_K) j["c_K"] = *c.c_K;
  if (c.c_PR) j["c_PR"] = *c.c_PR;
  return j;
}

inline Json to_json(const CertificateReport& r) {
  Json ids = Json::array(), bounds = Json::array(), xi = Json::array();
  for (const auto& i : r.identities) ids.push_back(to_json(i));
  for (const auto& b : r.bounds) bounds.push_back(to_json(b));
  for (const auto& x : r.xi) xi.push_back(to_json(x));
  return Json{{"identities", std::move(ids)},
              {"bounds", std::move(bounds)},
              {"xi", std::move(xi)},
              {"constants", to_json(r.constants)},
              {"all_pass", r.all_pass()}};
}

inline Json to_json(const CertInputs& in) {
  Json phi = Json::array(), psi = Json::array(), r = Json::array();
  for (const auto& v : in.phi) phi.push_back(to_json(v));
  for (const auto& v : in.psi) psi.push_back(to_json(v));
  for (const auto& m : in.R) r.push_back(to_json(m));
  return Json{{"H", to_json(in.H)},
              {"A", to_json(in.A.mat())},
              {"P", to_json(in.P.mat)},
              {"P_rank", in.P.rank},
              {"E", in.E},
              {"phi", std::move(phi)},
              {"cE", in.cE},
              {"psi", std::move(psi)},
              {"R", std::move(r)}};
}

inline CertInputs cert_inputs_from_json(const Json& j) {
  CertInputs in;
  in.H = matrix_from_json(j.at("H"));
  in.A = HermitianMatrix(matrix_from_json(j.at("A")));
  in.P = Projector(matrix_from_json(j.at("P")), j.at("P_rank").get<Index>());
  in.E = j.at("E").get<std::vector<double>>();
  in.cE = j.at("cE").get<std::vector<double>>();
  for (const auto& v : j.at("phi")) in.phi.push_back(vector_from_json(v));
  for (const auto& v : j.at("psi")) in.psi.push_back(vector_from_json(v));
  for (const auto& m : j.at("R")) in.R.push_back(matrix_from_json(m));
  if (in.phi.size() != in.E.size() || in.psi.size() != in.cE.size() ||
      in.phi.size() != in.psi.size() || in.R.size() != in.phi.size()) {
    throw ValidationError("certification fixture: inconsistent cluster sizes");
  }
  in.Gamma = density_matrix(in.phi);
  in.Lambda = density_matrix(in.psi);
  return in;
}

/// CSV with 17-significant-digit decimals, '.' separator, LF endings.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns)
      : columns_(std::move(columns)) {
    std::string line;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) line += ',';
      line += columns_[i];
    }
    body_ = line + "\n";
  }

  static std::string format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) {
      throw InvalidInput("CsvWriter: cell count mismatch");
    }
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    body_ += line + "\n";
  }

  const std::string& str() const { return body_; }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    out << body_;
  }

 private:
  std::vector<std::string> columns_;
  std::string body_;
};

/// FNV-1a 64-bit content hash, hex-encoded.
inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << data;
}

}  // namespace srbm

#endif  // SPECTRAL_RBM_IO_HPP
