#include "qsmooth/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace qsmooth {

using nlohmann::json;

namespace {

constexpr double kGridTol = 1e-12;

complex_t parse_scalar(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  throw ParseError(path + ": expected a number or [re, im] pair");
}

Operator parse_explicit(const json& j, const std::string& path) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  Operator m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    const std::string row_path = fmt::format("{}[{}]", path, r);
    if (!row.is_array()) throw ParseError(row_path + ": expected an array of [re, im] pairs");
    if (static_cast<Eigen::Index>(row.size()) != rows) {
      throw ValidationError(fmt::format("matrix is not square ({} rows, row {} has {} entries)", rows,
                                        r, row.size()),
                            path);
    }
    for (Eigen::Index c = 0; c < rows; ++c) {
      m(r, c) = parse_scalar(row[static_cast<std::size_t>(c)], fmt::format("{}[{}]", row_path, c));
    }
  }
  return m;
}

Operator parse_term(const json& j, Eigen::Index dim, const std::string& path) {
  if (j.is_string()) return operator_preset(j.get<std::string>(), dim);
  if (j.is_object()) {
    if (!j.contains("preset")) throw ParseError(path + ": term object needs a \"preset\" key");
    Operator m = operator_preset(j.at("preset").get<std::string>(), dim);
    if (j.contains("scale")) m *= parse_scalar(j.at("scale"), path + ".scale");
    return m;
  }
  throw ParseError(path + ": expected a preset name or {\"preset\", \"scale\"} object");
}

// Matrix forms: explicit row-major [[ [re,im], ...], ...]; a preset name;
// {"preset": name, "scale": s}; or a list of such terms, summed.
Operator parse_operator(const json& j, Eigen::Index dim, const std::string& path) {
  Operator m;
  try {
    if (j.is_array() && !j.empty() && j[0].is_array()) {
      m = parse_explicit(j, path);
    } else if (j.is_array()) {
      if (j.empty()) throw ParseError(path + ": empty term list");
      m = Operator::Zero(dim, dim);
      for (std::size_t k = 0; k < j.size(); ++k) {
        Operator term = parse_term(j[k], dim, fmt::format("{}[{}]", path, k));
        if (term.rows() != dim) {
          throw ValidationError(fmt::format("term has dimension {}, expected {}", term.rows(), dim), path);
        }
        m += term;
      }
    } else {
      m = parse_term(j, dim, path);
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what(), path);
  }
  if (m.rows() != dim) {
    throw ValidationError(fmt::format("dimension {} does not match system dim {}", m.rows(), dim), path);
  }
  if (!m.allFinite()) throw ValidationError("non-finite entries", path);
  return m;
}

Operator parse_state(const json& j, Eigen::Index dim, const std::string& path) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "maximally_mixed") return ops::identity(dim) / static_cast<double>(dim);
    if (dim == 2) {
      const double s = 1.0 / std::sqrt(2.0);
      StateVector v(2);
      if (name == "ket0") v << 1.0, 0.0;
      else if (name == "ket1") v << 0.0, 1.0;
      else if (name == "plus") v << s, s;
      else if (name == "minus") v << s, -s;
      else if (name == "plus_i") v << s, complex_t(0.0, s);
      else throw ValidationError("unknown state preset \"" + name + "\"", path);
      return ops::pure_state(v);
    }
    throw ValidationError("state preset \"" + name + "\" requires dim 2", path);
  }
  if (j.is_object() && j.contains("ket")) {
    const json& k = j.at("ket");
    if (!k.is_array() || static_cast<Eigen::Index>(k.size()) != dim) {
      throw ValidationError(fmt::format("ket must have {} entries", dim), path + ".ket");
    }
    StateVector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      v(i) = parse_scalar(k[static_cast<std::size_t>(i)], fmt::format("{}.ket[{}]", path, i));
    }
    if (v.norm() == 0.0) throw ValidationError("ket has zero norm", path + ".ket");
    return ops::pure_state(v);
  }
  return parse_operator(j, dim, path);
}

DensityOperator parse_density(const json& j, Eigen::Index dim, const std::string& path,
                              const Tolerances& tol) {
  Operator m = parse_state(j, dim, path);
  try {
    return DensityOperator(std::move(m), tol);
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), path);
  }
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key + ": missing required key");
  return *it;
}

double require_number(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) throw ParseError(path + "." + key + ": expected a number");
  return v.get<double>();
}

std::uint64_t require_unsigned(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ValidationError("expected a non-negative integer", path + "." + key);
}

bool on_grid(double t, double dt) {
  const double k = std::round(t / dt);
  return std::abs(t - k * dt) <= kGridTol;
}

}  // namespace

Operator operator_preset(std::string_view name, Eigen::Index dim) {
  if (name == "identity") return ops::identity(dim);
  if (name == "zero") return Operator::Zero(dim, dim);
  Operator m;
  if (name == "pauli_x") m = ops::pauli_x();
  else if (name == "pauli_y") m = ops::pauli_y();
  else if (name == "pauli_z") m = ops::pauli_z();
  else if (name == "lowering") m = ops::lowering();
  else if (name == "raising") m = ops::raising();
  else throw std::invalid_argument("unknown operator preset \"" + std::string(name) + "\"");
  if (dim != 2) {
    throw std::invalid_argument("preset \"" + std::string(name) + "\" requires dim 2");
  }
  return m;
}

std::size_t ExperimentSpec::n_steps() const {
  return static_cast<std::size_t>(std::llround(t_final / dt));
}

std::size_t ExperimentSpec::tau_step() const {
  return static_cast<std::size_t>(std::llround(tau / dt));
}

SystemSpec make_system(Operator H, Operator L, DensityOperator rho0, const Tolerances& tol) {
  const Eigen::Index dim = rho0.dim();
  if (!is_square(H) || H.rows() != dim) {
    throw ValidationError(fmt::format("H must be {}x{}", dim, dim), "system.H");
  }
  if (!is_square(L) || L.rows() != dim) {
    throw ValidationError(fmt::format("L must be {}x{}", dim, dim), "system.L");
  }
  const double herm = hermiticity_defect(H);
  if (herm > tol.herm) {
    throw ValidationError(fmt::format("H not Hermitian (max |H - H^dag| = {:.3g})", herm), "system.H");
  }
  return SystemSpec{dim, std::move(H), std::move(L), std::move(rho0)};
}

void validate(const SystemSpec& sys, const ExperimentSpec& exp, const Tolerances& tol) {
  if (!(exp.dt > 0.0) || !std::isfinite(exp.dt)) {
    throw ValidationError("dt must be positive", "experiment.dt");
  }
  if (!(exp.t_final > 0.0) || !std::isfinite(exp.t_final)) {
    throw ValidationError("t_final must be positive", "experiment.t_final");
  }
  if (!on_grid(exp.t_final, exp.dt)) {
    throw ValidationError("t_final not on grid (not an integer multiple of dt)", "experiment.t_final");
  }
  if (!(exp.tau >= 0.0) || exp.tau > exp.t_final + kGridTol) {
    throw ValidationError("tau must lie in [0, t_final]", "experiment.tau");
  }
  if (!on_grid(exp.tau, exp.dt)) {
    throw ValidationError("tau not on grid (not an integer multiple of dt)", "experiment.tau");
  }
  if (exp.n_traj == 0) throw ValidationError("n_traj must be positive", "experiment.n_traj");
  for (std::size_t k = 0; k < exp.observables.size(); ++k) {
    const auto& obs = exp.observables[k];
    const std::string path = fmt::format("experiment.observables[{}]", k);
    if (obs.name.empty()) throw ValidationError("observable name must be non-empty", path);
    if (obs.op.rows() != sys.dim || !is_square(obs.op)) {
      throw ValidationError(fmt::format("observable must be {}x{}", sys.dim, sys.dim), path);
    }
    const double herm = hermiticity_defect(obs.op);
    if (herm > tol.herm) {
      throw ValidationError(fmt::format("observable \"{}\" not Hermitian (defect {:.3g})", obs.name, herm),
                            path);
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (exp.observables[j].name == obs.name) {
        throw ValidationError("duplicate observable name \"" + obs.name + "\"", path);
      }
    }
  }
  if (exp.filter_rho0 && exp.filter_rho0->dim() != sys.dim) {
    throw ValidationError("filter_rho0 dimension mismatch", "experiment.filter_rho0");
  }
}

Spec parse_spec(std::string_view json_text, const Tolerances& tol) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }

  const json& sj = require(doc, "system", "");
  const json& dim_j = require(sj, "dim", "system");
  if (!dim_j.is_number_integer() || dim_j.get<long long>() < 1) {
    throw ValidationError("dim must be a positive integer", "system.dim");
  }
  const auto dim = static_cast<Eigen::Index>(dim_j.get<long long>());

  Operator H = parse_operator(require(sj, "H", "system"), dim, "system.H");
  Operator L = parse_operator(require(sj, "L", "system"), dim, "system.L");
  DensityOperator rho0 = parse_density(require(sj, "rho0", "system"), dim, "system.rho0", tol);
  SystemSpec sys = make_system(std::move(H), std::move(L), std::move(rho0), tol);

  const json& ej = require(doc, "experiment", "");
  ExperimentSpec exp;
  exp.dt = require_number(ej, "dt", "experiment");
  exp.t_final = require_number(ej, "t_final", "experiment");
  exp.tau = require_number(ej, "tau", "experiment");
  exp.n_traj = require_unsigned(ej, "n_traj", "experiment");
  exp.seed = require_unsigned(ej, "seed", "experiment");

  if (ej.contains("observables")) {
    const json& oj = ej.at("observables");
    if (oj.is_array()) {
      for (std::size_t k = 0; k < oj.size(); ++k) {
        const std::string path = fmt::format("experiment.observables[{}]", k);
        const json& item = oj[k];
        if (!item.is_object() || !item.contains("name") || !item.contains("op") ||
            !item.at("name").is_string()) {
          throw ParseError(path + ": expected {\"name\": string, \"op\": matrix}");
        }
        exp.observables.push_back(
            {item.at("name").get<std::string>(), parse_operator(item.at("op"), dim, path + ".op")});
      }
    } else if (oj.is_object()) {
      for (const auto& [name, op] : oj.items()) {
        exp.observables.push_back({name, parse_operator(op, dim, "experiment.observables." + name)});
      }
    } else {
      throw ParseError("experiment.observables: expected an array or object");
    }
  }
  if (ej.contains("filter_rho0") && !ej.at("filter_rho0").is_null()) {
    exp.filter_rho0 = parse_density(ej.at("filter_rho0"), dim, "experiment.filter_rho0", tol);
  }

  validate(sys, exp, tol);
  return Spec{std::move(sys), std::move(exp)};
}

Spec load_spec(const std::filesystem::path& path, const Tolerances& tol) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file " + path.string(), "config");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str(), tol);
}

QndReport qnd_report(const SystemSpec& sys, double tol) {
  QndReport r;
  r.normality_defect = max_abs(commutator(sys.L, sys.L.adjoint()));
  r.commutator_norm = max_abs(commutator(sys.H, sys.L));
  r.satisfied = r.normality_defect <= tol && r.commutator_norm <= tol;
  return r;
}

}  // namespace qsmooth
