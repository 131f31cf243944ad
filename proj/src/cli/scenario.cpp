#include "nshift/cli/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace nshift::cli {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + where);
  }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(where + " is missing \"" + key + "\"");
  return *it;
}

double get_number(const json& obj, const std::string& key, const std::string& where,
                  std::optional<double> fallback = std::nullopt) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    throw ConfigError(where + " is missing \"" + key + "\"");
  }
  if (!it->is_number()) throw ConfigError(where + "." + key + " must be a number");
  const double value = it->get<double>();
  if (!std::isfinite(value)) throw ConfigError(where + "." + key + " must be finite");
  return value;
}

int get_int(const json& obj, const std::string& key, const std::string& where, int fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
  return it->get<int>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& where,
                       std::optional<std::string> fallback = std::nullopt) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    throw ConfigError(where + " is missing \"" + key + "\"");
  }
  if (!it->is_string()) throw ConfigError(where + "." + key + " must be a string");
  return it->get<std::string>();
}

Vector get_vector(const json& value, const std::string& where, int size) {
  if (!value.is_array()) throw ConfigError(where + " must be an array");
  if (static_cast<int>(value.size()) != size) {
    throw ConfigError(where + " must have " + std::to_string(size) + " entries");
  }
  Vector out(size);
  for (int i = 0; i < size; ++i) {
    if (!value[i].is_number()) throw ConfigError(where + " must contain numbers");
    out[i] = value[i].get<double>();
  }
  return out;
}

Expression get_expr(const json& obj, const std::string& key, const std::string& where, int dim,
                    std::string_view allowed) {
  return Expression::parse(get_string(obj, key, where), dim, allowed);
}

void parse_box(const json& obj, const std::string& where, int dim, Vector& lo, Vector& hi) {
  check_keys(obj, where, {"lo", "hi"});
  lo = get_vector(require(obj, "lo", where), where + ".lo", dim);
  hi = get_vector(require(obj, "hi", where), where + ".hi", dim);
  for (int k = 0; k < dim; ++k) {
    if (!(hi[k] > lo[k])) throw ConfigError(where + " must have hi > lo in every coordinate");
  }
}

MetricSpec parse_metric(const json& j, int dim) {
  MetricSpec m;
  m.type = get_string(j, "type", "metric");
  if (m.type == "euclidean") {
    check_keys(j, "metric", {"type"});
  } else if (m.type == "conformal") {
    check_keys(j, "metric", {"type", "f"});
    m.f = get_expr(j, "f", "metric", dim, "x");
  } else if (m.type == "diagonal") {
    check_keys(j, "metric", {"type", "entries"});
    const json& entries = require(j, "entries", "metric");
    if (!entries.is_array() || static_cast<int>(entries.size()) != dim) {
      throw ConfigError("metric.entries must be an array of " + std::to_string(dim) + " expressions");
    }
    for (const auto& e : entries) {
      if (!e.is_string()) throw ConfigError("metric.entries must contain strings");
      m.entries.push_back(Expression::parse(e.get<std::string>(), dim, "x"));
    }
  } else {
    throw ConfigError("unknown metric type \"" + m.type + "\"");
  }
  return m;
}

GeneratorSpec parse_generator(const json& j, int dim) {
  GeneratorSpec g;
  g.type = get_string(j, "type", "generator");
  std::set<std::string> keys = {"type", "perturb"};
  if (g.type == "geodesic") {
  } else if (g.type == "metrizable") {
    keys.insert({"f", "H"});
    g.f = get_expr(j, "f", "generator", dim, "x");
    g.H = get_expr(j, "H", "generator", dim, "w");
  } else if (g.type == "nonmetrizable") {
    keys.insert({"f", "A"});
    g.f = get_expr(j, "f", "generator", dim, "x");
    g.A = get_expr(j, "A", "generator", dim, "v");
  } else if (g.type == "custom") {
    keys.insert({"W", "h"});
    g.W = get_expr(j, "W", "generator", dim, "xv");
    g.h = get_expr(j, "h", "generator", dim, "w");
  } else {
    throw ConfigError("unknown generator type \"" + g.type + "\"");
  }
  check_keys(j, "generator", keys);
  if (auto it = j.find("perturb"); it != j.end()) {
    check_keys(*it, "generator.perturb", {"component", "expression"});
    Perturbation p;
    p.component = get_int(*it, "component", "generator.perturb", 0);
    if (p.component < 1 || p.component > dim) {
      throw ConfigError("generator.perturb.component must be in 1.." + std::to_string(dim));
    }
    p.expression = get_expr(*it, "expression", "generator.perturb", dim, "xv");
    g.perturb = p;
  }
  return g;
}

SurfaceSpec parse_surface(const json& j, int dim) {
  SurfaceSpec s;
  s.type = get_string(j, "type", "surface");
  std::set<std::string> keys = {"type", "base_u", "nu0", "orientation"};
  if (s.type == "plane") {
    keys.insert("offset");
    s.offset = get_number(j, "offset", "surface", 0.0);
    s.base_u = Vector::Zero(dim - 1);
  } else if (s.type == "sphere") {
    keys.insert({"center", "radius"});
    s.center = j.contains("center") ? get_vector(j["center"], "surface.center", dim)
                                    : Vector::Zero(dim);
    s.radius = get_number(j, "radius", "surface", 1.0);
    if (!(s.radius > 0.0)) throw ConfigError("surface.radius must be positive");
    s.base_u = Vector::Constant(dim - 1, M_PI / 2);
  } else if (s.type == "graph") {
    keys.insert("height");
    s.height = get_expr(j, "height", "surface", dim, "x");
    if (s.height.depends_on(dim - 1)) {
      throw ConfigError("surface.height may only use x1..x" + std::to_string(dim - 1));
    }
    s.base_u = Vector::Zero(dim - 1);
  } else {
    throw ConfigError("unknown surface type \"" + s.type + "\"");
  }
  check_keys(j, "surface", keys);
  if (j.contains("base_u")) s.base_u = get_vector(j["base_u"], "surface.base_u", dim - 1);
  s.nu0 = get_number(j, "nu0", "surface", 1.0);
  if (s.nu0 == 0.0) throw ConfigError("surface.nu0 must be nonzero");
  s.orientation = get_int(j, "orientation", "surface", 1);
  if (s.orientation != 1 && s.orientation != -1) throw ConfigError("surface.orientation must be 1 or -1");
  return s;
}

RunSpec parse_run(const json& j, int dim) {
  check_keys(j, "run", {"t_end", "dt", "u_grid", "sample_stride", "phi_tolerance", "w_tolerance", "box"});
  RunSpec r;
  r.t_end = get_number(j, "t_end", "run", 1.0);
  r.dt = get_number(j, "dt", "run", 1e-3);
  if (!(r.t_end > 0.0) || !(r.dt > 0.0)) throw ConfigError("run.t_end and run.dt must be positive");
  const json& grid = require(j, "u_grid", "run");
  check_keys(grid, "run.u_grid", {"lo", "hi", "count"});
  r.u_lo = get_vector(require(grid, "lo", "run.u_grid"), "run.u_grid.lo", dim - 1);
  r.u_hi = get_vector(require(grid, "hi", "run.u_grid"), "run.u_grid.hi", dim - 1);
  const json& count = require(grid, "count", "run.u_grid");
  if (!count.is_array() || static_cast<int>(count.size()) != dim - 1) {
    throw ConfigError("run.u_grid.count must have " + std::to_string(dim - 1) + " entries");
  }
  for (const auto& c : count) {
    if (!c.is_number_integer()) throw ConfigError("run.u_grid.count must contain integers");
    r.u_count.push_back(c.get<int>());
  }
  r.sample_stride = get_int(j, "sample_stride", "run", 1);
  if (r.sample_stride < 1) throw ConfigError("run.sample_stride must be >= 1");
  r.phi_tolerance = get_number(j, "phi_tolerance", "run", 1e-6);
  r.w_tolerance = get_number(j, "w_tolerance", "run", 1e-8);
  if (!(r.phi_tolerance > 0.0) || !(r.w_tolerance > 0.0)) throw ConfigError("run tolerances must be positive");
  if (j.contains("box")) parse_box(j["box"], "run.box", dim, r.box_lo, r.box_hi);
  return r;
}

VerifySpec parse_verify(const json& j, int dim) {
  VerifySpec v;
  v.box_lo = Vector::Constant(dim, -1.0);
  v.box_hi = Vector::Constant(dim, 1.0);
  if (j.is_null()) return v;
  check_keys(j, "verify", {"sample_count", "box", "speed_range", "tolerance", "ansatz_tolerance", "mode"});
  v.sample_count = get_int(j, "sample_count", "verify", 200);
  if (v.sample_count < 1) throw ConfigError("verify.sample_count must be >= 1");
  if (j.contains("box")) parse_box(j["box"], "verify.box", dim, v.box_lo, v.box_hi);
  if (j.contains("speed_range")) {
    const Vector r = get_vector(j["speed_range"], "verify.speed_range", 2);
    v.speed_lo = r[0];
    v.speed_hi = r[1];
    if (!(v.speed_lo > 0.0) || v.speed_hi < v.speed_lo) {
      throw ConfigError("verify.speed_range must be positive and increasing");
    }
  }
  v.tolerance = get_number(j, "tolerance", "verify", 1e-8);
  if (!(v.tolerance > 0.0)) throw ConfigError("verify.tolerance must be positive");
  v.ansatz_tolerance = get_number(j, "ansatz_tolerance", "verify", 0.0);
  if (v.ansatz_tolerance < 0.0) throw ConfigError("verify.ansatz_tolerance must be non-negative");
  const std::string mode = get_string(j, "mode", "verify", std::string("analytic"));
  if (mode == "analytic") v.mode = DerivativeMode::Analytic;
  else if (mode == "finite-diff") v.mode = DerivativeMode::FiniteDiff;
  else throw ConfigError("verify.mode must be \"analytic\" or \"finite-diff\"");
  return v;
}

std::vector<double> pack(const Coords& x, double v = 0.0, double w = 0.0) {
  std::vector<double> values(static_cast<std::size_t>(x.size()) + 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) values[static_cast<std::size_t>(i)] = x[i];
  values[static_cast<std::size_t>(x.size())] = v;
  values[static_cast<std::size_t>(x.size()) + 1] = w;
  return values;
}

PositionScalar position_scalar(const Expression& e, bool analytic) {
  PositionScalar f;
  f.eval = [e](const Coords& x) { return e.eval(pack(x)); };
  if (analytic) {
    std::vector<Expression> grad;
    for (int k = 0; k < e.dim(); ++k) grad.push_back(e.derivative(k));
    f.grad = [grad](const Coords& x) {
      Vector g(x.size());
      const auto values = pack(x);
      for (Eigen::Index k = 0; k < x.size(); ++k) g[k] = grad[static_cast<std::size_t>(k)].eval(values);
      return g;
    };
  }
  return f;
}

ScalarFn scalar_in(const Expression& e, int slot) {
  return [e, slot](double t) {
    std::vector<double> values(static_cast<std::size_t>(e.dim()) + 2, 0.0);
    values[static_cast<std::size_t>(slot)] = t;
    return e.eval(values);
  };
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, "scenario", {"name", "dim", "metric", "generator", "surface", "run", "verify", "seed"});
  Scenario sc;
  sc.source = text;
  sc.name = get_string(doc, "name", "scenario");
  sc.dim = get_int(doc, "dim", "scenario", 3);
  if (sc.dim < 3) throw ConfigError("dim must be at least 3");
  if (sc.dim > 11) throw ConfigError("dim must be at most 11");
  sc.metric = parse_metric(require(doc, "metric", "scenario"), sc.dim);
  sc.generator = parse_generator(require(doc, "generator", "scenario"), sc.dim);
  if (doc.contains("surface")) sc.surface = parse_surface(doc["surface"], sc.dim);
  if (doc.contains("run")) sc.run = parse_run(doc["run"], sc.dim);
  sc.verify = parse_verify(doc.contains("verify") ? doc["verify"] : json(), sc.dim);
  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    sc.seed = it->get<std::uint64_t>();
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

MetricField build_metric(const Scenario& sc) {
  const bool analytic = sc.verify.mode == DerivativeMode::Analytic;
  const MetricSpec& spec = sc.metric;
  const int n = sc.dim;
  if (spec.type == "euclidean") return MetricField::euclidean(n);
  if (spec.type == "conformal") {
    const PositionScalar f = position_scalar(spec.f, analytic);
    std::function<Vector(const Coords&)> grad;
    if (analytic) grad = f.grad;
    return MetricField::conformal(n, f.eval, grad);
  }
  std::vector<PositionScalar> entries;
  for (const auto& e : spec.entries) entries.push_back(position_scalar(e, analytic));
  auto values = [entries](const Coords& x) {
    Vector d(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) d[static_cast<Eigen::Index>(i)] = entries[i](x);
    return d;
  };
  std::function<Matrix(const Coords&)> grads;
  if (analytic) {
    grads = [entries](const Coords& x) {
      Matrix g(static_cast<Eigen::Index>(entries.size()), x.size());
      for (std::size_t i = 0; i < entries.size(); ++i) {
        g.row(static_cast<Eigen::Index>(i)) = entries[i].gradient(x).transpose();
      }
      return g;
    };
  }
  return MetricField::diagonal(n, values, grads);
}

GeneratingScalar build_generator(const Scenario& sc) {
  const bool analytic = sc.verify.mode == DerivativeMode::Analytic;
  const GeneratorSpec& g = sc.generator;
  const int n = sc.dim;
  GeneratingScalar gs;
  if (g.type == "geodesic") {
    gs = builtin_geodesic();
  } else if (g.type == "metrizable") {
    gs = builtin_metrizable(position_scalar(g.f, analytic), scalar_in(g.H, n + 1));
  } else if (g.type == "nonmetrizable") {
    gs = builtin_nonmetrizable(position_scalar(g.f, analytic), scalar_in(g.A, n));
  } else {
    const Expression W = g.W;
    gs.name = "custom";
    gs.W.eval = [W](const Coords& x, double s) { return W.eval(pack(x, s)); };
    if (analytic) {
      std::vector<Expression> dx;
      for (int k = 0; k < n; ++k) dx.push_back(W.derivative(k));
      const Expression dv = W.derivative(n);
      gs.W.dx = [dx](const Coords& x, double s) {
        const auto values = pack(x, s);
        Covector out(x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) out[k] = dx[static_cast<std::size_t>(k)].eval(values);
        return out;
      };
      gs.W.dspeed = [dv](const Coords& x, double s) { return dv.eval(pack(x, s)); };
    }
    gs.h = scalar_in(g.h, n + 1);
  }
  if (!analytic) gs = without_analytic_partials(gs);
  return gs;
}

ForceField build_force(const Scenario& sc, const GeneratingScalar& gs) {
  ForceField F = make_force_field(gs);
  if (!sc.generator.perturb) return F;
  const Perturbation p = *sc.generator.perturb;
  ForceField out;
  out.label = ForceOrigin::User;
  out.eval = [F, p](const MetricField& m, const Coords& x, const Velocity& v) {
    Covector value = F(m, x, v);
    value[p.component - 1] += p.expression.eval(pack(x, speed_of(m, x, v)));
    return value;
  };
  return out;
}

Hypersurface build_surface(const Scenario& sc) {
  if (!sc.surface) throw ConfigError("scenario has no surface section");
  const SurfaceSpec& spec = *sc.surface;
  Hypersurface s;
  if (spec.type == "plane") {
    s = Hypersurface::plane(sc.dim, spec.offset);
  } else if (spec.type == "sphere") {
    s = Hypersurface::sphere(spec.center, spec.radius);
  } else {
    const Expression height = spec.height;
    const int n = sc.dim;
    s = Hypersurface::graph(n, [height, n](const Vector& u) {
      Coords x = Coords::Zero(n);
      x.head(n - 1) = u;
      return height.eval(pack(x));
    });
  }
  s.base_u = spec.base_u;
  s.nu0 = spec.nu0;
  s.orientation = spec.orientation;
  return s;
}

GridSpec build_grid(const Scenario& sc) {
  if (!sc.run) throw ConfigError("scenario has no run section");
  GridSpec g;
  g.lo = sc.run->u_lo;
  g.hi = sc.run->u_hi;
  g.count = sc.run->u_count;
  return g;
}

SampleSpec build_samples(const Scenario& sc) {
  SampleSpec s;
  s.count = sc.verify.sample_count;
  s.box_lo = sc.verify.box_lo;
  s.box_hi = sc.verify.box_hi;
  s.speed_lo = sc.verify.speed_lo;
  s.speed_hi = sc.verify.speed_hi;
  s.seed = sc.seed;
  return s;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

}  // namespace nshift::cli
