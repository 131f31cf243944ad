#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nshift/cli/expression.hpp"
#include "nshift/force_builder.hpp"
#include "nshift/normality_verifier.hpp"
#include "nshift/shift_engine.hpp"
#include "nshift/tensor_core.hpp"

namespace nshift::cli {

enum class DerivativeMode { Analytic, FiniteDiff };

struct MetricSpec {
  std::string type = "euclidean";  ///< euclidean | conformal | diagonal
  Expression f;                    ///< conformal: g = exp(-2 f) delta
  std::vector<Expression> entries;  ///< diagonal
};

struct Perturbation {
  int component = 1;  ///< 1-based covector index
  Expression expression;  ///< in x1..xn and v = |v|
};

struct GeneratorSpec {
  std::string type = "geodesic";  ///< geodesic | metrizable | nonmetrizable | custom
  Expression f;
  Expression H;  ///< metrizable, in w
  Expression A;  ///< nonmetrizable, in v
  Expression W;  ///< custom, in x and v
  Expression h;  ///< custom, in w
  std::optional<Perturbation> perturb;
};

struct SurfaceSpec {
  std::string type = "plane";  ///< plane | sphere | graph
  double offset = 0.0;
  Vector center;
  double radius = 1.0;
  Expression height;  ///< graph, in x1..x_{n-1} standing for the parameters
  Vector base_u;
  double nu0 = 1.0;
  int orientation = 1;
};

struct RunSpec {
  double t_end = 1.0;
  double dt = 1e-3;
  Vector u_lo;
  Vector u_hi;
  std::vector<int> u_count;
  int sample_stride = 1;
  double phi_tolerance = 1e-6;
  double w_tolerance = 1e-8;
  Vector box_lo;  ///< empty: unbounded
  Vector box_hi;
};

struct VerifySpec {
  int sample_count = 200;
  Vector box_lo;
  Vector box_hi;
  double speed_lo = 0.5;
  double speed_hi = 2.0;
  double tolerance = 1e-8;
  double ansatz_tolerance = 0.0;
  DerivativeMode mode = DerivativeMode::Analytic;
};

struct Scenario {
  std::string name;
  int dim = 3;
  MetricSpec metric;
  GeneratorSpec generator;
  std::optional<SurfaceSpec> surface;
  std::optional<RunSpec> run;
  VerifySpec verify;
  std::uint64_t seed = 1;
  std::string source;  ///< raw config text, hashed into the report provenance
};

/// Parses and validates a scenario document. Unknown keys, wrong types and
/// dimension mismatches raise ConfigError.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

MetricField build_metric(const Scenario& sc);
GeneratingScalar build_generator(const Scenario& sc);
/// The generated force field plus the optional perturbation.
ForceField build_force(const Scenario& sc, const GeneratingScalar& gs);
Hypersurface build_surface(const Scenario& sc);
GridSpec build_grid(const Scenario& sc);
SampleSpec build_samples(const Scenario& sc);

/// 64-bit FNV-1a of the bytes of `text`.
std::uint64_t fnv1a(const std::string& text);

}  // namespace nshift::cli
