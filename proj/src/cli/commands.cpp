#include "nshift/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nshift/cli/scenario.hpp"
#include "nshift/error.hpp"

#ifndef NSHIFT_VERSION
#define NSHIFT_VERSION "0.0.0"
#endif

namespace nshift::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hash_string(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string short_num(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3e", value);
  return buf;
}

void require_finite(double value, const std::string& name) {
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFinite, name + " is not finite");
}

ordered_json normality_json(const NormalityReport& r) {
  ordered_json fam = ordered_json::object();
  for (const auto& [name, value] : r.families()) fam[name] = value;
  ordered_json j;
  j["families"] = fam;
  j["has_reduced"] = r.has_reduced;
  j["sample_count"] = r.sample_count;
  j["tolerance"] = r.tolerance_used;
  j["ansatz_tolerance"] = r.ansatz_tolerance_used;
  j["lambda_samples"] = r.lambda_samples;
  j["failing"] = r.failing();
  j["pass"] = r.pass;
  return j;
}

NormalityReport normality_from(const json& j) {
  NormalityReport r;
  const json& fam = j.at("families");
  r.r_weak1 = fam.at("r_weak1").get<double>();
  r.r_weak2 = fam.at("r_weak2").get<double>();
  r.r_add1 = fam.at("r_add1").get<double>();
  r.r_add2 = fam.at("r_add2").get<double>();
  r.r_eq124 = fam.at("r_eq124").get<double>();
  r.r_eq121 = fam.at("r_eq121").get<double>();
  r.r_eq122 = fam.at("r_eq122").get<double>();
  r.has_reduced = j.at("has_reduced").get<bool>();
  if (r.has_reduced) {
    r.r_reduced_b = fam.at("r_reduced_b").get<double>();
    r.r_reduced_a = fam.at("r_reduced_a").get<double>();
  }
  r.sample_count = j.at("sample_count").get<int>();
  r.tolerance_used = j.at("tolerance").get<double>();
  r.ansatz_tolerance_used = j.at("ansatz_tolerance").get<double>();
  r.lambda_samples = j.at("lambda_samples").get<std::vector<double>>();
  r.pass = j.at("pass").get<bool>();
  return r;
}

ordered_json shift_json(const ShiftSummary& s) {
  ordered_json j;
  j["max_norm_phi"] = s.max_norm_phi;
  j["w_dyn_residual"] = s.w_dyn_residual;
  j["per_time_spread"] = s.per_time_spread;
  if (s.speed_law_residual) j["speed_law_residual"] = *s.speed_law_residual;
  j["phi_tolerance"] = s.phi_tolerance;
  j["w_tolerance"] = s.w_tolerance;
  j["force_constant_nu"] = s.force_constant_nu;
  j["trajectories"] = s.trajectories;
  j["time_samples"] = s.time_samples;
  j["pass"] = s.pass;
  return j;
}

ShiftSummary shift_from(const json& j) {
  ShiftSummary s;
  s.max_norm_phi = j.at("max_norm_phi").get<double>();
  s.w_dyn_residual = j.at("w_dyn_residual").get<double>();
  s.per_time_spread = j.at("per_time_spread").get<std::vector<double>>();
  if (j.contains("speed_law_residual")) s.speed_law_residual = j.at("speed_law_residual").get<double>();
  s.phi_tolerance = j.at("phi_tolerance").get<double>();
  s.w_tolerance = j.at("w_tolerance").get<double>();
  s.force_constant_nu = j.at("force_constant_nu").get<bool>();
  s.trajectories = j.at("trajectories").get<int>();
  s.time_samples = j.at("time_samples").get<int>();
  s.pass = j.at("pass").get<bool>();
  return s;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write \"" + path.string() + "\"");
  out << content;
  if (!out) throw ConfigError("failed writing \"" + path.string() + "\"");
}

std::filesystem::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory \"" + dir + "\": " + ec.message());
  return std::filesystem::path(dir);
}

Provenance make_provenance(const Scenario& sc, const std::string& path, const std::string& started) {
  Provenance p;
  p.config_path = path;
  p.config_hash = hash_string(fnv1a(sc.source));
  p.tool_version = NSHIFT_VERSION;
  p.started_at = started;
  p.finished_at = utc_now();
  p.seed = sc.seed;
  return p;
}

// Runs `body`, mapping exceptions to exit codes with a one-line diagnostic.
template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << (e.code() == ErrorCode::TrajectoryEscaped ? "trajectory escape: " : "numerical error: ")
        << e.what() << "\n";
    return e.code() == ErrorCode::TrajectoryEscaped ? kExitEscape : kExitNumeric;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

void print_families(const NormalityReport& r, std::ostream& out) {
  for (const auto& [name, value] : r.families()) {
    const bool nested = name == "r_eq124" || name == "r_eq121" || name == "r_eq122";
    const double tol = nested ? r.ansatz_tolerance_used : r.tolerance_used;
    char line[128];
    std::snprintf(line, sizeof line, "  %-12s %12s  tol %9s  %s\n", name.c_str(),
                  short_num(value).c_str(), short_num(tol).c_str(), value < tol ? "ok" : "FAIL");
    out << line;
  }
}

}  // namespace

std::string bundle_to_json(const ReportBundle& b) {
  ordered_json j;
  j["schema"] = "nshift-report/1";
  j["scenario"] = b.scenario;
  j["command"] = b.command;
  j["exit_code"] = b.exit_code;
  j["normality"] = b.normality ? normality_json(*b.normality) : ordered_json(nullptr);
  j["shift_summary"] = b.shift_summary ? shift_json(*b.shift_summary) : ordered_json(nullptr);
  ordered_json p;
  p["config_path"] = b.provenance.config_path;
  p["config_hash"] = b.provenance.config_hash;
  p["tool_version"] = b.provenance.tool_version;
  p["started_at"] = b.provenance.started_at;
  p["finished_at"] = b.provenance.finished_at;
  p["seed"] = b.provenance.seed;
  j["provenance"] = p;
  return j.dump(2) + "\n";
}

ReportBundle bundle_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("schema").get<std::string>() != "nshift-report/1") {
      throw ConfigError("unsupported report schema");
    }
    ReportBundle b;
    b.scenario = j.at("scenario").get<std::string>();
    b.command = j.at("command").get<std::string>();
    b.exit_code = j.at("exit_code").get<int>();
    if (!j.at("normality").is_null()) b.normality = normality_from(j.at("normality"));
    if (!j.at("shift_summary").is_null()) b.shift_summary = shift_from(j.at("shift_summary"));
    const json& p = j.at("provenance");
    b.provenance.config_path = p.at("config_path").get<std::string>();
    b.provenance.config_hash = p.at("config_hash").get<std::string>();
    b.provenance.tool_version = p.at("tool_version").get<std::string>();
    b.provenance.started_at = p.at("started_at").get<std::string>();
    b.provenance.finished_at = p.at("finished_at").get<std::string>();
    b.provenance.seed = p.at("seed").get<std::uint64_t>();
    return b;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("corrupt report bundle: ") + e.what());
  }
}

std::string trajectories_csv(const ShiftRecord& rec) {
  const int n = rec.dim;
  std::string out = "traj_id,t";
  for (int i = 1; i <= n; ++i) out += ",x" + std::to_string(i);
  for (int i = 1; i <= n; ++i) out += ",v" + std::to_string(i);
  out += ",speed,W";
  for (int k = 1; k < n; ++k) out += ",phi_" + std::to_string(k);
  out += "\n";
  for (std::size_t id = 0; id < rec.trajectory_count(); ++id) {
    for (std::size_t j = 0; j < rec.times.size(); ++j) {
      const PhaseState& st = rec.states[id][j];
      out += std::to_string(id);
      out += "," + fmt(rec.times[j]);
      for (int i = 0; i < n; ++i) out += "," + fmt(st.x[i]);
      for (int i = 0; i < n; ++i) out += "," + fmt(st.v[i]);
      out += "," + fmt(rec.speed_vals[id][j]);
      out += "," + fmt(rec.W_vals[id][j]);
      for (int k = 0; k < n - 1; ++k) out += "," + fmt(rec.phi[id][j][k]);
      out += "\n";
    }
  }
  return out;
}

int cmd_verify(const std::string& config_path, const CommandOptions& opts, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    const std::string started = utc_now();
    Scenario sc = load_scenario(config_path);
    if (opts.tolerance) {
      if (!(*opts.tolerance > 0.0)) throw ConfigError("--tolerance must be positive");
      sc.verify.tolerance = *opts.tolerance;
    }
    if (opts.seed) sc.seed = *opts.seed;
    const std::filesystem::path dir = prepare_out_dir(opts.out_dir);

    const MetricField m = build_metric(sc);
    const GeneratingScalar gs = build_generator(sc);
    VerifyOptions vo;
    vo.tolerance = sc.verify.tolerance;
    vo.ansatz_tolerance = sc.verify.ansatz_tolerance;
    // Without analytic partials the ansatz Hessians nest three stencils; a
    // wider outer step keeps them above the rounding floor.
    if (sc.verify.mode == DerivativeMode::FiniteDiff) vo.hessian_scale = 3.0;
    const SampleSpec samples = build_samples(sc);
    const NormalityReport report = sc.generator.perturb
                                       ? verify(build_force(sc, gs), m, samples, vo)
                                       : verify(gs, m, samples, vo);

    ReportBundle bundle;
    bundle.scenario = sc.name;
    bundle.command = "verify";
    bundle.normality = report;
    bundle.exit_code = report.pass ? kExitPass : kExitFail;
    bundle.provenance = make_provenance(sc, config_path, started);
    write_file(dir / "report.json", bundle_to_json(bundle));

    out << "verify " << sc.name << ": " << report.sample_count << " samples\n";
    print_families(report, out);
    if (!report.pass) {
      out << "failing:";
      for (const auto& name : report.failing()) out << " " << name;
      out << "\n";
    }
    out << (report.pass ? "PASS" : "FAIL") << "\n";
    return bundle.exit_code;
  });
}

int cmd_shift(const std::string& config_path, const CommandOptions& opts, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const std::string started = utc_now();
    Scenario sc = load_scenario(config_path);
    if (!sc.run) throw ConfigError("shift needs a run section");
    if (!sc.surface) throw ConfigError("shift needs a surface section");
    if (opts.tolerance) {
      if (!(*opts.tolerance > 0.0)) throw ConfigError("--tolerance must be positive");
      sc.run->phi_tolerance = *opts.tolerance;
    }
    if (opts.seed) sc.seed = *opts.seed;
    if (sc.generator.perturb) throw ConfigError("shift does not accept a perturbed generator");
    const std::filesystem::path dir = prepare_out_dir(opts.out_dir);

    const MetricField m = build_metric(sc);
    const GeneratingScalar gs = build_generator(sc);
    const Hypersurface s = build_surface(sc);
    ShiftOptions so;
    so.force_constant_nu = opts.force_constant_nu;
    so.sample_stride = sc.run->sample_stride;
    so.box_lo = sc.run->box_lo;
    so.box_hi = sc.run->box_hi;
    const ShiftRecord rec = run_shift(gs, m, s, build_grid(sc), sc.run->t_end, sc.run->dt, so);

    ShiftSummary sum;
    sum.max_norm_phi = max_normalized_deviation(rec);
    sum.w_dyn_residual = w_dynamics_residual(rec, gs);
    sum.per_time_spread = surface_constancy_residual(rec);
    if (rec.times.size() >= 6) sum.speed_law_residual = speed_law_residual(rec, gs, m);
    sum.phi_tolerance = sc.run->phi_tolerance;
    sum.w_tolerance = sc.run->w_tolerance;
    sum.force_constant_nu = opts.force_constant_nu;
    sum.trajectories = static_cast<int>(rec.trajectory_count());
    sum.time_samples = static_cast<int>(rec.times.size());
    require_finite(sum.max_norm_phi, "max_norm_phi");
    require_finite(sum.w_dyn_residual, "w_dyn_residual");
    for (double v : sum.per_time_spread) require_finite(v, "per_time_spread");
    if (sum.speed_law_residual) require_finite(*sum.speed_law_residual, "speed_law_residual");
    sum.pass = sum.max_norm_phi < sum.phi_tolerance && sum.w_dyn_residual < sum.w_tolerance;

    write_file(dir / "trajectories.csv", trajectories_csv(rec));
    ReportBundle bundle;
    bundle.scenario = sc.name;
    bundle.command = "shift";
    bundle.shift_summary = sum;
    bundle.exit_code = sum.pass ? kExitPass : kExitFail;
    bundle.provenance = make_provenance(sc, config_path, started);
    write_file(dir / "report.json", bundle_to_json(bundle));

    double spread = 0.0;
    for (double v : sum.per_time_spread) spread = std::max(spread, v);
    out << "shift " << sc.name << ": " << sum.trajectories << " trajectories, "
        << sum.time_samples << " samples" << (sum.force_constant_nu ? " (constant nu)" : "") << "\n";
    out << "  max_norm_phi   " << short_num(sum.max_norm_phi) << "  tol " << short_num(sum.phi_tolerance) << "\n";
    out << "  w_dyn_residual " << short_num(sum.w_dyn_residual) << "  tol " << short_num(sum.w_tolerance) << "\n";
    out << "  max spread     " << short_num(spread) << "\n";
    if (sum.speed_law_residual) out << "  speed law      " << short_num(*sum.speed_law_residual) << "\n";
    out << (sum.pass ? "PASS" : "FAIL") << "\n";
    return bundle.exit_code;
  });
}

int cmd_report(const std::string& bundle_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::ifstream in(bundle_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open bundle \"" + bundle_path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    const ReportBundle b = bundle_from_json(buf.str());

    out << "scenario  " << b.scenario << "\n";
    out << "command   " << b.command << "  (exit " << b.exit_code << ")\n";
    if (b.normality) {
      out << "normality residuals over " << b.normality->sample_count << " samples\n";
      print_families(*b.normality, out);
    }
    if (b.shift_summary) {
      const ShiftSummary& s = *b.shift_summary;
      double spread = 0.0;
      for (double v : s.per_time_spread) spread = std::max(spread, v);
      auto row = [&](const char* name, double value, std::optional<double> tol) {
        char line[128];
        if (tol) {
          std::snprintf(line, sizeof line, "  %-18s %12s  tol %9s  %s\n", name, short_num(value).c_str(),
                        short_num(*tol).c_str(), value < *tol ? "ok" : "FAIL");
        } else {
          std::snprintf(line, sizeof line, "  %-18s %12s\n", name, short_num(value).c_str());
        }
        out << line;
      };
      out << "shift summary (" << s.trajectories << " trajectories, " << s.time_samples << " samples"
          << (s.force_constant_nu ? ", constant nu" : "") << ")\n";
      row("max_norm_phi", s.max_norm_phi, s.phi_tolerance);
      row("w_dyn_residual", s.w_dyn_residual, s.w_tolerance);
      row("max_time_spread", spread, std::nullopt);
      if (s.speed_law_residual) row("speed_law_residual", *s.speed_law_residual, std::nullopt);
    }
    out << "provenance " << b.provenance.config_hash << "  version " << b.provenance.tool_version
        << "  seed " << b.provenance.seed << "\n";
    out << "           " << b.provenance.started_at << " -> " << b.provenance.finished_at << "\n";
    return kExitPass;
  });
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Normal shift experiments on Riemannian charts"};
  app.require_subcommand(1);

  CommandOptions opts;
  std::string config;
  double tolerance = 0.0;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "scenario file (JSON)")->required();
    sub->add_option("--tolerance", tolerance, "override the pass tolerance");
    sub->add_option("--seed", seed, "override the sampling seed");
    sub->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
  };
  CLI::App* verify_cmd = app.add_subcommand("verify", "check the normality equations");
  add_common(verify_cmd);
  CLI::App* shift_cmd = app.add_subcommand("shift", "simulate the normal shift of a surface");
  add_common(shift_cmd);
  shift_cmd->add_flag("--force-constant-nu", opts.force_constant_nu,
                      "start every trajectory with nu0 instead of solving for nu");
  std::string bundle;
  CLI::App* report_cmd = app.add_subcommand("report", "render a report bundle");
  report_cmd->add_option("bundle", bundle, "report.json written by verify or shift")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }
  auto finish = [&](CLI::App* sub) {
    if (sub->count("--tolerance")) opts.tolerance = tolerance;
    if (sub->count("--seed")) opts.seed = seed;
  };
  if (*verify_cmd) {
    finish(verify_cmd);
    return cmd_verify(config, opts, std::cout, std::cerr);
  }
  if (*shift_cmd) {
    finish(shift_cmd);
    return cmd_shift(config, opts, std::cout, std::cerr);
  }
  return cmd_report(bundle, std::cout, std::cerr);
}

}  // namespace nshift::cli
