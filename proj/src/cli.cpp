#include "crstokes/cli.hpp"

#include "crstokes/field_io.hpp"
#include "crstokes/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>
#include <thread>

namespace crstokes {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

template <class T>
T as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "': wrong type (" + v.dump() + ")");
  }
}

void apply_key(RunConfig& c, const std::string& key, const json& v) {
  auto& s = c.controls;
  if (key == "command") c.command = as<std::string>(v, key);
  else if (key == "mesh") c.mesh = as<std::string>(v, key);
  else if (key == "A") c.A = as<double>(v, key);
  else if (key == "M") c.M = as<double>(v, key);
  else if (key == "alpha") c.alpha = as<double>(v, key);
  else if (key == "beta") c.beta = as<double>(v, key);
  else if (key == "allow_out_of_range") c.allow_out_of_range = as<bool>(v, key);
  else if (key == "tolerance") s.tolerance = as<double>(v, key);
  else if (key == "max_iterations") s.max_iterations = as<int>(v, key);
  else if (key == "damping") s.damping = as<double>(v, key);
  else if (key == "direct_threshold") s.direct_threshold = as<int>(v, key);
  else if (key == "linear_tolerance") s.linear_tolerance = as<double>(v, key);
  else if (key == "linear_max_iterations") s.linear_max_iterations = as<int>(v, key);
  else if (key == "seed") s.seed = as<std::uint64_t>(v, key);
  else if (key == "quad_order") s.quad_order = as<int>(v, key);
  else if (key == "method") {
    const auto m = as<std::string>(v, key);
    if (m == "newton") s.method = NonlinearMethod::Newton;
    else if (m == "picard") s.method = NonlinearMethod::Picard;
    else throw ConfigError("config key 'method': expected newton or picard, got '" + m + "'");
  } else if (key == "linear_solver") {
    const auto m = as<std::string>(v, key);
    if (m == "auto") s.linear_mode = LinearSolveMode::Auto;
    else if (m == "direct") s.linear_mode = LinearSolveMode::Direct;
    else if (m == "iterative") s.linear_mode = LinearSolveMode::Iterative;
    else throw ConfigError("config key 'linear_solver': expected auto, direct or iterative");
  } else if (key == "mode") c.mode = as<int>(v, key);
  else if (key == "amplitude") c.amplitude = as<double>(v, key);
  else if (key == "forcing") c.forcing = as<std::string>(v, key);
  else if (key == "levels") c.levels = as<int>(v, key);
  else if (key == "out") c.out = as<std::string>(v, key);
  else if (key == "csv") c.csv = as<bool>(v, key);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string method_name(NonlinearMethod m) { return m == NonlinearMethod::Newton ? "newton" : "picard"; }
std::string linear_name(LinearSolveMode m) {
  return m == LinearSolveMode::Auto ? "auto" : m == LinearSolveMode::Direct ? "direct" : "iterative";
}

void validate(const RunConfig& c) {
  static const std::vector<std::string> commands{"solve", "study", "verify", "mesh-info"};
  if (std::find(commands.begin(), commands.end(), c.command) == commands.end())
    throw ConfigError("unknown command '" + c.command + "'");
  if (!(c.A > 0.0) || !(c.M > 0.0)) throw ConfigError("A and M must be positive");
  if (c.mode < 0) throw ConfigError("mode must be >= 0");
  if (c.forcing != "manufactured" && c.forcing != "zero")
    throw ConfigError("forcing must be 'manufactured' or 'zero'");
  if (c.levels < 1) throw ConfigError("levels must be >= 1");
  if (c.command == "study" && c.levels < 3) throw ConfigError("study needs levels >= 3");
  try {
    c.controls.validate();
    SchemeParams::make(c.A, c.M, c.alpha, c.beta, 1.0, c.allow_out_of_range);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Mesh load_mesh(const std::string& source) {
  static const std::regex structured(R"(^\s*(\d+)\s*x\s*(\d+)\s*$)");
  std::smatch m;
  if (std::regex_match(source, m, structured)) {
    const int nx = std::stoi(m[1]), ny = std::stoi(m[2]);
    if (nx < 1 || ny < 1) throw ConfigError("mesh '" + source + "': counts must be >= 1");
    return build_structured(nx, ny);
  }
  const fs::path p = fs::absolute(source);
  if (!fs::exists(p)) throw ConfigError("mesh file not found: " + p.string());
  try {
    return read_mesh_file(p.string());
  } catch (const MeshError& e) {
    throw ConfigError(std::string("mesh ") + p.string() + ": " + e.what());
  }
}

json residual_json(const ResidualTriple& r, double combined) {
  return {{"momentum", r.momentum}, {"mass", r.mass}, {"mass_max", r.mass_max},
          {"mass_defect", r.mass_defect}, {"combined", combined}};
}

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

}  // namespace

void apply_config_json(RunConfig& cfg, std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) apply_key(cfg, key, value);
}

void apply_param(RunConfig& cfg, std::string_view kv) {
  const auto eq = kv.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("--param expects key=value, got '" + std::string(kv) + "'");
  const std::string key(kv.substr(0, eq));
  const std::string raw(kv.substr(eq + 1));
  json v = json::parse(raw, nullptr, false);
  if (v.is_discarded()) v = raw;
  apply_key(cfg, key, v);
}

std::string canonical_config(const RunConfig& c) {
  const auto& s = c.controls;
  json j = {{"command", c.command}, {"mesh", c.mesh}, {"A", c.A}, {"M", c.M}, {"alpha", c.alpha},
            {"beta", c.beta}, {"allow_out_of_range", c.allow_out_of_range}, {"tolerance", s.tolerance},
            {"max_iterations", s.max_iterations}, {"damping", s.damping},
            {"direct_threshold", s.direct_threshold}, {"linear_tolerance", s.linear_tolerance},
            {"linear_max_iterations", s.linear_max_iterations}, {"seed", s.seed},
            {"quad_order", s.quad_order}, {"method", method_name(s.method)},
            {"linear_solver", linear_name(s.linear_mode)}, {"mode", c.mode}, {"amplitude", c.amplitude},
            {"forcing", c.forcing}, {"levels", c.levels}};
  return j.dump();
}

std::string config_hash(const RunConfig& cfg) { return fnv1a_hex(canonical_config(cfg)); }

int run(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const Mesh mesh = load_mesh(cfg.mesh);
  const fs::path out = fs::absolute(cfg.out);
  fs::create_directories(out);
  const std::string hash = config_hash(cfg);
  json summary = {{"config_hash", hash}, {"command", cfg.command}, {"config", json::parse(canonical_config(cfg))}};
  if (cfg.timestamp) summary["timestamp"] = now_iso();

  if (cfg.command == "mesh-info") {
    const auto geo = compute_geometry(mesh);
    const auto q = regularity_theta(mesh, geo);
    summary["vertices"] = mesh.num_vertices();
    summary["cells"] = mesh.num_cells();
    summary["edges"] = mesh.num_edges();
    summary["interior_edges"] = mesh.num_interior_edges();
    summary["h"] = geo.h;
    summary["domain_measure"] = geo.domain_measure;
    summary["theta"] = q.theta;
    summary["measure_inequality_violations"] = q.measure_inequality_violations.size();
    write_json(out / "mesh_info.json", summary);
    log << "cells " << mesh.num_cells() << "  h " << format_double(geo.h) << "  theta "
        << format_double(q.theta) << '\n';
    return kExitOk;
  }

  const auto mc = stream_function_case(cfg.A, cfg.M, cfg.mode, cfg.amplitude);

  if (cfg.command == "solve") {
    const Discretization disc(mesh);
    const auto params = SchemeParams::make(cfg.A, cfg.M, cfg.alpha, cfg.beta, disc.geo.domain_measure,
                                           cfg.allow_out_of_range);
    const VectorFn f = cfg.forcing == "zero" ? VectorFn([](const Point&) { return Vec2(0.0, 0.0); }) : mc.f;
    const auto [sol, rep] = solve_scheme(disc, params, f, cfg.controls);
    {
      std::ostringstream u, p, r;
      write_velocity_csv(u, sol.u, hash);
      write_cell_csv(p, sol.p, hash);
      write_cell_csv(r, sol.rho, hash);
      write_text(out / "velocity.csv", u.str());
      write_text(out / "pressure.csv", p.str());
      write_text(out / "density.csv", r.str());
    }
    summary["converged"] = rep.converged;
    summary["iterations"] = rep.iterations;
    summary["method"] = rep.method;
    summary["residual"] = residual_json(rep.final_residual, rep.final_combined);
    summary["min_rho"] = rep.min_rho;
    summary["rho_star"] = params.rho_star;
    summary["mass"] = integrate(disc, sol.rho);
    summary["mean_pressure"] = integrate(disc, sol.p) / disc.geo.domain_measure;
    if (cfg.forcing == "manufactured") {
      const auto e = compute_errors(disc, sol, mc);
      summary["errors"] = {{"u_h1b", e.u_h1b}, {"u_h1b_interp", e.u_h1b_interp}, {"u_l2", e.u_l2}, {"p_l2", e.p_l2}};
    }
    if (cfg.timestamp) summary["wall_seconds"] = rep.wall_seconds;
    write_json(out / "summary.json", summary);
    log << (rep.converged ? "converged" : "NOT converged") << " after " << rep.iterations
        << " iterations, residual " << format_double(rep.final_combined) << ", min rho "
        << format_double(rep.min_rho) << '\n';
    return rep.converged ? kExitOk : kExitNotConverged;
  }

  if (cfg.command == "study") {
    const auto table = convergence_study(mc, mesh, cfg.levels, cfg.alpha, cfg.beta, cfg.controls, {}, cfg.threads);
    std::ostringstream csv;
    csv << "# config_hash=" << hash << '\n';
    write_rate_csv(csv, table);
    write_text(out / "rates.csv", csv.str());
    json levels = json::array();
    bool all = true;
    for (const auto& r : table.levels) {
      all = all && r.converged;
      json row = {{"level", r.level}, {"h", r.h}, {"cells", r.cells}, {"converged", r.converged},
                  {"iterations", r.iterations}, {"min_rho", r.min_rho}, {"residual", r.final_residual},
                  {"err_u_h1b", r.errors.u_h1b}, {"err_u_h1b_interp", r.errors.u_h1b_interp},
                  {"err_u_l2", r.errors.u_l2}, {"err_p_l2", r.errors.p_l2}};
      if (cfg.timestamp) row["seconds"] = r.seconds;
      levels.push_back(row);
    }
    summary["levels"] = levels;
    auto slope = [](const std::optional<LogLogFit>& f) {
      return f ? json{{"slope", f->slope}, {"r_squared", f->r_squared}} : json(nullptr);
    };
    summary["slopes"] = {{"u_h1b", slope(table.slope_u_h1b)}, {"u_h1b_interp", slope(table.slope_u_h1b_interp)},
                         {"u_l2", slope(table.slope_u_l2)}, {"p_l2", slope(table.slope_p_l2)}};
    write_json(out / "study.json", summary);
    for (const auto& r : table.levels)
      log << "level " << r.level << "  h " << format_double(r.h) << "  err_u_h1b "
          << format_double(r.errors.u_h1b) << (r.converged ? "" : "  (not converged)") << '\n';
    if (table.slope_u_h1b) log << "slope u_h1b " << format_double(table.slope_u_h1b->slope) << '\n';
    return all ? kExitOk : kExitNotConverged;
  }

  // verify
  VerifyOptions opt;
  opt.levels = cfg.levels;
  opt.mode = cfg.mode;
  opt.amplitude = cfg.amplitude;
  opt.A = cfg.A;
  opt.M = cfg.M;
  opt.alpha = cfg.alpha;
  opt.beta = cfg.beta;
  opt.controls = cfg.controls;
  opt.max_threads = cfg.threads;
  const auto report = run_verification(mesh, opt);
  json checks = json::array();
  bool converged = true;
  for (const auto& e : report.entries) {
    checks.push_back({{"check", e.check}, {"anchor", e.anchor}, {"comparison", e.comparison},
                      {"values", e.values}, {"trend", e.trend}, {"pass", e.pass}});
    if (e.check == "convergence") converged = e.pass;
    log << (e.pass ? "PASS " : "FAIL ") << e.check << '\n';
  }
  summary["pass"] = report.pass();
  summary["checks"] = checks;
  write_json(out / "audit.json", summary);
  if (cfg.csv) {
    std::ostringstream csv;
    csv << "# config_hash=" << hash << "\ncheck,index,value,pass\n";
    for (const auto& e : report.entries)
      for (std::size_t i = 0; i < e.values.size(); ++i)
        csv << e.check << ',' << i << ',' << format_double(e.values[i]) << ',' << (e.pass ? 1 : 0) << '\n';
    write_text(out / "audit.csv", csv.str());
  }
  if (!converged) return kExitNotConverged;
  return report.pass() ? kExitOk : kExitAuditFailed;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Crouzeix-Raviart / upwind scheme for isothermal compressible Stokes"};
  std::string command, config_path, mesh, out;
  std::optional<int> levels;
  bool csv = false, no_timestamp = false;
  std::vector<std::string> params;
  app.add_option("command", command, "solve | study | verify | mesh-info")->required();
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--mesh", mesh, "mesh file or NxM structured unit square");
  app.add_option("--levels", levels, "number of meshes in a refinement family");
  app.add_option("--out", out, "output directory");
  app.add_flag("--csv", csv, "also write flat CSV reports");
  app.add_flag("--no-timestamp", no_timestamp, "omit timestamps and timings from outputs");
  app.add_option("--param", params, "key=value override (repeatable)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw ConfigError("cannot open config " + config_path);
      std::stringstream ss;
      ss << is.rdbuf();
      apply_config_json(cfg, ss.str());
    }
    cfg.command = command;
    if (!mesh.empty()) cfg.mesh = mesh;
    if (levels) cfg.levels = *levels;
    if (!out.empty()) cfg.out = out;
    cfg.csv = cfg.csv || csv;
    cfg.timestamp = !no_timestamp;
    for (const auto& p : params) apply_param(cfg, p);
    cfg.threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CRSTOKES_THREADS")) {
      const int cap = std::atoi(env);
      if (cap < 1) throw ConfigError("CRSTOKES_THREADS must be a positive integer");
      cfg.threads = std::min(cfg.threads, cap);
    }
    return run(cfg, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace crstokes
