#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "synth/codebook.hpp"
#include "synth/coupling.hpp"
#include "synth/error.hpp"
#include "synth/exact_synth.hpp"
#include "synth/json_io.hpp"
#include "synth/parallel.hpp"
#include "synth/regions.hpp"

namespace synth::cli {

namespace {

constexpr int kSchemaVersion = 1;

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json num(double v) {
  if (v == 0.0) return 0.0;
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

std::string csv_num(double v) {
  if (v == 0.0) return "0";
  if (std::isfinite(v)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

Units parse_units(const std::string& s) {
  if (s == "bits") return Units::Bits;
  if (s == "nats") return Units::Nats;
  throw ValidationError("units must be bits or nats, got \"" + s + "\"");
}

double parse_number(const std::string& s, const std::string& what) {
  if (s == "inf" || s == "+inf") return kInf;
  try {
    return parse_decimal(s);
  } catch (const Error&) {
    throw ValidationError(what + ": not a number: \"" + s + "\"");
  }
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3) throw ValidationError("grid must look like a:b:n, got \"" + s + "\"");
  const double lo = parse_number(parts[0], "grid start");
  const double hi = parse_number(parts[1], "grid end");
  int count = 0;
  try {
    std::size_t used = 0;
    count = std::stoi(parts[2], &used);
    if (used != parts[2].size()) count = 0;
  } catch (const std::exception&) {
  }
  if (count < 1 || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo)
    throw ValidationError("bad grid \"" + s + "\"");
  return linspace(lo, hi, count);
}

json load(const std::string& path) {
  try {
    return read_json_file(path);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
}

JointPmf load_joint(const std::string& path) {
  const json j = load(path);
  try {
    return joint_from_json(j);
  } catch (const Error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

Pmf load_pmf(const std::string& path) {
  const json j = load(path);
  try {
    return pmf_from_json(j);
  } catch (const Error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + out + " for writing");
  f << text;
  if (!f) throw ValidationError("write to " + out + " failed");
}

json header(const std::string& command, const json& config) {
  return json{{"schema", "synth-" + command + "/" + std::to_string(kSchemaVersion)}, {"config", config}};
}

int resolve_threads(int flag) { return flag > 0 ? flag : default_threads(); }

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v, double scale = 1.0) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(num(v(i) * scale));
  return a;
}

// ---------------------------------------------------------------------------

struct RegionsArgs {
  std::string pi;
  std::optional<double> dsbs;
  std::optional<double> gaussian;
  std::string bound = "exact-inner";
  std::string grid;
  std::string units = "bits";
  std::string out;
  std::string format = "csv";
  bool compare = false;
  int points = 201;
  int restarts = 32;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct CurveRow {
  std::string curve;
  double param, r0, r, sum_bound, r_bound;
  std::optional<bool> strict;
};

std::vector<CurveRow> corner_rows(const RegionCurve& c, const std::string& name) {
  std::vector<CurveRow> rows;
  for (std::size_t i = 0; i < c.param.size(); ++i)
    rows.push_back({name, c.param[i], c.boundary[i].r0, c.boundary[i].r, c.sum_bound[i], c.r_bound[i], {}});
  return rows;
}

int cmd_regions(const RegionsArgs& a) {
  const Units units = parse_units(a.units);
  const int sources = !a.pi.empty() + a.dsbs.has_value() + a.gaussian.has_value();
  if (sources != 1) throw ValidationError("regions: give exactly one of --pi, --dsbs, --gaussian");
  if (a.format != "csv" && a.format != "json") throw ValidationError("--format must be csv or json");
  if (a.points < 2) throw ValidationError("--points must be >= 2");
  if (a.restarts < 1) throw ValidationError("--restarts must be >= 1");

  json config{{"units", a.units}, {"format", a.format}, {"compare", a.compare}};
  std::vector<CurveRow> rows;
  std::string param_name;

  if (!a.pi.empty()) {
    if (a.compare) throw ValidationError("--compare needs --dsbs or --gaussian");
    Bound bound;
    if (a.bound == "exact-inner") bound = Bound::Inner;
    else if (a.bound == "exact-outer") bound = Bound::Outer;
    else if (a.bound == "cuff") bound = Bound::Cuff;
    else throw ValidationError("--bound must be exact-inner, exact-outer or cuff");
    const JointPmf pi = load_joint(a.pi);
    std::vector<double> grid;
    if (a.grid.empty()) {
      const double top = std::log(static_cast<double>(pi.rows() * pi.cols()));
      grid = linspace(0.0, to_units(top, units), 21);
    } else {
      grid = parse_grid(a.grid);
    }
    std::vector<double> grid_nats;
    for (double g : grid) grid_nats.push_back(from_units(g, units));
    SearchOptions so;
    so.restarts = a.restarts;
    so.seed = a.seed;
    so.threads = resolve_threads(a.threads);
    const SearchResult res = search_lower_boundary(pi, grid_nats, bound, so);
    const RegionCurve c = convert_units(res.curve, units);
    param_name = "R0";
    for (std::size_t i = 0; i < grid.size(); ++i)
      rows.push_back({a.bound, grid[i], grid[i], c.boundary[i].r, c.sum_bound[i], c.r_bound[i], {}});
    config.update({{"pi", a.pi}, {"pi_mass", to_json(pi)}, {"bound", a.bound}, {"r0_grid", grid},
                   {"restarts", a.restarts}, {"seed", a.seed}});
  } else {
    if (!a.grid.empty()) throw ValidationError("--r0-grid applies to --pi only");
    RegionCurve exact, tv;
    std::string exact_name;
    if (a.dsbs) {
      const double p = *a.dsbs;
      if (!(p > 0.0 && p < 0.5)) throw ValidationError("--dsbs needs p in (0, 1/2)");
      exact = dsbs_exact_region(p, a.points);
      tv = dsbs_tv_region(p, a.points);
      exact_name = "exact";
      config.update({{"dsbs", p}});
    } else {
      const double rho = *a.gaussian;
      if (!(rho > 0.0 && rho < 1.0)) throw ValidationError("--gaussian needs rho in (0, 1)");
      const auto grid = gaussian_default_grid(rho, a.points);
      exact = gaussian_exact_inner_region(rho, grid);
      tv = gaussian_tv_region(rho, grid);
      exact_name = "exact-inner";
      config.update({{"gaussian", rho}});
    }
    config.update({{"points", a.points}});
    exact = convert_units(exact, units);
    tv = convert_units(tv, units);
    param_name = exact.param_name;
    rows = corner_rows(exact, exact_name);
    if (a.compare) {
      const double margin = to_units(std::log(2.0) * 1e-6, units);
      for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i].strict = exact.sum_bound[i] - tv.sum_bound[i] > margin;
      auto t = corner_rows(tv, "tv");
      for (std::size_t i = 0; i < t.size(); ++i) t[i].strict = rows[i].strict;
      rows.insert(rows.end(), t.begin(), t.end());
    }
  }

  std::string text;
  if (a.format == "csv") {
    const json h = header("regions", config);
    text += "# schema: " + h["schema"].get<std::string>() + "\n";
    text += "# config: " + h["config"].dump() + "\n";
    text += "# param: " + param_name + "\n";
    text += "curve,param,R0,R,sum_bound,r_bound";
    if (a.compare) text += ",strict";
    text += "\n";
    for (const auto& r : rows) {
      text += r.curve + "," + csv_num(r.param) + "," + csv_num(r.r0) + "," + csv_num(r.r) + "," +
              csv_num(r.sum_bound) + "," + csv_num(r.r_bound);
      if (a.compare) text += r.strict.value_or(false) ? ",1" : ",0";
      text += "\n";
    }
  } else {
    json j = header("regions", config);
    j["units"] = a.units;
    j["param_name"] = param_name;
    json arr = json::array();
    for (const auto& r : rows) {
      json o{{"curve", r.curve},         {"param", num(r.param)},         {"R0", num(r.r0)},
             {"R", num(r.r)},            {"sum_bound", num(r.sum_bound)}, {"r_bound", num(r.r_bound)}};
      if (r.strict) o["strict"] = *r.strict;
      arr.push_back(o);
    }
    j["rows"] = arr;
    text = j.dump(2) + "\n";
  }
  emit(a.out, text);
  return 0;
}

// ---------------------------------------------------------------------------

struct CouplingArgs {
  std::string pi, px, py, sense = "max", units = "bits", out;
};

int cmd_coupling(const CouplingArgs& a) {
  const Units units = parse_units(a.units);
  if (a.sense != "max" && a.sense != "min") throw ValidationError("--sense must be max or min");
  const JointPmf pi = load_joint(a.pi);
  const Pmf px = a.px.empty() ? pi.row_marginal() : load_pmf(a.px);
  const Pmf py = a.py.empty() ? pi.col_marginal() : load_pmf(a.py);
  if (px.size() != pi.rows() || py.size() != pi.cols())
    throw ValidationError("marginal sizes do not match the joint's shape");

  Coupling c;
  if (a.sense == "max") {
    c = max_cross_entropy(px, py, pi);
  } else {
    c = solve_transport(TransportProblem{px, py, log_loss_cost(pi), Sense::Minimize});
  }
  const double scale = to_units(1.0, units);
  json basis = json::array();
  for (const auto& [i, j] : c.certificate.basis) basis.push_back({i, j});
  json config{{"pi", a.pi}, {"px", a.px}, {"py", a.py}, {"sense", a.sense}, {"units", a.units},
              {"pi_mass", to_json(pi)}, {"px_mass", to_json(px)}, {"py_mass", to_json(py)}};
  json j = header("coupling", config);
  j["value"] = num(c.objective * scale);
  j["coupling"] = matrix_json(c.joint.mass());
  j["certificate"] = {{"u", vector_json(c.certificate.u, scale)},
                      {"v", vector_json(c.certificate.v, scale)},
                      {"basis", basis},
                      {"max_violation", num(c.certificate.max_violation * scale)},
                      {"pivots", c.certificate.pivots}};
  emit(a.out, j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct CoverArgs {
  std::string params, threshold = "inf", kind = "distributed", units = "bits", out;
  int trials = 100;
  int threads = 0;
};

CodebookParams params_from_json(const json& j, json& resolved) {
  static const std::vector<std::string> allowed{"qw", "qx_given_w", "qy_given_w", "n", "r", "r0",
                                                "units", "eps", "seed", "budget"};
  if (!j.is_object()) throw ValidationError("params must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ValidationError("params: unknown key \"" + key + "\"");
  for (const char* k : {"qw", "qx_given_w", "qy_given_w", "n", "r", "r0"})
    if (!j.contains(k)) throw ValidationError(std::string("params: missing \"") + k + "\"");
  CodebookParams p;
  try {
    p.qw = pmf_from_json(j.at("qw"));
    p.qx_given_w = channel_from_json(j.at("qx_given_w"));
    p.qy_given_w = channel_from_json(j.at("qy_given_w"));
    p.n = j.at("n").get<int>();
    const Units u = parse_units(j.value("units", std::string("bits")));
    p.r = from_units(j.at("r").get<double>(), u);
    p.r0 = from_units(j.at("r0").get<double>(), u);
    if (j.contains("eps")) p.eps = j.at("eps").get<double>();
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("budget")) p.budget = j.at("budget").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("params: ") + e.what());
  } catch (const DomainError& e) {
    throw ValidationError(std::string("params: ") + e.what());
  }
  if (p.n < 1) throw ValidationError("params: n must be >= 1");
  if (p.qw.size() != p.qx_given_w.inputs() || p.qw.size() != p.qy_given_w.inputs())
    throw ValidationError("params: channel inputs must match |W|");
  if (!(p.r >= 0.0) || !(p.r0 >= 0.0)) throw ValidationError("params: rates must be >= 0");
  resolved = j;
  resolved["units"] = j.value("units", std::string("bits"));
  resolved["eps"] = effective_eps(p);
  resolved["seed"] = p.seed;
  resolved["budget"] = p.budget;
  return p;
}

int cmd_cover(const CoverArgs& a) {
  const Units units = parse_units(a.units);
  if (a.trials < 1) throw ValidationError("--trials must be >= 1");
  DeficitKind kind;
  if (a.kind == "distributed") kind = DeficitKind::Distributed;
  else if (a.kind == "forward") kind = DeficitKind::Forward;
  else if (a.kind == "reverse") kind = DeficitKind::Reverse;
  else throw ValidationError("--kind must be distributed, forward or reverse");
  const double threshold_units = parse_number(a.threshold, "--threshold");
  if (std::isnan(threshold_units)) throw ValidationError("--threshold must be a number");

  json resolved;
  const CodebookParams p = params_from_json(load(a.params), resolved);
  const int threads = resolve_threads(a.threads);
  const CoveringReport rep =
      covering_experiment(p, a.trials, from_units(threshold_units, units), kind, threads);

  const double scale = to_units(1.0, units);
  json config{{"params", a.params},     {"resolved_params", resolved}, {"trials", a.trials},
              {"threshold", num(threshold_units)}, {"kind", a.kind}, {"units", a.units}};
  json j = header("cover", config);
  j["n"] = rep.n;
  j["rates"] = {{"r", num(rep.r * scale)}, {"r0", num(rep.r0 * scale)}, {"units", a.units}};
  j["eps"] = num(rep.eps);
  j["messages"] = message_count(p);
  j["keys"] = key_count(p);
  j["trials"] = rep.trials;
  j["threshold"] = num(threshold_units);
  j["below"] = rep.below;
  j["fraction_below"] = num(rep.fraction_below);
  j["ci95"] = {num(rep.ci_lo), num(rep.ci_hi)};
  json d = json::array();
  for (double v : rep.deficits) d.push_back(num(v * scale));
  j["per_trial_deficits"] = d;
  emit(a.out, j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct DemoArgs {
  std::string pi, units = "bits", out, decomposition = "w=x";
  std::string r0, r;
  int n = 8;
  std::uint64_t seed = 0;
  std::optional<double> eps;
  bool rational = false;
};

Decomposition load_decomposition(const std::string& path) {
  const json j = load(path);
  if (!j.is_object()) throw ValidationError(path + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (key != "pw" && key != "px_given_w" && key != "py_given_w")
      throw ValidationError(path + ": unknown key \"" + key + "\"");
  try {
    Decomposition d{pmf_from_json(j.at("pw")), channel_from_json(j.at("px_given_w")),
                    channel_from_json(j.at("py_given_w"))};
    check_shapes(d);
    return d;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  } catch (const DomainError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

int cmd_exact_demo(const DemoArgs& a) {
  const Units units = parse_units(a.units);
  if (a.n < 1) throw ValidationError("--n must be >= 1");
  if (a.rational && a.n > 6) throw ValidationError("--rational needs n <= 6");
  const double r0 = parse_number(a.r0, "--r0");
  const double r = parse_number(a.r, "--r");
  if (!(r0 >= 0.0 && std::isfinite(r0)) || !(r >= 0.0 && std::isfinite(r)))
    throw ValidationError("--r0 and --r must be finite and >= 0");
  if (a.eps && !(*a.eps > 0.0)) throw ValidationError("--eps must be > 0");

  const JointPmf pi = load_joint(a.pi);
  DemoOptions o;
  o.n = a.n;
  o.r0 = from_units(r0, units);
  o.r = from_units(r, units);
  o.seed = a.seed;
  o.eps = a.eps.value_or(-1.0);
  o.rational = a.rational;
  if (a.decomposition == "w=x") {
    o.decomposition = DemoDecomposition::WEqualsX;
  } else if (a.decomposition == "w=y") {
    o.decomposition = DemoDecomposition::WEqualsY;
  } else {
    o.decomposition = DemoDecomposition::Given;
    o.given = load_decomposition(a.decomposition);
    try {
      require_induces(o.given, pi);
    } catch (const PreconditionViolated& e) {
      throw ValidationError(e.what());
    }
  }

  const DemoReport rep = end_to_end_demo(pi, o);
  const double scale = to_units(1.0, units);
  json config{{"pi", a.pi},   {"pi_mass", to_json(pi)}, {"n", a.n},
              {"r0", num(r0)}, {"r", num(r)},           {"units", a.units},
              {"seed", a.seed}, {"eps", num(rep.eps)},  {"decomposition", a.decomposition},
              {"rational", a.rational}};
  json j = header("exact-demo", config);
  j["n"] = rep.n;
  j["eps"] = num(rep.eps);
  j["messages"] = rep.messages;
  j["keys"] = rep.keys;
  j["finite"] = rep.finite;
  j["deficit"] = num(rep.deficit * scale);
  j["delta"] = num(rep.delta * scale);
  j["units"] = a.units;
  j["fallback_probability"] = num(rep.fallback_probability);
  j["pi_typical"] = num(rep.pi_typical);
  j["exactness_max_abs_error"] = num(rep.exactness_max_abs_error);
  if (rep.rational) j["rational_exact"] = rep.rational_exact;
  j["measured_rate"] = num(rep.measured_rate * scale);
  j["shared_rate"] = num(rep.shared_rate * scale);
  j["huffman"] = {{"length_bits", num(rep.huffman.length_bits)},
                  {"entropy_bits", num(rep.huffman.entropy_bits)},
                  {"max_key_length_bits", num(rep.huffman.max_key_length_bits)},
                  {"sandwich", rep.huffman.sandwich}};
  j["rate_breakdown"] = {{"flag", num(rep.rates.flag * scale)},
                         {"code", num(rep.rates.code * scale)},
                         {"fallback", num(rep.rates.fallback * scale)},
                         {"total", num(rep.rates.total * scale)}};
  if (!rep.diagnostic.empty()) j["diagnostic"] = rep.diagnostic;
  emit(a.out, j.dump(2) + "\n");
  if (!rep.finite) {
    std::cerr << "exact-demo: " << (rep.diagnostic.empty() ? "infinite deficit" : rep.diagnostic) << "\n";
    return kExitNumeric;
  }
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Exact channel synthesis: coupling solves, rate regions, covering experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::to_string(kSchemaVersion));

  RegionsArgs ra;
  int threads = 0;
  auto* regions = app.add_subcommand("regions", "Rate region curves");
  regions->add_option("--pi", ra.pi, "Joint pmf JSON; runs the decomposition search");
  regions->add_option("--dsbs", ra.dsbs, "DSBS crossover p, closed forms");
  regions->add_option("--gaussian", ra.gaussian, "Gaussian correlation rho, closed forms");
  regions->add_option("--bound", ra.bound, "exact-inner|exact-outer|cuff")->capture_default_str();
  regions->add_option("--r0-grid", ra.grid, "a:b:n in output units");
  regions->add_option("--units", ra.units)->capture_default_str();
  regions->add_option("--out", ra.out);
  regions->add_option("--format", ra.format, "csv|json")->capture_default_str();
  regions->add_flag("--compare", ra.compare, "Exact and TV curves with a strictness column");
  regions->add_option("--points", ra.points, "Closed-form grid size")->capture_default_str();
  regions->add_option("--restarts", ra.restarts)->capture_default_str();
  regions->add_option("--seed", ra.seed)->capture_default_str();
  regions->add_option("--threads", threads);

  CouplingArgs ca;
  auto* coupling = app.add_subcommand("coupling", "Maximal or minimal cross-entropy coupling");
  coupling->add_option("--pi", ca.pi)->required();
  coupling->add_option("--px", ca.px, "Defaults to the row marginal of pi");
  coupling->add_option("--py", ca.py, "Defaults to the column marginal of pi");
  coupling->add_option("--sense", ca.sense, "max|min")->capture_default_str();
  coupling->add_option("--units", ca.units)->capture_default_str();
  coupling->add_option("--out", ca.out);

  CoverArgs va;
  auto* cover = app.add_subcommand("cover", "Soft-covering experiment");
  cover->add_option("--params", va.params)->required();
  cover->add_option("--trials", va.trials)->capture_default_str();
  cover->add_option("--threshold", va.threshold, "Deficit threshold in --units")->capture_default_str();
  cover->add_option("--kind", va.kind, "distributed|forward|reverse")->capture_default_str();
  cover->add_option("--units", va.units)->capture_default_str();
  cover->add_option("--out", va.out);
  cover->add_option("--threads", threads);

  DemoArgs da;
  auto* demo = app.add_subcommand("exact-demo", "End-to-end exact synthesis on one codebook");
  demo->add_option("--pi", da.pi)->required();
  demo->add_option("--n", da.n)->capture_default_str();
  demo->add_option("--r0", da.r0)->required();
  demo->add_option("--r", da.r)->required();
  demo->add_option("--units", da.units)->capture_default_str();
  demo->add_option("--seed", da.seed)->capture_default_str();
  demo->add_option("--eps", da.eps);
  demo->add_option("--decomposition", da.decomposition, "w=x|w=y|path to a decomposition JSON")
      ->capture_default_str();
  demo->add_flag("--rational", da.rational, "Exact rational arithmetic, n <= 6");
  demo->add_option("--out", da.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*regions) {
      ra.threads = threads;
      return cmd_regions(ra);
    }
    if (*coupling) return cmd_coupling(ca);
    if (*cover) {
      va.threads = threads;
      return cmd_cover(va);
    }
    return cmd_exact_demo(da);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const PreconditionViolated& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace synth::cli

int run_cli(int argc, char** argv) { return synth::cli::run(argc, argv); }
