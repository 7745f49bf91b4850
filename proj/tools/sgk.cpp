// sgk: command-line front end for the gasket, rate, simulation, calculus,
// solver and experiment modules.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sgk/errors.hpp"
#include "sgk/harness.hpp"
#include "sgk/profile.hpp"

namespace fs = std::filesystem;
using namespace sgk;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string seconds(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::vector<double> split_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::array<double, 3> triple(const std::string& text, const char* what) {
  const auto v = split_doubles(text);
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() != 3) throw ConfigError(std::string(what) + " needs one or three comma-separated values");
  return {v[0], v[1], v[2]};
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  file.open(path);
  if (!file) throw ConfigError("cannot write " + path);
  return file;
}

struct FamilyOptions {
  std::string name = "constant";
  double c0 = 1.0;
  double gamma = 0.0;
  double beta = 0.0;
  std::string table;
  int range = 1;

  void add(CLI::App* app) {
    app->add_option("--family", name, "constant | dfl | ising | table")->capture_default_str();
    app->add_option("--c0", c0, "constant family rate")->capture_default_str();
    app->add_option("--gamma", gamma, "DFL parameter")->capture_default_str();
    app->add_option("--beta", beta, "Ising inverse temperature")->capture_default_str();
    app->add_option("--table", table, "JSON rate table for --family table");
    app->add_option("--L0", range, "table range when the document omits L0")->capture_default_str();
  }

  nlohmann::json spec() const {
    nlohmann::json j{{"family", name}};
    if (name == "constant") j["c0"] = c0;
    if (name == "dfl") j["gamma"] = gamma;
    if (name == "ising") j["beta"] = beta;
    if (name == "table") {
      if (table.empty()) throw ConfigError("--family table requires --table");
      j["table"] = read_json(table);
      j["L0"] = range;
    }
    return j;
  }
};

// -- gasket ----------------------------------------------------------------------

void gasket_dump(int level, const std::string& out) {
  const auto g = build(level);
  std::ofstream edges_file, sites_file;
  if (out.empty()) {
    std::cout << "# edges\n";
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      const auto [u, v] = g.edge(static_cast<EdgeId>(e));
      std::cout << u << ' ' << v << '\n';
    }
    std::cout << "# sites\n";
  } else {
    open_out(out + ".edges", edges_file);
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      const auto [u, v] = g.edge(static_cast<EdgeId>(e));
      edges_file << u << ' ' << v << '\n';
    }
    open_out(out + ".sites", sites_file);
  }
  std::ostream& sites = out.empty() ? std::cout : sites_file;
  for (std::size_t x = 0; x < g.num_sites(); ++x) {
    const auto p = g.coordinates(static_cast<SiteId>(x));
    sites << x << ' ' << p.x_num << ' ' << p.y_num << ' ' << p.denom << '\n';
  }
}

void gasket_shapes(int level, int range) {
  const auto g = build(level);
  const auto cat = shape_catalog(g, range);
  std::cout << "key,size,class,rotation,count,ratio\n";
  for (std::size_t i = 0; i < cat.shapes.size(); ++i) {
    const auto& s = cat.shapes[i];
    std::cout << s.key() << ',' << s.size() << ',' << s.rotation_class << ',' << s.rotation << ',' << cat.counts[i]
              << ',' << cat.ratios[i].numerator() << '/' << cat.ratios[i].denominator() << '\n';
  }
}

// -- rates -----------------------------------------------------------------------

void rates_phi(const FamilyOptions& fam, int grid, const std::string& out) {
  if (grid < 2) throw ParameterError("--grid must be >= 2");
  const auto family = make_family(fam.spec());
  const auto phi = make_reaction(family, family.range() + 2);
  std::ofstream file;
  auto& os = open_out(out, file);
  os << "rho,phi\n";
  for (int i = 0; i < grid; ++i) {
    const double rho = static_cast<double>(i) / (grid - 1);
    os << num(rho) << ',' << num(phi(rho)) << '\n';
  }
}

void rates_validate(const FamilyOptions& fam) {
  const auto family = make_family(fam.spec());
  const int range = family.range();
  const auto cat = shape_catalog(build(std::min(kMaxLevel, range + 2)), range);
  const auto report = validate(family, cat);
  const auto phi = reaction_function(family, cat);
  std::cout << "family " << family.name() << " (L0 = " << range << ") is valid\n"
            << "shapes " << cat.shapes.size() << "\n"
            << "max rate " << num(report.max_rate) << " at shape " << report.argmax_shape << " occupancy "
            << report.argmax_bits << "\n"
            << "phi degree " << phi.polynomial().degree(1e-14) << ", Lipschitz bound " << num(phi.lipschitz())
            << "\n";
}

// -- simulate --------------------------------------------------------------------

struct SimulateOptions {
  int level = 4;
  double b = 1.0;
  FamilyOptions family;
  std::string lambda_plus = "1";
  std::string lambda_minus = "1";
  bool no_glauber = false;
  bool no_boundary = false;
  std::string rho0 = "const:0.5";
  double T = 0.5;
  std::string times;
  std::vector<std::string> functions{"one", "x", "y"};
  std::vector<std::string> cells;
  int replicas = 1;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out = "runs";
};

void simulate(const SimulateOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.b = o.b;
  cfg.family = o.family.spec();
  cfg.lambda_plus = triple(o.lambda_plus, "--lambda-plus");
  cfg.lambda_minus = triple(o.lambda_minus, "--lambda-minus");
  cfg.glauber = !o.no_glauber;
  cfg.boundary = !o.no_boundary;
  cfg.seed = o.seed;
  const auto g = build(o.level);
  const Model model(g, make_family(cfg.family));
  const auto rho0 = Profile::parse(o.rho0).density(g);
  const auto fns = test_functions(g, o.functions);

  ObservationSpec spec;
  spec.times = o.times.empty() ? std::vector<double>{} : split_doubles(o.times);
  if (spec.times.empty()) {
    for (int k = 0; k <= 10; ++k) spec.times.push_back(o.T * k / 10.0);
  }
  for (const auto& f : fns) spec.functions.push_back(f.values);
  for (const auto& c : o.cells) spec.cells.push_back(CellAddress::parse(c));

  std::vector<Observation> obs(static_cast<std::size_t>(o.replicas));
  parallel_for(obs.size(), o.threads, [&](std::size_t i) {
    const std::uint64_t seed = o.seed + i;
    obs[i] = run(model, cfg.sim_params(o.b, seed), init_config(g, rho0, seed), spec);
  });

  fs::create_directories(o.out);
  auto write = [&](const std::string& name, const std::string& header, auto&& row) {
    std::ofstream f(fs::path(o.out) / (name + ".csv"));
    f << header << '\n';
    for (std::size_t i = 0; i < obs.size(); ++i) {
      for (std::size_t k = 0; k < spec.times.size(); ++k) f << i << ',' << num(spec.times[k]) << ',' << row(i, k) << '\n';
    }
  };
  for (std::size_t j = 0; j < fns.size(); ++j) {
    write("pi_" + fns[j].name, "replica,t,value", [&](std::size_t i, std::size_t k) { return num(obs[i].empirical[j][k]); });
  }
  for (std::size_t j = 0; j < spec.cells.size(); ++j) {
    write("block_" + o.cells[j], "replica,t,value", [&](std::size_t i, std::size_t k) { return num(obs[i].blocks[j][k]); });
  }
  write("boundary", "replica,t,eta0,eta1,eta2", [&](std::size_t i, std::size_t k) {
    const auto& e = obs[i].boundary[k];
    return std::to_string(e[0]) + ',' + std::to_string(e[1]) + ',' + std::to_string(e[2]);
  });

  std::uint64_t events = 0;
  for (const auto& ob : obs) events += ob.counts.total();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  nlohmann::json manifest{{"command", "simulate"},
                          {"level", o.level},
                          {"b", o.b},
                          {"family", cfg.family},
                          {"lambda_plus", cfg.lambda_plus},
                          {"lambda_minus", cfg.lambda_minus},
                          {"glauber", cfg.glauber},
                          {"boundary", cfg.boundary},
                          {"rho0", o.rho0},
                          {"T", o.T},
                          {"times", spec.times},
                          {"functions", o.functions},
                          {"cells", o.cells},
                          {"replicas", o.replicas},
                          {"seeds", {{"base", o.seed}, {"rule", "seed_i = base + i"}}},
                          {"version", version_string()},
                          {"wall_seconds", wall},
                          {"events", events}};
  std::ofstream(fs::path(o.out) / "manifest.json") << manifest.dump(2) << '\n';
  std::cout << "wrote " << o.out << " (" << events << " events, " << seconds(wall) << " s)\n";
}

// -- calculus --------------------------------------------------------------------

void calculus_resist(int level, bool interior, int depth, SiteId from, SiteId to) {
  const auto g = build(level);
  double r = 0.0;
  if (interior) {
    const auto region = interior_region(g, depth);
    r = effective_resistance(g, region, from, to);
  } else {
    r = effective_resistance(g, from, to);
  }
  std::cout << num(r) << '\n';
}

// Reads "site_id,value" rows; the level is inferred from the row count.
SiteFunction read_site_function(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::map<long, double> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || !(std::isdigit(static_cast<unsigned char>(line[0])))) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError(path + ": expected site_id,value rows");
    rows[std::stol(line.substr(0, comma))] = std::stod(line.substr(comma + 1));
  }
  for (int m = 0; m <= kMaxLevel; ++m) {
    const auto n = static_cast<std::size_t>(3 * (std::llround(std::pow(3.0, m)) + 1) / 2);
    if (n == rows.size()) {
      SiteFunction f{m, std::vector<double>(n)};
      for (const auto& [id, v] : rows) {
        if (id < 0 || static_cast<std::size_t>(id) >= n) throw ConfigError(path + ": site id out of range");
        f.values[static_cast<std::size_t>(id)] = v;
      }
      return f;
    }
  }
  throw ConfigError(path + ": row count is not |V_M| for any level M");
}

void calculus_extend(const std::string& input, int to_level, const std::string& out) {
  const auto f = read_site_function(input);
  const auto g = build(to_level);
  const auto h = harmonic_extension(g, f);
  std::ofstream file;
  auto& os = open_out(out, file);
  os << "site_id,value\n";
  for (std::size_t x = 0; x < h.values.size(); ++x) os << x << ',' << num(h.values[x]) << '\n';
}

// -- solve -----------------------------------------------------------------------

struct SolveCliOptions {
  int level = 4;
  std::string bc = "dirichlet";
  std::string rho_B = "0.5";
  std::string r = "0";
  FamilyOptions family;
  bool no_reaction = false;
  std::string rho0 = "const:0.5";
  double T = 1.0;
  double dt = 0.0;
  std::string times;
  int snapshots = 10;
  std::string out;
};

void solve_cli(const SolveCliOptions& o) {
  const auto g = build(o.level);
  BoundaryCondition bc{parse_regime(o.bc), triple(o.rho_B, "--rhoB"), {0.0, 0.0, 0.0}};
  if (bc.regime == Regime::Robin) bc.r = triple(o.r, "--r");
  const auto family = make_family(o.family.spec());
  const auto phi = o.no_reaction ? ReactionFn::zero() : make_reaction(family, o.level);
  SolveOptions opts;
  opts.T = o.T;
  opts.dt = o.dt;
  if (!o.times.empty()) {
    opts.record_times = split_doubles(o.times);
  } else {
    for (int k = 1; k < o.snapshots; ++k) opts.record_times.push_back(o.T * k / o.snapshots);
  }
  const auto traj = solve(g, bc, phi, Profile::parse(o.rho0).density(g), opts);
  std::ofstream file;
  auto& os = open_out(o.out, file);
  os << "t,site_id,rho\n";
  for (const auto& s : traj.states) {
    for (std::size_t x = 0; x < s.values.size(); ++x) os << num(s.time) << ',' << x << ',' << num(s.values[x]) << '\n';
  }
}

// -- run -------------------------------------------------------------------------

int run_cli(const std::string& config, std::string out, bool check) {
  auto doc = read_json(config);
  if (doc.contains("config") && doc.contains("version")) doc = doc.at("config");
  const auto cfg = ExperimentConfig::from_json(doc);
  const auto result = run_experiment(cfg);
  if (out.empty()) out = cfg.output_dir.empty() ? "results/" + to_string(cfg.kind) : cfg.output_dir;
  write_outputs(result, out);
  std::cout << to_string(cfg.kind) << ": " << result.summary.dump() << "\n"
            << "wrote " << out << " (" << result.events << " events, " << seconds(result.wall_seconds) << " s)\n";
  if (check && !result.passed) {
    std::cerr << "check failed\n";
    return 1;
  }
  return 0;
}

// -- plot ------------------------------------------------------------------------

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  Csv csv;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
  };
  if (std::getline(in, line)) csv.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) csv.rows.push_back(split(line));
  }
  return csv;
}

void plot(const std::string& input, const std::string& xcol, const std::vector<std::string>& ycols,
          const std::string& group, bool logy, const std::string& out) {
  const auto csv = read_csv(input);
  const auto xi = csv.column(xcol);
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& y : ycols) {
    const auto yi = csv.column(y);
    const auto gi = group.empty() ? 0 : csv.column(group);
    for (const auto& row : csv.rows) {
      double yv = std::stod(row.at(yi));
      if (logy) {
        if (!(yv > 0.0)) continue;
        yv = std::log10(yv);
      }
      const auto key = group.empty() ? y : (ycols.size() > 1 ? y + " " : std::string()) + group + "=" + row.at(gi);
      series[key].emplace_back(std::stod(row.at(xi)), yv);
    }
  }
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (auto& [_, pts] : series) {
    std::sort(pts.begin(), pts.end());
    for (auto [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (series.empty()) throw ConfigError("nothing to plot");
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  constexpr double W = 640, H = 400, L = 60, R = 160, T = 20, B = 40;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"};
  std::ofstream file;
  auto& os = open_out(out, file);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 15 << "\" text-anchor=\"middle\">" << num(xv).substr(0, 6) << "</text>\n"
       << "<text x=\"" << L - 5 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
       << (logy ? "1e" : "") << num(yv).substr(0, 6) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 5 << "\" text-anchor=\"middle\">" << xcol << "</text>\n";
  std::size_t c = 0;
  for (const auto& [name, pts] : series) {
    const char* color = colors[c % 7];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : pts) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n<text x=\"" << W - R + 8 << "\" y=\"" << T + 14 * (c + 1) << "\" fill=\"" << color << "\">" << name
       << "</text>\n";
    ++c;
  }
  os << "</svg>\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Glauber-Kawasaki dynamics on the Sierpinski gasket"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  auto* gasket = app.add_subcommand("gasket", "graph export and shape catalogs");
  gasket->require_subcommand(1);
  int g_level = 2, g_range = 1;
  std::string g_out;
  auto* dump = gasket->add_subcommand("dump", "edge list and exact site table");
  dump->add_option("--level", g_level, "N")->required();
  dump->add_option("--out", g_out, "write <out>.edges and <out>.sites instead of stdout");
  auto* shapes = gasket->add_subcommand("shapes", "shape catalog with exact ratios");
  shapes->add_option("--level", g_level, "N (>= L0 + 2)")->required();
  shapes->add_option("--range", g_range, "L0")->capture_default_str();

  auto* rates = app.add_subcommand("rates", "rate families and the reaction term");
  rates->require_subcommand(1);
  FamilyOptions fam;
  int grid = 101;
  std::string phi_out;
  auto* phi = rates->add_subcommand("phi", "tabulate Phi on a uniform grid");
  fam.add(phi);
  phi->add_option("--grid", grid, "grid points on [0, 1]")->capture_default_str();
  phi->add_option("--out", phi_out, "CSV path (default stdout)");
  auto* val = rates->add_subcommand("validate", "check a family over every shape and occupancy");
  fam.add(val);

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "run replicas of the particle system");
  sim->add_option("--level", so.level, "N")->required();
  sim->add_option("--b", so.b, "boundary scale")->capture_default_str();
  so.family.add(sim);
  sim->add_option("--lambda-plus", so.lambda_plus, "lambda_+ per corner (one or three values)")->capture_default_str();
  sim->add_option("--lambda-minus", so.lambda_minus, "lambda_- per corner (one or three values)")->capture_default_str();
  sim->add_flag("--no-glauber", so.no_glauber, "disable interior flips");
  sim->add_flag("--no-boundary", so.no_boundary, "disable reservoirs");
  sim->add_option("--rho0", so.rho0, "initial profile")->capture_default_str();
  sim->add_option("--T", so.T, "final time")->capture_default_str();
  sim->add_option("--times", so.times, "comma-separated sample times (default 11 points on [0, T])");
  sim->add_option("--functions", so.functions, "test functions")->capture_default_str();
  sim->add_option("--cells", so.cells, "cells for block averages");
  sim->add_option("--replicas", so.replicas, "replica count")->capture_default_str();
  sim->add_option("--seed", so.seed, "base seed")->capture_default_str();
  sim->add_option("--threads", so.threads, "worker threads (0 = all cores)")->capture_default_str();
  sim->add_option("--out", so.out, "output directory")->capture_default_str();

  auto* calc = app.add_subcommand("calculus", "resistance and harmonic extension");
  calc->require_subcommand(1);
  int c_level = 3, c_depth = 2, c_to = 0;
  SiteId c_from = 1, c_to_site = 2;
  bool c_interior = false;
  std::string c_input, c_out;
  auto* resist = calc->add_subcommand("resist", "effective resistance between two sites");
  resist->add_option("--level", c_level, "N")->required();
  resist->add_flag("--interior", c_interior, "restrict to V_N^I");
  resist->add_option("--depth", c_depth, "N_B for --interior")->capture_default_str();
  resist->add_option("--from", c_from, "site id")->capture_default_str();
  resist->add_option("--to", c_to_site, "site id")->capture_default_str();
  auto* extend = calc->add_subcommand("extend", "harmonic extension of site_id,value data");
  extend->add_option("--input", c_input, "CSV at some level M")->required();
  extend->add_option("--to-level", c_to, "target level")->required();
  extend->add_option("--out", c_out, "CSV path (default stdout)");

  SolveCliOptions sv;
  auto* slv = app.add_subcommand("solve", "solve the limit equation on V_M");
  slv->add_option("--level", sv.level, "M")->required();
  slv->add_option("--bc", sv.bc, "dirichlet | robin | neumann")->capture_default_str();
  slv->add_option("--rhoB", sv.rho_B, "boundary density (one or three values)")->capture_default_str();
  slv->add_option("--r", sv.r, "Robin coefficient (one or three values)")->capture_default_str();
  sv.family.add(slv);
  slv->add_flag("--no-reaction", sv.no_reaction, "set Phi = 0");
  slv->add_option("--rho0", sv.rho0, "initial profile")->capture_default_str();
  slv->add_option("--T", sv.T, "final time")->capture_default_str();
  slv->add_option("--dt", sv.dt, "time step (0 = stability bound)")->capture_default_str();
  slv->add_option("--times", sv.times, "comma-separated record times");
  slv->add_option("--snapshots", sv.snapshots, "equally spaced records when --times is absent")->capture_default_str();
  slv->add_option("--out", sv.out, "CSV path (default stdout)");

  std::string r_config, r_out;
  bool r_check = false;
  auto* runc = app.add_subcommand("run", "run an experiment from a JSON config or manifest");
  runc->add_option("--config", r_config, "config or manifest path")->required();
  runc->add_option("--out", r_out, "output directory");
  runc->add_flag("--check", r_check, "exit nonzero when the experiment's assertion fails");

  std::string p_in, p_x, p_group, p_out;
  std::vector<std::string> p_y;
  bool p_logy = false;
  auto* plt = app.add_subcommand("plot", "static SVG line plot of CSV columns");
  plt->add_option("--csv", p_in, "input CSV")->required();
  plt->add_option("--x", p_x, "x column")->required();
  plt->add_option("--y", p_y, "y column(s)")->required();
  plt->add_option("--group", p_group, "column splitting rows into series");
  plt->add_flag("--logy", p_logy, "log10 y axis");
  plt->add_option("--out", p_out, "SVG path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (dump->parsed()) gasket_dump(g_level, g_out);
    if (shapes->parsed()) gasket_shapes(g_level, g_range);
    if (phi->parsed()) rates_phi(fam, grid, phi_out);
    if (val->parsed()) rates_validate(fam);
    if (sim->parsed()) simulate(so);
    if (resist->parsed()) calculus_resist(c_level, c_interior, c_depth, c_from, c_to_site);
    if (extend->parsed()) calculus_extend(c_input, c_to, c_out);
    if (slv->parsed()) solve_cli(sv);
    if (runc->parsed()) return run_cli(r_config, r_out, r_check);
    if (plt->parsed()) plot(p_in, p_x, p_y, p_group, p_logy, p_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
