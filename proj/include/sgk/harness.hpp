#pragma once

// Experiments that confront the particle system with the limit equation, plus
// result persistence (CSV tables and a JSON manifest per run).

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgk/calculus.hpp"
#include "sgk/kmc.hpp"
#include "sgk/pde.hpp"
#include "sgk/rates.hpp"

namespace sgk {

enum class ExperimentKind { Converge, RegimeSweep, Replacement, Martingale, Resistance };

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Converge;
  std::vector<int> levels{4, 5, 6};
  int replicas = 32;
  double b = 1.0;
  std::vector<double> b_values{1.0, 5.0 / 3.0, 3.0};
  nlohmann::json family = {{"family", "constant"}, {"c0", 1.0}};
  std::array<double, 3> lambda_plus{1.0, 1.0, 1.0};
  std::array<double, 3> lambda_minus{1.0, 1.0, 1.0};
  bool glauber = true;
  bool boundary = true;
  std::string rho0 = "const:0.5";
  // "one", "x", "y", "bump:<word>:<k>", "bumps:<length>:<k>" (every word of that length).
  std::vector<std::string> test_functions{"one", "x", "y", "bumps:1:2"};
  std::vector<std::string> cells;  // block observables, e.g. "00"
  double T = 0.5;
  std::vector<double> sample_times;
  std::uint64_t seed = 1;
  int reference_level = 6;  // PDE level
  double pde_dt = 0.0;      // 0 = stability bound
  std::vector<int> block_levels{1, 2, 3};  // replacement diagnostic M values
  int subcell_depth = 1;                   // |v| in the 2-block quantity
  int boundary_depth = 2;                  // N_B for resistance sweeps
  int pairs = 20;                          // random pairs per cell
  int threads = 0;                         // 0 = hardware concurrency
  std::string output_dir;

  static ExperimentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  // Throws ConfigError when the config is inconsistent.
  void validate() const;
  SimParams sim_params(double b_value, std::uint64_t seed_value) const;
};

RateFamily make_family(const nlohmann::json& spec);
// Reaction term for a family, with shape ratios counted at level max(level, L0 + 2).
ReactionFn make_reaction(const RateFamily& family, int level);
// Boundary condition of the limit equation for a given b and reservoir rates.
BoundaryCondition limit_boundary(double b, const std::array<double, 3>& lambda_plus,
                                 const std::array<double, 3>& lambda_minus);
BoundaryCondition boundary_for(Regime regime, const std::array<double, 3>& lambda_plus,
                               const std::array<double, 3>& lambda_minus);

struct NamedFunction {
  std::string name;
  SiteFunction values;
};
// Expands the test-function specs at the level of g.
std::vector<NamedFunction> test_functions(const GasketGraph& g, const std::vector<std::string>& specs);

// Runs fn(i) for i in [0, n) on a bounded pool of worker threads. Exceptions
// from workers are rethrown on the calling thread.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& xs);

// -- Convergence ---------------------------------------------------------------

struct ConvergenceRow {
  int level = 0;
  std::string function;
  double time = 0.0;
  double sim_mean = 0.0;
  double sim_se = 0.0;
  double pde = 0.0;
  double abs_error = 0.0;  // replica mean of |pi - <f, rho>|
  double abs_error_se = 0.0;
};

struct LevelError {
  int level = 0;
  double error = 0.0;  // replica mean of max_{f,t} |pi_t(f) - <f, rho_t>|
  double se = 0.0;
  double error_one = 0.0;  // same with f = 1 only
  double se_one = 0.0;
  double noise_floor = 0.0;  // sqrt(rho(1-rho)/|V_N|) at the observed density
  std::uint64_t events = 0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::vector<LevelError> levels;
  bool monotone = false;        // error decreases level to level
  bool ci_separated = false;    // first and last levels' 95% intervals do not overlap
  bool undersampled = false;    // some CI half-width exceeds the error drop it should resolve
};

ConvergenceReport converge(const ExperimentConfig& cfg);

// -- Regime sweep --------------------------------------------------------------

struct RegimeFit {
  Regime regime = Regime::Dirichlet;
  double rms_error = 0.0;
};

struct RegimeCase {
  double b = 1.0;
  Regime expected = Regime::Dirichlet;
  std::array<RegimeFit, 3> fits;
  double ci = 0.0;  // 1.96 * RMS of the simulation standard errors
  double min_margin = 0.0;  // min over mismatched regimes of (error - matched error)
  bool separated = false;   // min_margin >= 2 ci
  std::vector<std::vector<double>> sim_mean;  // [cell][time]
  std::vector<std::vector<double>> sim_se;
  std::array<std::vector<std::vector<double>>, 3> pde;  // [regime][cell][time]
  std::uint64_t events = 0;
};

struct RegimeReport {
  std::vector<std::string> cells;
  std::vector<double> times;
  std::vector<RegimeCase> cases;
  bool all_separated = false;
};

RegimeReport regime_sweep(const ExperimentConfig& cfg);

// -- Replacement diagnostics ----------------------------------------------------

// Per-configuration block quantities for cells of one length M.
class BlockGeometry {
 public:
  BlockGeometry(const Model& model, int block_level, int subcell_depth);

  int block_level() const { return m_; }
  std::size_t num_cells() const { return cells_.size(); }
  // Cells with at least 6 interior sites; the rest are skipped.
  const std::vector<CellAddress>& cells() const { return cells_; }
  const std::vector<CellAddress>& skipped() const { return skipped_; }
  // W_w = | |V_N^w|^-1 sum_{V_N^{L0,w}} c_x (1 - 2 eta(x)) - Phi(eta_bar_w) |, averaged over w.
  double one_block(const Configuration& eta, const ReactionFn& phi) const;
  // Mean over w and sibling pairs v != v' of |eta_bar_{wv} - eta_bar_{wv'}|.
  double two_block(const Configuration& eta) const;

  struct Cell {
    std::vector<SiteId> sites;  // V_N^w
    std::vector<SiteId> core;   // V_N^{L0,w}
    std::vector<std::vector<SiteId>> subcells;  // V_N^{wv}
  };
  const std::vector<Cell>& cell_data() const { return data_; }

 private:
  const Model* model_;
  int m_;
  std::vector<CellAddress> cells_;
  std::vector<CellAddress> skipped_;
  std::vector<Cell> data_;
};

struct ReplacementRow {
  int level = 0;        // N
  int block_level = 0;  // M
  double one_block = 0.0;  // time average over [0, T], replica mean
  double one_block_se = 0.0;
  double two_block = 0.0;
  double two_block_se = 0.0;
  std::size_t cells = 0;
  std::size_t skipped = 0;
};

struct ReplacementReport {
  std::vector<ReplacementRow> rows;
  std::uint64_t events = 0;
};

ReplacementReport replacement_diagnostic(const ExperimentConfig& cfg);

// Integrates the block quantities exactly along a trajectory.
class BlockObserver : public Observer {
 public:
  BlockObserver(const BlockGeometry& geometry, const ReactionFn& phi);
  void on_start(const Simulator& sim) override;
  void on_interval(const Simulator& sim, double t0, double t1) override;
  void before_event(const Simulator& sim, const Event& e) override;
  void after_event(const Simulator& sim, const Event& e) override;
  double one_block_integral() const { return one_int_; }
  double two_block_integral() const { return two_int_; }

 private:
  void refresh(const Simulator& sim);
  void collect(const Simulator& sim, const Event& e);
  void apply(const Simulator& sim, double sign);
  double one_value(std::size_t cell) const;
  double two_value(std::size_t cell) const;

  const BlockGeometry* geo_;
  ReactionFn phi_;
  std::vector<std::int32_t> cell_of_;     // cell index per site, -1 outside every cell
  std::vector<std::uint8_t> in_core_;     // site lies in V_N^{L0,w} of its cell
  std::vector<std::int32_t> subcell_of_;  // global subcell index, -1 if none
  std::vector<std::int32_t> subcell_first_;  // first global subcell index per cell
  std::vector<double> count_;     // occupied sites per cell
  std::vector<double> gsum_;      // sum over the core of c_x (1 - 2 eta(x))
  std::vector<double> subcount_;  // occupied sites per subcell
  std::vector<double> one_;
  std::vector<double> two_;
  double one_total_ = 0.0;
  double two_total_ = 0.0;
  double one_int_ = 0.0;
  double two_int_ = 0.0;
  std::uint64_t events_ = 0;
  std::vector<SiteId> changed_;
  std::vector<SiteId> touched_;
  std::vector<std::int32_t> touched_cells_;
};

// -- Martingale scaling ----------------------------------------------------------

struct MartingaleLevel {
  int level = 0;
  double mean = 0.0;  // replica mean of M_T
  double mean_se = 0.0;
  double variance = 0.0;
  double compensator = 0.0;  // replica mean of <M>_T
  std::uint64_t events = 0;
};

struct MartingaleReport {
  std::vector<MartingaleLevel> levels;
  double slope = 0.0;  // least-squares slope of log Var vs N
  double threshold = 0.0;  // -log 3 + 0.3
  bool passed = false;
};

// F = 1-harmonic function, 0 on V_0 and 1 on V_1 \ V_0.
SiteFunction martingale_test_function(const GasketGraph& g);
MartingaleReport martingale_scaling(const ExperimentConfig& cfg);

// -- Resistance scaling ----------------------------------------------------------

struct ResistanceSample {
  int level = 0;
  std::string cell;
  SiteId z = 0;
  SiteId z2 = 0;
  double resistance = 0.0;
  double normalized = 0.0;  // R / (5/3)^(N - |w|)
};

struct ResistanceReport {
  std::vector<ResistanceSample> samples;
  std::vector<double> corner_resistance;  // full gasket a_1 -> a_2 for each level 0..max
  double max_ratio_error = 0.0;           // max |r_{N+1}/r_N - 5/3|
  double fitted_c = 0.0;                  // max normalized ratio below the top level
  double top_level_max = 0.0;             // max normalized ratio at the top level
  bool envelope_holds = false;            // top level stays below the fitted C
};

ResistanceReport resistance_scaling(const ExperimentConfig& cfg);

// -- Persistence -------------------------------------------------------------------

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  void write_csv(const std::string& path) const;
};

struct ExperimentResult {
  ExperimentConfig config;
  nlohmann::json summary;
  std::vector<Table> tables;
  bool passed = true;
  std::uint64_t events = 0;
  double wall_seconds = 0.0;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);
// Writes <dir>/<table>.csv for every table and <dir>/manifest.json.
void write_outputs(const ExperimentResult& result, const std::string& dir);
nlohmann::json manifest(const ExperimentResult& result);

std::string version_string();

}  // namespace sgk
