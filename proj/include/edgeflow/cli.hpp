#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <future>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "json.hpp"

#include "edgeflow/rgflow.hpp"
#include "edgeflow/ward.hpp"

namespace edgeflow::cli {

using json = nlohmann::json;

struct ConfigIssue {
  std::string key, message;
};

// Invalid configuration; what() lists every offending key.
struct InvalidConfig : ConfigError {
  explicit InvalidConfig(std::vector<ConfigIssue> issues);
  std::vector<ConfigIssue> issues;
};

struct LatticeSection {
  int L1 = 89, L2 = 24, S = 2;
};
struct ModelSection {
  std::string type = "qwz";
  std::optional<double> u;
  double mu = 0.0;
  double delta = 0.4;  // edge window
};
struct DisorderSection {
  std::string alpha_inf = "golden";
  double tau = 2.0;
  double lambda = 0.05;
  int modes = 8;
  double amplitude = 1.0, decay = 0.5;
};
struct GridSection {
  double beta = 48.0;
  int n_freq = 1024;
  double gamma = 2.0;
};
struct TransportSection {
  std::vector<std::string> profiles{"odd"};
  std::vector<double> thetas{0.4, 0.2, 0.1, 0.05};
  std::string eta_rule = "sq";
  double eta = 0.01;
  double ell = 8.0;
  double width = 3.0;
};
struct RgSection {
  int s_max = 2, n_keep = 4;
  double beta = 1536.0;
  int max_sweeps = 40;
  std::vector<int> scan_L2;  // extra L2 values for the off-diagonal decay table
};
struct BubbleSection {
  double v0 = 1.0, v1 = 1.0, p = 0.0;
  bool eta_min = false;  // eta = 2 pi / beta at every level
  int levels = 4;        // (beta, L1) / 4, / 2, x 1, x 2 for levels = 4
};
struct OutputSection {
  std::string directory = "edgeflow-out";
  std::vector<std::string> formats{"csv", "json"};
};
struct SweepSection {
  std::string axis;  // lambda | theta | beta | L
  std::vector<double> values;
  std::string command = "twopoint";
  int workers = 1;
};

struct ExperimentConfig {
  LatticeSection lattice;
  ModelSection model;
  DisorderSection disorder;
  GridSection grids;
  TransportSection transport;
  RgSection rg;
  BubbleSection bubble;
  OutputSection output;
  SweepSection sweep;
  unsigned seed = 0;
};

// Every key in canonical order.
const std::vector<std::string>& config_keys();

// "key = value" lines, '#' comments, optional [section] headers prefixing later keys.
// Overrides are "key=value" strings applied after the text. Throws InvalidConfig.
ExperimentConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});
// Throws InvalidConfig naming the key.
void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_value(const ExperimentConfig& cfg, const std::string& key);

// Checks what the subcommand needs (model.u present, L1 a convergent denominator, ...).
void validate(const ExperimentConfig& cfg, const std::string& command);

// Sorted "key = value" lines of the resolved configuration; the config hash is its SHA-256.
std::string canonical_text(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

// beta > kappa L1 and beta > kappa L2 with kappa = 1 (the second is also the L2 >= beta regime).
std::vector<std::string> aspect_warnings(const ExperimentConfig& cfg);

const char* code_version();

// RFC 4180 table, CRLF line ends, numbers with 17 significant digits.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row();
  CsvTable& add(const std::string& s);
  CsvTable& add(const char* s) { return add(std::string(s)); }
  CsvTable& add(double x);
  CsvTable& add(int x);
  CsvTable& add(long long x);
  std::string str() const;
  std::size_t rows() const { return cells_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> cells_;
};

std::string csv_quote(const std::string& s);
std::string format_double(double x);
// NaN and infinities become null.
json number_or_null(double x);

struct OutputFile {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

// One run directory <output.directory>/<command>-<hash12> with its manifest.
class RunContext {
 public:
  RunContext(const ExperimentConfig& cfg, std::string command, std::filesystem::path dir = {});

  const std::filesystem::path& dir() const { return dir_; }
  const std::string& command() const { return command_; }
  bool wants(const std::string& format) const;

  void write(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const json& j);
  void write_csv(const std::string& name, const CsvTable& t);
  // Adds a file written elsewhere under dir() (sub-runs).
  void record(const std::string& name);
  void note(const std::string& key, json value) { notes_[key] = std::move(value); }
  const std::vector<OutputFile>& files() const { return files_; }

  // Writes manifest.json (config hash, code version, timing, files with checksums).
  void finish(int status, const std::string& error = {});

 private:
  ExperimentConfig cfg_;
  std::string command_;
  std::filesystem::path dir_;
  std::vector<OutputFile> files_;
  json notes_ = json::object();
  std::chrono::steady_clock::time_point start_;
};

std::string file_sha256(const std::filesystem::path& p);

// Clean-model edge modes shared across sweep points; the first request for a key computes,
// later ones count as hits.
class SharedCache {
 public:
  std::shared_ptr<const std::vector<EdgeModeData>> edge_modes(const HoppingModel& m, double mu,
                                                              double delta);
  int hits() const;
  int misses() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_future<std::shared_ptr<const std::vector<EdgeModeData>>>> modes_;
  int hits_ = 0, misses_ = 0;
};

using Summary = std::vector<std::pair<std::string, double>>;

// Scalar results of one subcommand run, used as the sweep row.
struct CommandResult {
  Summary summary;
};

CommandResult cmd_spectrum(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache);
CommandResult cmd_twopoint(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache);
CommandResult cmd_scaling(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache);
CommandResult cmd_transport(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache);
CommandResult cmd_ward(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache);
CommandResult cmd_rgflow(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache);
CommandResult cmd_bubble(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache);
// G0, G1 at the single theta transport.thetas[0] (theta-sweep points).
CommandResult cmd_transport_point(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache);

struct SweepReport {
  int points = 0, failed = 0;
  int cache_hits = 0;
};
// Per-point sub-runs under ctx.dir()/point-<i>, merged into sweep.csv. Throws NumericalFailure
// when every point failed.
SweepReport run_sweep(RunContext& ctx, const ExperimentConfig& cfg);

struct SelftestCheck {
  std::string group, name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};
// Every [TRIVIAL] example and the invariant checks, on small lattices.
std::vector<SelftestCheck> run_selftest(std::ostream& log, const std::string& filter = {});

// Dispatch with exit status: 0 ok, 2 config, 3 assumption violation, 4 numerical failure.
int run(const std::string& command, const ExperimentConfig& cfg, std::ostream& log,
        std::ostream& err);
int exit_code_for(const std::exception& e);

}  // namespace edgeflow::cli
