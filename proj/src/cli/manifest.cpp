#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include "edgeflow/cli.hpp"

namespace edgeflow::cli {

namespace fs = std::filesystem;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row() {
  cells_.emplace_back();
  return *this;
}

CsvTable& CsvTable::add(const std::string& s) {
  if (cells_.empty()) throw ConstructionBug("CsvTable: add before row");
  if (cells_.back().size() >= header_.size()) throw ConstructionBug("CsvTable: row too long");
  cells_.back().push_back(s);
  return *this;
}
CsvTable& CsvTable::add(double x) { return add(format_double(x)); }
CsvTable& CsvTable::add(int x) { return add(std::to_string(x)); }
CsvTable& CsvTable::add(long long x) { return add(std::to_string(x)); }

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (i) out += ',';
      if (i < v.size()) out += csv_quote(v[i]);
    }
    out += "\r\n";
  };
  line(header_);
  for (const auto& r : cells_) line(r);
  return out;
}

std::string file_sha256(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

RunContext::RunContext(const ExperimentConfig& cfg, std::string command, fs::path dir)
    : cfg_(cfg), command_(std::move(command)), dir_(std::move(dir)),
      start_(std::chrono::steady_clock::now()) {
  if (dir_.empty()) dir_ = fs::path(cfg.output.directory) / (command_ + "-" + config_hash(cfg).substr(0, 12));
  fs::create_directories(dir_);
}

bool RunContext::wants(const std::string& format) const {
  for (const auto& f : cfg_.output.formats)
    if (f == format) return true;
  return false;
}

void RunContext::write(const std::string& name, const std::string& content) {
  const fs::path p = dir_ / name;
  fs::create_directories(p.parent_path());
  {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out << content;
  }
  for (auto& f : files_)
    if (f.path == name) {
      f = {name, sha256_hex(content), content.size()};
      return;
    }
  files_.push_back({name, sha256_hex(content), content.size()});
}

void RunContext::write_json(const std::string& name, const json& j) {
  if (wants("json")) write(name, j.dump(2) + "\n");
}

void RunContext::write_csv(const std::string& name, const CsvTable& t) {
  if (wants("csv")) write(name, t.str());
}

void RunContext::record(const std::string& name) {
  const fs::path p = dir_ / name;
  files_.push_back({name, file_sha256(p), fs::file_size(p)});
}

void RunContext::finish(int status, const std::string& error) {
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  json m;
  m["command"] = command_;
  m["code_version"] = code_version();
  m["config_hash"] = config_hash(cfg_);
  json c = json::object();
  for (const auto& k : config_keys()) c[k] = get_value(cfg_, k);
  m["config"] = c;
  m["timing"] = {{"finished_utc", stamp}, {"elapsed_seconds", elapsed}};
  m["status"] = status;
  if (!error.empty()) m["error"] = error;
  json files = json::array();
  for (const auto& f : files_) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  m["files"] = files;
  m["warnings"] = aspect_warnings(cfg_);
  m["notes"] = notes_;
  std::ofstream out(dir_ / "manifest.json", std::ios::trunc);
  out << m.dump(2) << "\n";
}

std::shared_ptr<const std::vector<EdgeModeData>> SharedCache::edge_modes(const HoppingModel& m,
                                                                          double mu, double delta) {
  std::ostringstream key;
  key.precision(17);
  key << m.lattice.L1 << ' ' << m.lattice.L2 << ' ' << m.lattice.S << ' ' << mu << ' ' << delta
      << ' ' << m.mu;
  for (const Mat* b : {&m.T0, &m.Tp, &m.Tm})
    for (Eigen::Index i = 0; i < b->size(); ++i) key << ' ' << (*b)(i).real() << ' ' << (*b)(i).imag();
  const std::string k = sha256_hex(key.str());
  using Ptr = std::shared_ptr<const std::vector<EdgeModeData>>;
  std::promise<Ptr> prom;
  std::shared_future<Ptr> fut;
  {
    std::lock_guard lock(mu_);
    auto it = modes_.find(k);
    if (it != modes_.end()) {
      ++hits_;
      fut = it->second;
    } else {
      ++misses_;
      modes_[k] = prom.get_future().share();
    }
  }
  if (fut.valid()) return fut.get();
  try {
    auto out = std::make_shared<const std::vector<EdgeModeData>>(edge_spectrum(m, mu, delta));
    prom.set_value(out);
    return out;
  } catch (...) {
    prom.set_exception(std::current_exception());
    throw;
  }
}

int SharedCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

int SharedCache::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

}  // namespace edgeflow::cli
