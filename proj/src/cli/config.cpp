#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "edgeflow/cli.hpp"

namespace edgeflow::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct BadValue {
  std::string message;
};

double to_double(const std::string& s) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(x))
    throw BadValue{"expected a finite number, got '" + s + "'"};
  return x;
}

long long to_integer(const std::string& s) {
  long long x = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size())
    throw BadValue{"expected an integer, got '" + s + "'"};
  return x;
}

int to_int(const std::string& s, long long lo, long long hi) {
  long long x = to_integer(s);
  if (x < lo || x > hi)
    throw BadValue{"expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                   "], got " + s};
  return static_cast<int>(x);
}

double positive(const std::string& s) {
  double x = to_double(s);
  if (!(x > 0)) throw BadValue{"expected a positive number, got " + s};
  return x;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw BadValue{"expected true or false, got '" + s + "'"};
}

std::vector<std::string> split_list(const std::string& s) {
  std::string body = trim(s);
  if (body.size() >= 2 && ((body.front() == '{' && body.back() == '}') ||
                           (body.front() == '[' && body.back() == ']')))
    body = body.substr(1, body.size() - 2);
  std::vector<std::string> out;
  std::stringstream in(body);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string one_of(const std::string& s, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (s == a) return s;
  std::string msg = "expected one of";
  for (const char* a : allowed) msg += std::string(" ") + a;
  throw BadValue{msg + ", got '" + s + "'"};
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, std::string>)
      out += v[i];
    else if constexpr (std::is_floating_point_v<T>)
      out += format_double(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

struct KeyDef {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define EF_KEY(name, SET, GET)                                                     \
  {                                                                                \
    name, KeyDef{[](ExperimentConfig& c, const std::string& v) { SET; },           \
                 [](const ExperimentConfig& c) -> std::string { return GET; }}     \
  }

const std::map<std::string, KeyDef>& key_table() {
  static const std::map<std::string, KeyDef> t = {
      EF_KEY("lattice.L1", c.lattice.L1 = to_int(v, 3, 100000), std::to_string(c.lattice.L1)),
      EF_KEY("lattice.L2", c.lattice.L2 = to_int(v, 2, 100000), std::to_string(c.lattice.L2)),
      EF_KEY("lattice.S", c.lattice.S = to_int(v, 1, 64), std::to_string(c.lattice.S)),
      EF_KEY("model.type", c.model.type = one_of(v, {"qwz"}), c.model.type),
      EF_KEY("model.u", c.model.u = to_double(v), c.model.u ? format_double(*c.model.u) : ""),
      EF_KEY("model.mu", c.model.mu = to_double(v), format_double(c.model.mu)),
      EF_KEY("model.delta", c.model.delta = positive(v), format_double(c.model.delta)),
      EF_KEY("disorder.alpha_inf",
             {
               (void)parse_frequency(v);
               c.disorder.alpha_inf = v;
             },
             c.disorder.alpha_inf),
      EF_KEY("disorder.tau", c.disorder.tau = positive(v), format_double(c.disorder.tau)),
      EF_KEY("disorder.lambda", c.disorder.lambda = to_double(v), format_double(c.disorder.lambda)),
      EF_KEY("disorder.modes", c.disorder.modes = to_int(v, 0, 1000), std::to_string(c.disorder.modes)),
      EF_KEY("disorder.amplitude", c.disorder.amplitude = to_double(v),
             format_double(c.disorder.amplitude)),
      EF_KEY("disorder.decay", c.disorder.decay = positive(v), format_double(c.disorder.decay)),
      EF_KEY("grids.beta", c.grids.beta = positive(v), format_double(c.grids.beta)),
      EF_KEY("grids.n_freq", c.grids.n_freq = to_int(v, 1, 1 << 24), std::to_string(c.grids.n_freq)),
      EF_KEY("grids.gamma",
             {
               double g = to_double(v);
               if (!(g > 1)) throw BadValue{"expected gamma > 1, got " + v};
               c.grids.gamma = g;
             },
             format_double(c.grids.gamma)),
      EF_KEY("transport.profiles",
             {
               auto p = split_list(v);
               if (p.empty()) throw BadValue{"expected at least one profile"};
               for (auto& s : p) one_of(s, {"odd", "gauss"});
               c.transport.profiles = p;
             },
             join(c.transport.profiles)),
      EF_KEY("transport.thetas",
             {
               std::vector<double> th;
               for (auto& s : split_list(v)) th.push_back(positive(s));
               if (th.empty()) throw BadValue{"expected at least one theta"};
               for (std::size_t i = 1; i < th.size(); ++i)
                 if (!(th[i] < th[i - 1])) throw BadValue{"theta schedule must decrease"};
               c.transport.thetas = th;
             },
             join(c.transport.thetas)),
      EF_KEY("transport.eta_rule", c.transport.eta_rule = one_of(v, {"sq", "pinned"}),
             c.transport.eta_rule),
      EF_KEY("transport.eta", c.transport.eta = positive(v), format_double(c.transport.eta)),
      EF_KEY("transport.ell", c.transport.ell = positive(v), format_double(c.transport.ell)),
      EF_KEY("transport.width", c.transport.width = positive(v), format_double(c.transport.width)),
      EF_KEY("rg.s_max", c.rg.s_max = to_int(v, 1, 3), std::to_string(c.rg.s_max)),
      EF_KEY("rg.n_keep", c.rg.n_keep = to_int(v, 0, 64), std::to_string(c.rg.n_keep)),
      EF_KEY("rg.beta", c.rg.beta = positive(v), format_double(c.rg.beta)),
      EF_KEY("rg.max_sweeps", c.rg.max_sweeps = to_int(v, 1, 10000), std::to_string(c.rg.max_sweeps)),
      EF_KEY("rg.scan_L2",
             {
               std::vector<int> l;
               for (auto& s : split_list(v)) l.push_back(to_int(s, 2, 100000));
               c.rg.scan_L2 = l;
             },
             join(c.rg.scan_L2)),
      EF_KEY("bubble.v0", c.bubble.v0 = to_double(v), format_double(c.bubble.v0)),
      EF_KEY("bubble.v1", c.bubble.v1 = to_double(v), format_double(c.bubble.v1)),
      EF_KEY("bubble.p", c.bubble.p = to_double(v), format_double(c.bubble.p)),
      EF_KEY("bubble.eta_min", c.bubble.eta_min = to_bool(v), c.bubble.eta_min ? "true" : "false"),
      EF_KEY("bubble.levels", c.bubble.levels = to_int(v, 1, 8), std::to_string(c.bubble.levels)),
      EF_KEY("output.directory",
             {
               if (v.empty()) throw BadValue{"expected a directory"};
               c.output.directory = v;
             },
             c.output.directory),
      EF_KEY("output.formats",
             {
               auto f = split_list(v);
               if (f.empty()) throw BadValue{"expected csv and/or json"};
               for (auto& s : f) one_of(s, {"csv", "json"});
               c.output.formats = f;
             },
             join(c.output.formats)),
      EF_KEY("sweep.axis", c.sweep.axis = one_of(v, {"lambda", "theta", "beta", "L"}), c.sweep.axis),
      EF_KEY("sweep.values",
             {
               std::vector<double> x;
               for (auto& s : split_list(v)) x.push_back(to_double(s));
               c.sweep.values = x;
             },
             join(c.sweep.values)),
      EF_KEY("sweep.command",
             c.sweep.command = one_of(v, {"spectrum", "twopoint", "scaling", "transport", "ward", "rgflow"}),
             c.sweep.command),
      EF_KEY("sweep.workers", c.sweep.workers = to_int(v, 1, 256), std::to_string(c.sweep.workers)),
      EF_KEY("seed", c.seed = static_cast<unsigned>(to_int(v, 0, 2147483647)), std::to_string(c.seed)),
  };
  return t;
}

#undef EF_KEY

void apply(ExperimentConfig& cfg, const std::string& key, const std::string& value,
           std::vector<ConfigIssue>& issues) {
  const auto& t = key_table();
  auto it = t.find(key);
  if (it == t.end()) {
    issues.push_back({key, "unknown key"});
    return;
  }
  // Keys without a default (model.u, sweep.*) print empty and read back as unset.
  if (value.empty() && it->second.get(ExperimentConfig{}).empty()) return;
  try {
    it->second.set(cfg, value);
  } catch (const BadValue& e) {
    issues.push_back({key, e.message});
  } catch (const ConfigError& e) {
    issues.push_back({key, e.what()});
  }
}

std::string issues_text(const std::vector<ConfigIssue>& issues) {
  std::string s = "invalid configuration:";
  for (const auto& i : issues) s += "\n  " + i.key + ": " + i.message;
  return s;
}

bool is_convergent_denominator(const std::string& alpha, int L) {
  for (auto [p, q] : convergents(parse_frequency(alpha), 1000000))
    if (q == L) return true;
  return false;
}

}  // namespace

InvalidConfig::InvalidConfig(std::vector<ConfigIssue> i)
    : ConfigError(issues_text(i)), issues(std::move(i)) {}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, def] : key_table()) k.push_back(name);
    return k;
  }();
  return keys;
}

ExperimentConfig parse_config(std::string_view text, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  std::vector<ConfigIssue> issues;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.push_back({"line " + std::to_string(lineno), "unterminated section header"});
        continue;
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({"line " + std::to_string(lineno), "expected key = value"});
      continue;
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    apply(cfg, key, trim(std::string_view(line).substr(eq + 1)), issues);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      issues.push_back({o, "override must be key=value"});
      continue;
    }
    apply(cfg, trim(std::string_view(o).substr(0, eq)), trim(std::string_view(o).substr(eq + 1)),
          issues);
  }
  if (!issues.empty()) throw InvalidConfig(std::move(issues));
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig({{"config", "cannot read " + path.string()}});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  std::vector<ConfigIssue> issues;
  apply(cfg, key, value, issues);
  if (!issues.empty()) throw InvalidConfig(std::move(issues));
}

std::string get_value(const ExperimentConfig& cfg, const std::string& key) {
  auto it = key_table().find(key);
  if (it == key_table().end()) throw InvalidConfig({{key, "unknown key"}});
  return it->second.get(cfg);
}

void validate(const ExperimentConfig& cfg, const std::string& command) {
  std::vector<ConfigIssue> issues;
  const bool lattice_free = command == "bubble" || command == "selftest";
  if (!lattice_free) {
    if (!cfg.model.u) issues.push_back({"model.u", "required by '" + command + "' (no default)"});
    if (cfg.model.type == "qwz" && cfg.lattice.S != 2)
      issues.push_back({"lattice.S", "qwz needs S = 2"});
    if (!is_convergent_denominator(cfg.disorder.alpha_inf, cfg.lattice.L1))
      issues.push_back({"lattice.L1", std::to_string(cfg.lattice.L1) +
                                          " is not a convergent denominator of disorder.alpha_inf"});
    if (cfg.rg.n_keep > cfg.lattice.L1 / 2)
      issues.push_back({"rg.n_keep", "exceeds L1 / 2"});
  }
  if (command == "transport" ||
      (command == "sweep" && cfg.sweep.command == "transport" && cfg.sweep.axis != "theta")) {
    int resolved = 0;
    for (double th : cfg.transport.thetas) resolved += th * cfg.lattice.L1 >= kTwoPi;
    if (resolved < 2)
      issues.push_back({"transport.thetas", "the theta limit needs two values with theta L1 >= 2 pi"});
  }
  if (command == "sweep") {
    if (cfg.sweep.axis.empty()) issues.push_back({"sweep.axis", "required by 'sweep'"});
    if (cfg.sweep.values.empty()) issues.push_back({"sweep.values", "required by 'sweep'"});
    if (cfg.sweep.axis == "L")
      for (double L : cfg.sweep.values)
        if (L != std::floor(L) || L < 3 || !is_convergent_denominator(cfg.disorder.alpha_inf, int(L)))
          issues.push_back({"sweep.values", format_double(L) +
                                                " is not a convergent denominator of disorder.alpha_inf"});
    if (cfg.sweep.axis == "beta" || cfg.sweep.axis == "theta")
      for (double x : cfg.sweep.values)
        if (!(x > 0)) issues.push_back({"sweep.values", "expected positive values"});
  }
  if (!issues.empty()) throw InvalidConfig(std::move(issues));
}

std::string canonical_text(const ExperimentConfig& cfg) {
  std::string s;
  for (const auto& [name, def] : key_table()) s += name + " = " + def.get(cfg) + "\n";
  return s;
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(canonical_text(cfg)); }

std::vector<std::string> aspect_warnings(const ExperimentConfig& cfg) {
  std::vector<std::string> w;
  const double beta = cfg.grids.beta;
  const int L1 = cfg.lattice.L1, L2 = cfg.lattice.L2;
  if (beta > L1)
    w.push_back("grids.beta = " + format_double(beta) + " exceeds kappa L1 = " + std::to_string(L1) +
                " (kappa = 1)");
  if (beta > L2)
    w.push_back("grids.beta = " + format_double(beta) + " exceeds kappa L2 = " + std::to_string(L2) +
                " (kappa = 1); off-diagonal couplings are outside the L2 >= beta regime");
  return w;
}

const char* code_version() {
#ifdef EDGEFLOW_VERSION
  return EDGEFLOW_VERSION;
#else
  return "unknown";
#endif
}

}  // namespace edgeflow::cli
