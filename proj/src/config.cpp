#include "disdca/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace disdca {

namespace {

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> defaults = {
      {"variant", "practical"},
      {"K", "5"},
      {"m", "10"},
      {"T", "50"},
      {"lambda", "0.001"},
      {"loss", "squared_hinge"},
      {"loss.smoothness", ""},  // empty = the loss kind's stated constant
      {"loss.clip_squared_hinge", "true"},
      {"seed", "42"},
      {"sampling", "with_replacement"},
      {"data.path", ""},  // empty = synthetic
      {"data.synthetic.groups", "10"},
      {"data.synthetic.group_dim", "5"},
      {"data.synthetic.points", "200"},
      {"data.synthetic.seed", "1"},
      {"data.synthetic.labels", ""},  // raw | sign; empty = sign for
                                      // classification losses, raw otherwise
      {"data.synthetic.u_value", "1"},
      {"partition.scheme", "block"},
      {"partition.seed", "7"},
      {"comm.mode", "in_process"},
      {"comm.listen", "127.0.0.1:0"},
      {"comm.connect", "127.0.0.1:7010"},
      {"comm.worker_id", "0"},
      {"comm.timeout_s", "30"},
      {"diagnostics.enabled", "false"},
      {"diagnostics.reference", "false"},
      {"diagnostics.reference_tol", "1e-10"},
      {"solver.orth_tol", "1e-12"},
      {"one_comm.local_gap_tol", "1e-6"},
      {"one_comm.max_epochs", "100000"},
      {"one_comm.K", "5,10,25,50"},
      {"one_comm.schemes", "block,random"},
      {"output.path", "trace.csv"},
  };
  return defaults;
}

// keys omitted from the CSV header so traces from different transports and
// output locations compare byte for byte
bool transport_key(const std::string& key) {
  return key.rfind("comm.", 0) == 0 || key == "output.path";
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ExperimentConfig::ExperimentConfig() : values_(default_values()) {}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected key=value");
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return cfg;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (default_values().find(key) == default_values().end())
    throw ConfigError("unknown config key: " + key);
  values_[key] = value;
}

void ExperimentConfig::set_pair(const std::string& pair) {
  const auto eq = pair.find('=');
  if (eq == std::string::npos)
    throw ConfigError("expected key=value, got: " + pair);
  set(trim(pair.substr(0, eq)), trim(pair.substr(eq + 1)));
}

const std::string& ExperimentConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

std::int64_t ExperimentConfig::get_int(const std::string& key) const {
  const std::string& v = raw(key);
  char* end = nullptr;
  const long long out = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(key + ": not an integer: " + v);
  return out;
}

double ExperimentConfig::get_double(const std::string& key) const {
  const std::string& v = raw(key);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(key + ": not a number: " + v);
  return out;
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string& v = raw(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": not a boolean: " + v);
}

std::vector<std::int64_t> ExperimentConfig::get_int_list(
    const std::string& key) const {
  std::vector<std::int64_t> out;
  std::stringstream ss(raw(key));
  std::string token;
  while (std::getline(ss, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    char* end = nullptr;
    const long long v = std::strtoll(token.c_str(), &end, 10);
    if (end == token.c_str() || *end != '\0')
      throw ConfigError(key + ": not an integer list: " + raw(key));
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

SolverConfig ExperimentConfig::solver() const {
  SolverConfig cfg;
  cfg.variant = variant_from_name(raw("variant"));
  cfg.K = static_cast<int>(get_int("K"));
  cfg.m = m_list().front();
  cfg.T = static_cast<int>(get_int("T"));
  cfg.lambda = get_double("lambda");
  cfg.loss = make_loss(loss_from_name(raw("loss")));
  if (!raw("loss.smoothness").empty())
    cfg.loss.smoothness = get_double("loss.smoothness");
  cfg.clip_squared_hinge = get_bool("loss.clip_squared_hinge");
  cfg.seed = static_cast<std::uint64_t>(get_int("seed"));
  cfg.sampling = sampling_from_name(raw("sampling"));
  cfg.exec = comm_mode() == CommMode::threads ? ExecMode::threads
                                              : ExecMode::lockstep;
  cfg.orth_tol = get_double("solver.orth_tol");
  cfg.local_gap_tol = get_double("one_comm.local_gap_tol");
  cfg.one_comm_max_epochs = get_int("one_comm.max_epochs");
  if (cfg.K < 1 || cfg.m < 1 || cfg.T < 0) throw ConfigError("bad K/m/T");
  if (!(cfg.lambda > 0)) throw ConfigError("lambda must be positive");
  return cfg;
}

std::vector<int> ExperimentConfig::m_list() const {
  std::vector<int> out;
  for (std::int64_t v : get_int_list("m")) {
    if (v < 1) throw ConfigError("m entries must be >= 1");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

Dataset ExperimentConfig::build_dataset() const {
  if (!raw("data.path").empty()) {
    Dataset ds = load_libsvm(raw("data.path"));
    normalize_unit_ball_inplace(ds);
    return ds;
  }
  SyntheticSpec spec;
  spec.groups = static_cast<int>(get_int("data.synthetic.groups"));
  spec.group_dim = static_cast<int>(get_int("data.synthetic.group_dim"));
  spec.points_per_group = static_cast<int>(get_int("data.synthetic.points"));
  spec.seed = static_cast<std::uint64_t>(get_int("data.synthetic.seed"));
  spec.u_value = get_double("data.synthetic.u_value");
  Dataset ds = generate_synthetic(spec);

  std::string labels = raw("data.synthetic.labels");
  if (labels.empty())
    labels = raw("loss") == "least_squares" ? "raw" : "sign";
  if (labels == "sign")
    sign_labels_inplace(ds);
  else if (labels != "raw")
    throw ConfigError("data.synthetic.labels must be raw or sign");
  return ds;
}

Partition ExperimentConfig::build_partition(const Dataset& ds, int K) const {
  return make_partition(ds, K, scheme_from_name(raw("partition.scheme")),
                        static_cast<std::uint64_t>(get_int("partition.seed")));
}

Partition ExperimentConfig::build_partition(const Dataset& ds) const {
  return build_partition(ds, static_cast<int>(get_int("K")));
}

CommMode ExperimentConfig::comm_mode() const {
  const std::string& v = raw("comm.mode");
  if (v == "in_process") return CommMode::in_process;
  if (v == "threads") return CommMode::threads;
  if (v == "tcp") return CommMode::tcp;
  throw ConfigError("comm.mode must be in_process, threads, or tcp");
}

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos)
    throw ConfigError("expected host:port, got: " + text);
  const std::string host = text.substr(0, colon);
  char* end = nullptr;
  const std::string port_str = text.substr(colon + 1);
  const long port = std::strtol(port_str.c_str(), &end, 10);
  if (end == port_str.c_str() || *end != '\0' || port < 0 || port > 65535)
    throw ConfigError("bad port in endpoint: " + text);
  return {host, static_cast<std::uint16_t>(port)};
}

std::pair<std::string, std::uint16_t> ExperimentConfig::listen_endpoint() const {
  return parse_endpoint(raw("comm.listen"));
}

std::pair<std::string, std::uint16_t> ExperimentConfig::connect_endpoint() const {
  return parse_endpoint(raw("comm.connect"));
}

std::vector<int> ExperimentConfig::one_comm_K() const {
  std::vector<int> out;
  for (std::int64_t v : get_int_list("one_comm.K")) {
    if (v < 1) throw ConfigError("one_comm.K entries must be >= 1");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<PartitionScheme> ExperimentConfig::one_comm_schemes() const {
  std::vector<PartitionScheme> out;
  std::stringstream ss(raw("one_comm.schemes"));
  std::string token;
  while (std::getline(ss, token, ',')) {
    token = trim(token);
    if (!token.empty()) out.push_back(scheme_from_name(token));
  }
  if (out.empty()) throw ConfigError("one_comm.schemes: empty list");
  return out;
}

std::uint32_t ExperimentConfig::data_dim() const {
  if (raw("data.path").empty())
    return static_cast<std::uint32_t>(get_int("data.synthetic.groups") *
                                      get_int("data.synthetic.group_dim"));
  return load_libsvm(raw("data.path")).dim;
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::resolved()
    const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, value] : values_) {
    if (transport_key(key)) continue;
    std::string v = value;
    if (key == "data.synthetic.labels" && v.empty())
      v = raw("loss") == "least_squares" ? "raw" : "sign";
    out.emplace_back(key, v);
  }
  return out;  // std::map iteration is already sorted
}

}  // namespace disdca
