#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "disdca/data.hpp"
#include "disdca/solver.hpp"

namespace disdca {

enum class CommMode { in_process, threads, tcp };

// Flat key=value experiment description: a config file plus command-line
// overrides. Unknown keys are rejected. The fully resolved map (minus
// transport and output keys, so traces from different comm modes stay
// directly comparable) is embedded atop every CSV the tools write.
class ExperimentConfig {
 public:
  ExperimentConfig();  // defaults (desk-scale experiment)

  static ExperimentConfig from_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  // "key=value" as passed on the command line
  void set_pair(const std::string& pair);

  const std::string& raw(const std::string& key) const;

  // typed accessors (parse + validate)
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::int64_t> get_int_list(const std::string& key) const;

  SolverConfig solver() const;  // uses the first entry of the m list
  std::vector<int> m_list() const;
  Dataset build_dataset() const;
  Partition build_partition(const Dataset& ds, int K) const;
  Partition build_partition(const Dataset& ds) const;

  CommMode comm_mode() const;
  std::pair<std::string, std::uint16_t> listen_endpoint() const;
  std::pair<std::string, std::uint16_t> connect_endpoint() const;

  std::vector<int> one_comm_K() const;
  std::vector<PartitionScheme> one_comm_schemes() const;

  // data dimension derivable without materializing synthetic examples
  std::uint32_t data_dim() const;

  std::string output_path() const { return raw("output.path"); }

  // sorted key=value pairs for CSV embedding
  std::vector<std::pair<std::string, std::string>> resolved() const;

 private:
  std::map<std::string, std::string> values_;
};

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& text);

}  // namespace disdca
