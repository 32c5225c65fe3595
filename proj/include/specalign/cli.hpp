#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace specalign::cli {

/// One subcommand option: set from a config file (key=value lines, '#'
/// comments), overridden by --key=value or --key value flags. Unknown
/// keys anywhere are hard errors.
struct Option {
  std::string key;
  std::string value;  // textual; defaults prefilled
  std::string description;
  bool is_flag = false;
};

class OptionSet {
 public:
  void add(std::string key, std::string default_value, std::string description);
  void add_flag(std::string key, std::string description);

  void load_config_file(const std::string& path);
  // Consumes argv-style tokens after the subcommand name.
  void apply_args(const std::vector<std::string>& args);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long get_long(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;  // comma separated
  std::vector<long> get_longs(const std::string& key) const;

  void write_resolved(const std::string& path) const;
  std::string usage() const;

 private:
  Option& find(const std::string& key);
  const Option& find(const std::string& key) const;
  std::vector<Option> options_;
};

/// Entry point behind main(): parses the subcommand, runs it, maps
/// ValidationError/NumericError/IoError onto exit codes 1/2/3 and prints
/// a single machine-parseable "error: ..." line on stderr.
int dispatch(int argc, char** argv);

}  // namespace specalign::cli
