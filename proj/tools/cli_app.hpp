#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace qrlab::cli {

/// Bad config file, bad flag or bad field value. Maps to exit status 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string experiment;
  std::vector<std::size_t> d{60};
  double alpha = 1.0;
  std::string kernel = "quartic:1,1,1";
  std::string cov = "identity";
  std::uint64_t cov_seed = 0;
  std::string sampler = "gaussian";
  double lambda = 1.0;
  double sigma_eps = 0.5;
  std::string teacher = "pure_quadratic";
  std::vector<std::uint64_t> seeds{0};
  std::string nu = "finite";
  std::optional<double> a_star_override;
  std::size_t n_test = 2000;
  std::size_t n_repl = 4;
  std::size_t mc_draws = 1000000;
  std::string outdir = "qrlab_out";  // not part of the hash

  /// Canonical form: every field except outdir, keys sorted.
  nlohmann::json to_json() const;
  /// Reads the fields present in j on top of *this. Unknown keys and
  /// mistyped values raise ConfigError naming the field.
  void merge(const nlohmann::json& j);
  /// Range and spec-string checks; throws ConfigError.
  void validate() const;
};

/// The experiments `run` accepts.
const std::vector<std::string>& experiment_names();

/// n = round(d^2 / (2 alpha)).
std::size_t derived_n(std::size_t d, double alpha);

/// 64-bit FNV-1a of the canonical config dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Parses a JSON config file. Syntax errors report line and column.
nlohmann::json load_config_file(const std::string& path);

/// Runs an experiment and writes results.json, results.csv, timing.json
/// (and SVG overlays for esd / mp_law) into cfg.outdir. Library errors
/// propagate as exceptions.
void run_experiment(const ExperimentConfig& cfg, std::ostream& log);

/// Full command line entry point. Returns the process exit status:
/// 0 success, 1 config error, 2 assumption violation, 3 numerical failure.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qrlab::cli
