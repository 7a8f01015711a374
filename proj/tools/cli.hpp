#pragma once

#include "spu/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spu::cli {

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_runtime = 2 };

/// Bad user input: malformed files, unknown ids, invalid fields. Maps to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SHA-1 of "blob <size>\0<content>", as `git hash-object` computes it.
std::string git_blob_sha1(const std::string& content);
/// Hash of the canonical (sorted-key, compact) dump of a config.
std::string config_hash(const trainer::SpuConfig& config);

struct RunManifest {
  nlohmann::json config;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::string config_hash;
  std::string created_utc;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kSummaryFile = "summary.json";
std::string seed_csv_name(std::uint64_t seed);

struct TrainArgs {
  std::optional<std::filesystem::path> config_path;
  std::optional<std::filesystem::path> manifest_path;
  std::optional<std::uint64_t> seed;
  int seeds = 1;
  std::optional<std::string> env;
  std::optional<std::string> constraint;
  std::optional<int> iters;
  bool no_grad_kl = false;
  bool no_dynamic_stopping = false;
  bool no_per_state_acceptance = false;
  std::filesystem::path out = "runs/latest";
  bool out_given = false;
  int jobs = 1;
  bool quiet = false;
};

struct SolveArgs {
  std::optional<std::filesystem::path> instance_path;
  std::optional<std::string> constraint;
  std::optional<double> delta;
  std::optional<double> epsilon;
  /// Batch mode: number of random instances.
  int random = 0;
  std::uint64_t seed = 0;
  /// Maximum tolerated closed-form vs oracle objective gap.
  double tolerance = 1e-4;
};

struct PlotdataArgs {
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> out;
};

/// Metric columns of the per-seed CSV after `iter`, in file order.
const std::vector<std::string>& metric_columns();

struct LongRow {
  int iteration = 0;
  std::uint64_t seed = 0;
  std::string metric;
  std::string value;
  bool operator==(const LongRow&) const = default;
};

/// Reads a per-seed metrics CSV; throws ValidationError on a wrong header or malformed row.
std::vector<std::vector<std::string>> read_metrics_csv(const std::filesystem::path& path);
std::vector<LongRow> long_format(const std::filesystem::path& run_dir);
void write_long_format(std::ostream& out, const std::vector<LongRow>& rows);
std::vector<LongRow> read_long_format(std::istream& in);

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err);
int cmd_plotdata(const PlotdataArgs& args, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spu::cli
