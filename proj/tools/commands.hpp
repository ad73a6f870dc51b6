#ifndef GLSMUL_TOOLS_COMMANDS_HPP_
#define GLSMUL_TOOLS_COMMANDS_HPP_

#include "glsmul/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace glsmul::cli {

inline constexpr const char* kReportVersion = "glsmul.report/1";
inline constexpr const char* kOracleVersion = "glsmul.oracle/1";
inline constexpr const char* kShiftVersion = "glsmul.shift/1";

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags, bad config values, missing input files. Maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct GenOptions {
  std::string scenario;
  std::uint64_t seed = 0;
  std::optional<Index> n_source;
  std::optional<Index> n_target;
  std::string out_dir;
};

/// Data comes either from CSV files or from a named scenario generated in
/// memory. Target labels, when present, are used for evaluation only.
struct DataOptions {
  std::string source_path;
  std::string target_path;
  std::string scenario;
  int num_classes = 0;
};

struct TrainOptions {
  DataOptions data;
  TrainConfig config;
  std::string out_dir;
};

struct EstimateOptions {
  DataOptions data;
  std::string checkpoint;
  std::uint64_t seed = 0;
  std::string out_dir;
};

enum class BenchPath { naive, woodbury, rff };

struct BenchOptions {
  std::vector<BenchPath> paths = {BenchPath::naive, BenchPath::woodbury, BenchPath::rff};
  std::vector<Index> sizes = {500, 1000, 2000, 4000};
  std::vector<Index> ranks = {128, 512, 2048};
  int num_classes = 3;
  double epsilon = 1e-3;
  std::uint64_t seed = 0;
  int repeats = 1;
  std::string out_path;
};

struct BenchRow {
  BenchPath path = BenchPath::naive;
  Index m = 0;
  Index r = 0;  // 0 for the exact paths
  double seconds = 0.0;
  double max_abs_err = 0.0;  // against the naive path; NaN when it was not run
};

std::string to_string(BenchPath path);
BenchPath parse_bench_path(const std::string& name);

/// Writes source.csv, target.csv and oracle.json under out_dir.
void cmd_gen(const GenOptions& options);

/// Pretrain then adapt. Writes checkpoint.bin, trace.csv and report.json. On
/// a training failure the partial trace is still written before rethrowing.
void cmd_train(const TrainOptions& options);

/// BBSE with a saved model. Writes shift.json.
ShiftEstimate cmd_estimate_shift(const EstimateOptions& options);

std::vector<BenchRow> cmd_bench(const BenchOptions& options);

void write_trace_csv(const std::string& path, const TrainTrace& trace);
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

/// Full command line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace glsmul::cli

#endif  // GLSMUL_TOOLS_COMMANDS_HPP_
