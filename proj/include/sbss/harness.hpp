#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbss/asymptotics.hpp"
#include "sbss/diagonalizer.hpp"
#include "sbss/field_sim.hpp"
#include "sbss/kernels.hpp"
#include "sbss/pipeline.hpp"
#include "sbss/spatial.hpp"

namespace sbss {

/// Location pattern of an experiment.
struct DesignConfig {
  enum class Type { NestedSquares, Diamond, Rectangle, Uniform, WeightedRegion, Csv };
  Type type = Type::NestedSquares;
  int base = 200;   ///< nested squares
  int layers = 5;   ///< nested squares
  int radius = 10;  ///< diamond, rectangle
  Index n = 0;      ///< uniform, weighted region
  std::vector<double> lower, upper;                ///< uniform box
  std::vector<std::array<double, 2>> polygon;      ///< weighted region
  /// "uniform", or "west_skew" with density exp(-(x - x_min) / skew_scale).
  std::string density = "uniform";
  double skew_scale = 100.0;
  std::string path;  ///< csv
};

struct MixingConfig {
  enum class Type { Identity, Matrix, Random };
  Type type = Type::Identity;
  sbss::Matrix matrix;
  std::uint64_t seed = 0;
};

struct KernelSet {
  std::string name;
  std::vector<Kernel> kernels;
};

struct ExperimentConfig {
  DesignConfig design;
  LatentSpec latent = LatentSpec::sim1();
  MixingConfig mixing;
  std::vector<KernelSet> kernel_sets;
  int replications = 100;
  std::vector<Index> sample_sizes;
  std::uint64_t seed = 1;
  bool centered = false;
  std::string outputs = "out";
  JointDiagConfig solver;

  /// Throws InvalidArgument on inconsistent settings.
  void validate() const;

  /// Shipped presets: "sim1", "sim2", "sim3-uniform", "sim3-skew".
  static ExperimentConfig preset(const std::string& name);
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  /// Canonical JSON form; from_json(to_json()) reproduces the config.
  std::string to_json() const;
  /// 64-bit FNV-1a of the canonical JSON, as 16 hex digits.
  std::string hash() const;
};

/// Full location set of the design; random designs are drawn once from the
/// experiment seed.
LocationSet build_design(const ExperimentConfig& cfg);

/// Locations used at sample size n: a prefix for nested squares, the whole
/// design otherwise.
LocationSet design_locations(const ExperimentConfig& cfg, const LocationSet& design, Index n);

Matrix build_mixing(const ExperimentConfig& cfg);

/// Limit mean of n (p - 1) MDI^2; empty when the set is not identifiable.
std::optional<double> expected_nmdi(const LocationSet& locations, const LatentSpec& latent,
                                    const std::vector<Kernel>& kernels);

struct ReportRow {
  Index n = 0;
  std::string kernel_set;
  Index replications = 0;  ///< successful replications
  Index failures = 0;
  double mean_nmdi2 = 0.0;
  double se_nmdi2 = 0.0;
  std::optional<double> asymptotic;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  /// values[i][s][r]: n(p-1)MDI^2 of replication r for sample size i and
  /// kernel set s; empty on failure.
  std::vector<std::vector<std::vector<std::optional<double>>>> values;
  std::vector<std::string> failure_messages;
  double wall_seconds = 0.0;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Deterministic report table; wall time is not part of it.
void write_report_csv(const std::string& path, const ExperimentReport& report);
/// Long format n,kernel_set,replication,nmdi2 with NA for failures.
void write_replications_csv(const std::string& path, const ExperimentConfig& cfg,
                            const ExperimentReport& report);

struct DensityPair {
  Index n = 0;
  std::string kernel_set;
  Vector empirical;
  Vector limit;
};

/// Replicated n(p-1)MDI^2 values next to draws from the limiting
/// distribution, per sample size and kernel set.
std::vector<DensityPair> run_density_comparison(const ExperimentConfig& cfg, Index draws,
                                                const ExperimentReport* report = nullptr);
void write_density_csv(const std::string& path, const DensityPair& pair);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(const Vector& a, const Vector& b);

struct AnalysisConfig {
  std::string data_csv;
  std::vector<KernelSet> kernel_sets;
  /// Reference scores aligned by row; leading x-prefixed coordinate columns are ignored.
  std::optional<std::string> reference_csv;
  std::string outputs = "out";
  bool centered = true;
  JointDiagConfig solver;
};

struct AnalysisResult {
  std::vector<std::string> names;
  std::vector<SbssFit> fits;
  /// Rows: kernel sets; columns: reference components.
  std::optional<Matrix> correlations;
  std::vector<std::vector<Index>> matches;
  std::vector<std::string> reference_header;
};

AnalysisResult run_data_analysis(const AnalysisConfig& cfg);
/// Writes <name>.gamma.csv, .lambda.csv, .scores.csv per set and
/// correlations.csv when a reference was given.
void write_analysis(const AnalysisConfig& cfg, const AnalysisResult& result);

/// File-name safe version of a kernel set name.
std::string safe_name(const std::string& name);

void write_fit(const std::string& prefix, const SbssFit& fit);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sbss
