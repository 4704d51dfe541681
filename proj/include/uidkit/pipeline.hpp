#pragma once

// Experiment orchestration: config, data assembly, regression datasets,
// sweeps over UID predictors, and report/manifest emission.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uidkit/corpus.hpp"
#include "uidkit/ngram_lm.hpp"
#include "uidkit/regression.hpp"
#include "uidkit/uid_metrics.hpp"

namespace uidkit::pipeline {

inline constexpr int kConfigSchemaVersion = 1;

struct NgramSettings {
  int order = 5;
  int unk_threshold = 1;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;

  // Inputs. `corpus` is a pre-tokenized TSV; `lm_corpus` defaults to it.
  std::string corpus;
  std::string lm_corpus;
  std::string reference_corpus;  // for the language-level mean
  std::optional<double> language_mean;
  std::string reading_times;
  std::string acceptability;

  // Exactly one surprisal source.
  std::optional<NgramSettings> ngram;
  std::string external_surprisals;

  std::vector<double> k_grid = kDefaultKGrid;
  std::vector<double> table_k_grid{0.25, 1.0, 1.25, 1.5, 2.0};
  std::vector<double> entropy_k_grid{0.25, 1.0, 2.0};
  std::vector<int> windows{1, 2, 3, 4};

  int folds = 10;
  std::optional<std::uint64_t> seed;
  std::string baseline = "main";  // or "extended"
  bool raw_probability = false;
  bool remove_outliers = true;
  CorrelationMethod correlation = CorrelationMethod::pearson;
  int workers = 1;
  std::string output_dir = "out";

  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws InputError when an invariant is broken.
  void validate() const;
  /// Hex SHA-256 of the canonical JSON form.
  std::string hash() const;
  std::uint64_t fold_seed() const;
};

/// Relative file paths in a config file are taken relative to the file's
/// directory; this rewrites them in place against `base`.
void resolve_config_paths(nlohmann::json& j, const std::filesystem::path& base);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Everything the analyses consume, already preprocessed.
struct ExperimentData {
  Corpus corpus;
  SurprisalSet profiles;
  std::string source_tag;
  double language_mean = 0.0;
  std::string language_mean_source;
  std::optional<UnigramModel> unigram;
  std::vector<ReadingRecord> reading;  // after outlier removal
  std::size_t dropped_pairs = 0;
  std::vector<AcceptabilityRecord> acceptability;
};

ExperimentData load_experiment(const ExperimentConfig& config);

/// Mean word surprisal over every profile (end-of-sentence excluded).
double mean_word_surprisal(const SurprisalSet& profiles);

/// Parses "super_linear:k=1.5", "variance:language", "local_variance",
/// "max", "entropy:k=2", "global_delta:sentence:absolute", ...
MetricConfig parse_metric(const std::string& text);

/// Sentence-level predictor uid^-1 * N. In raw-probability mode the
/// super-linear predictor is -sum p^k with p = exp(-s).
double sentence_predictor(const MetricConfig& metric, const SurprisalProfile& profile, const MuContext& ctx,
                          bool raw_probability = false);

/// Per-document mean word surprisal.
std::map<std::string, double> document_means(const Corpus& corpus, const SurprisalSet& profiles);

// ---------------------------------------------------------------------------
// Regression datasets

enum class Response { sentence_rt, word_rt, acceptability };
std::string to_string(Response r);
Response parse_response(const std::string& text);

struct AnalysisTable {
  Response response = Response::sentence_rt;
  Dataset data;
  ModelSpec baseline;
  std::vector<SentenceRef> sentences;  // one per row
  std::vector<TokenId> tokens;         // word_rt only
  std::size_t excluded = 0;            // rows dropped while building
};

/// Per-(subject, sentence) total reading time; fixed word_count and
/// fixated_count, per-subject random slope for word_count.
AnalysisTable sentence_rt_table(const ExperimentData& data, const std::string& baseline_variant = "main");
/// Binary acceptability labels with an intercept-only logistic baseline.
AnalysisTable acceptability_table(const ExperimentData& data, const std::string& baseline_variant = "main");
/// Per-(subject, fixated word) times with current and previous-word
/// log-probability, unigram log-probability, length and length x unigram,
/// plus a per-subject random intercept. Document-initial words are dropped.
AnalysisTable word_rt_table(const ExperimentData& data);

/// The baseline spec for a response in a given variant.
ModelSpec baseline_spec(Response response, const std::string& variant = "main");

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  std::string dataset;
  std::string predictor;
  std::optional<double> k;
  std::string scope;
  double delta_loglik = 0.0;  // nats per datapoint
  double se = 0.0;
  std::size_t n = 0;
  std::size_t excluded = 0;
  std::string status = "ok";
  std::string config_hash;
  std::string source;
  std::uint64_t seed = 0;

  bool ok() const { return status == "ok"; }
};

/// nats -> the 10^-2 nats used in result tables, and back.
double to_paper_units(double nats);
double from_paper_units(double value);

struct Report {
  std::string kind;
  std::vector<ReportRow> rows;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json to_json(const Report& report);
void write_report_tsv(std::ostream& out, const Report& report);

struct Provenance {
  std::string config_hash;
  std::string source;
  std::uint64_t seed = 0;
};
Provenance provenance(const ExperimentConfig& config, const ExperimentData& data);

/// Runs independent cells on up to `workers` threads; results keep the
/// order of `cells`.
std::vector<ReportRow> run_cells(const std::vector<std::function<ReportRow()>>& cells, int workers);

/// Cross-validated comparison of the response baseline against baseline +
/// one sentence-level predictor.
ModelComparison compare_predictor(const ExperimentConfig& config, const ExperimentData& data, Response response,
                                  const MetricConfig& metric);

Report run_k_sweep(const ExperimentConfig& config, const ExperimentData& data);
Report run_operationalization_table(const ExperimentConfig& config, const ExperimentData& data);
Report run_window_sweep(const ExperimentConfig& config, const ExperimentData& data);
Report run_correlation_figure(const ExperimentConfig& config, const ExperimentData& data);

// ---------------------------------------------------------------------------
// Output directory bookkeeping

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Collects written artifacts and emits MANIFEST.json (paths relative to the
/// output directory, sorted, with SHA-256 and byte size).
class Manifest {
 public:
  explicit Manifest(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  /// Writes `content` to dir/name and records it.
  void write(const std::string& name, const std::string& content);
  /// Records a file already written under dir.
  void add(const std::string& name);
  void set(const std::string& key, nlohmann::json value) { meta_[key] = std::move(value); }
  /// Merges with an existing MANIFEST.json in the same directory.
  void finish() const;

 private:
  std::filesystem::path dir_;
  std::vector<std::string> names_;
  nlohmann::json meta_ = nlohmann::json::object();
};

}  // namespace uidkit::pipeline
