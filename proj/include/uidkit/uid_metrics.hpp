#pragma once

// Sentence- and word-level operationalizations of (inverse) uniform
// information density over a surprisal profile. Every function here is pure;
// larger values mean a less uniform profile.

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uidkit {

enum class MetricKind { super_linear, variance, local_variance, max, entropy, global_delta, local_delta };
enum class DeltaKind { squared, absolute };

/// Where the target mean surprisal comes from.
struct MuScope {
  enum class Kind { sentence, document, language, window, all_previous };
  Kind kind = Kind::sentence;
  int window = 0;  // previous-word count, only for Kind::window

  static MuScope sentence() { return {Kind::sentence, 0}; }
  static MuScope document() { return {Kind::document, 0}; }
  static MuScope language() { return {Kind::language, 0}; }
  static MuScope previous(int w) { return {Kind::window, w}; }
  static MuScope all_previous() { return {Kind::all_previous, 0}; }

  /// "sentence", "document", "language", "window:3", "all_previous"
  std::string name() const;
  static MuScope parse(const std::string& text);
  bool operator==(const MuScope&) const = default;
};

/// Externally supplied means for document and language scopes.
struct MuContext {
  std::optional<double> document_mean;
  std::optional<double> language_mean;
};

struct MetricConfig {
  MetricKind kind = MetricKind::super_linear;
  double k = 1.0;
  MuScope scope = MuScope::sentence();
  DeltaKind delta = DeltaKind::squared;
  /// Entropy only: build p-hat from exp(-s) instead of from s.
  bool normalize_probabilities = false;

  /// Throws DomainError for k <= 0 or a window scope with W < 1.
  void validate() const;
  /// Stable label such as "super_linear[k=1.5]" or "variance[language]".
  std::string label() const;
};

std::string to_string(MetricKind kind);
MetricKind parse_metric_kind(const std::string& text);
std::string to_string(DeltaKind delta);
DeltaKind parse_delta_kind(const std::string& text);

/// Default exponent grid for sweeps.
inline const std::vector<double> kDefaultKGrid{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0};

double mean(std::span<const double> s);

/// (1/N) sum s^k
double super_linear(std::span<const double> s, double k);

/// (1/N) sum (s - mu)^2
double variance(std::span<const double> s, double mu);
/// Resolves mu from the scope: sentence mean, or the document/language mean
/// from `ctx`. Throws DomainError when the needed mean is absent or the scope
/// is word-level.
double variance(std::span<const double> s, const MuScope& scope, const MuContext& ctx);
double resolve_mu(std::span<const double> s, const MuScope& scope, const MuContext& ctx);

/// (1/(N-1)) sum_{n>=2} (s_n - s_{n-1})^2; 0 for a single token.
double local_variance(std::span<const double> s);

double max_surprisal(std::span<const double> s);

/// Renyi entropy in nats; k == 1 gives Shannon entropy.
double renyi_entropy(std::span<const double> p, double k);

/// H_k(p-hat) for k < 1, 1 / H_k(p-hat) otherwise, where p-hat is the
/// profile normalized to sum to one. Throws DomainError for an all-zero
/// profile or a zero entropy with k >= 1.
double entropy_uid(std::span<const double> s, double k, bool normalize_probabilities = false);

double delta(double a, double b, DeltaKind kind);
/// (1/N) sum Delta(s_n, mu)
double global_delta(std::span<const double> s, double mu, DeltaKind kind);
/// (1/(N-1)) sum_{n>=2} Delta(s_n, s_{n-1}); 0 for a single token.
double local_delta(std::span<const double> s, DeltaKind kind);

/// Dispatches on config.kind; `ctx` supplies document/language means.
double compute_metric(const MetricConfig& config, std::span<const double> s, const MuContext& ctx = {});

struct WordMetric {
  double value = 0.0;
  double mu = 0.0;
  bool excluded = false;
};

/// (s - mu)^2 for one word.
double word_variance(double s, double mu);

/// Word-level variance for every token of one document, sentences in order.
/// Window and all-previous means run over preceding words of the document,
/// crossing sentence boundaries; a token with no preceding word is excluded.
std::vector<WordMetric> word_variances(const std::vector<std::vector<double>>& document_sentences,
                                       const MuScope& scope,
                                       std::optional<double> language_mean = std::nullopt);

}  // namespace uidkit
