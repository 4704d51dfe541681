#include "uidkit/uid_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "uidkit/error.hpp"
#include "uidkit/tsv.hpp"

namespace uidkit {

std::string MuScope::name() const {
  switch (kind) {
    case Kind::sentence: return "sentence";
    case Kind::document: return "document";
    case Kind::language: return "language";
    case Kind::window: return "window:" + std::to_string(window);
    case Kind::all_previous: return "all_previous";
  }
  return "?";
}

MuScope MuScope::parse(const std::string& text) {
  if (text == "sentence" || text == "sent") return sentence();
  if (text == "document" || text == "doc") return document();
  if (text == "language" || text == "lang") return language();
  if (text == "all_previous") return all_previous();
  if (text.rfind("window:", 0) == 0) {
    const int w = std::stoi(text.substr(7));
    if (w < 1) throw DomainError("window scope needs W >= 1");
    return previous(w);
  }
  throw DomainError("unknown mu scope '" + text + "'");
}

void MetricConfig::validate() const {
  if (!(k > 0.0)) throw DomainError("metric exponent k must be > 0");
  if (scope.kind == MuScope::Kind::window && scope.window < 1) throw DomainError("window scope needs W >= 1");
}

std::string MetricConfig::label() const {
  std::string out = to_string(kind);
  switch (kind) {
    case MetricKind::super_linear:
    case MetricKind::entropy: return out + "[k=" + tsv::format_double(k) + "]";
    case MetricKind::variance: return out + "[" + scope.name() + "]";
    case MetricKind::global_delta: return out + "[" + scope.name() + "," + to_string(delta) + "]";
    case MetricKind::local_delta: return out + "[" + to_string(delta) + "]";
    default: return out;
  }
}

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::super_linear: return "super_linear";
    case MetricKind::variance: return "variance";
    case MetricKind::local_variance: return "local_variance";
    case MetricKind::max: return "max";
    case MetricKind::entropy: return "entropy";
    case MetricKind::global_delta: return "global_delta";
    case MetricKind::local_delta: return "local_delta";
  }
  return "?";
}

MetricKind parse_metric_kind(const std::string& text) {
  for (auto kind : {MetricKind::super_linear, MetricKind::variance, MetricKind::local_variance, MetricKind::max,
                    MetricKind::entropy, MetricKind::global_delta, MetricKind::local_delta}) {
    if (to_string(kind) == text) return kind;
  }
  throw DomainError("unknown metric kind '" + text + "'");
}

std::string to_string(DeltaKind delta) { return delta == DeltaKind::squared ? "squared" : "absolute"; }

DeltaKind parse_delta_kind(const std::string& text) {
  if (text == "squared") return DeltaKind::squared;
  if (text == "absolute") return DeltaKind::absolute;
  throw DomainError("unknown delta '" + text + "'");
}

double mean(std::span<const double> s) {
  if (s.empty()) throw DomainError("mean of an empty profile");
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

double super_linear(std::span<const double> s, double k) {
  if (!(k > 0.0)) throw DomainError("super_linear needs k > 0");
  if (s.empty()) throw DomainError("empty profile");
  double total = 0.0;
  for (double v : s) total += std::pow(v, k);
  return total / static_cast<double>(s.size());
}

double delta(double a, double b, DeltaKind kind) {
  const double d = a - b;
  return kind == DeltaKind::squared ? d * d : std::abs(d);
}

double global_delta(std::span<const double> s, double mu, DeltaKind kind) {
  if (s.empty()) throw DomainError("empty profile");
  double total = 0.0;
  for (double v : s) total += delta(v, mu, kind);
  return total / static_cast<double>(s.size());
}

double local_delta(std::span<const double> s, DeltaKind kind) {
  if (s.empty()) throw DomainError("empty profile");
  if (s.size() == 1) return 0.0;
  double total = 0.0;
  for (std::size_t n = 1; n < s.size(); ++n) total += delta(s[n], s[n - 1], kind);
  return total / static_cast<double>(s.size() - 1);
}

double variance(std::span<const double> s, double mu) { return global_delta(s, mu, DeltaKind::squared); }

double resolve_mu(std::span<const double> s, const MuScope& scope, const MuContext& ctx) {
  switch (scope.kind) {
    case MuScope::Kind::sentence: return mean(s);
    case MuScope::Kind::document:
      if (!ctx.document_mean) throw DomainError("document-scope mean requested without document context");
      return *ctx.document_mean;
    case MuScope::Kind::language:
      if (!ctx.language_mean) throw DomainError("language-scope mean requested but none was supplied");
      return *ctx.language_mean;
    default: throw DomainError("scope '" + scope.name() + "' is word-level only");
  }
}

double variance(std::span<const double> s, const MuScope& scope, const MuContext& ctx) {
  return variance(s, resolve_mu(s, scope, ctx));
}

double local_variance(std::span<const double> s) { return local_delta(s, DeltaKind::squared); }

double max_surprisal(std::span<const double> s) {
  if (s.empty()) throw DomainError("empty profile");
  return *std::max_element(s.begin(), s.end());
}

double renyi_entropy(std::span<const double> p, double k) {
  if (!(k > 0.0)) throw DomainError("Renyi order k must be > 0");
  if (k == 1.0) {
    double h = 0.0;
    for (double v : p) {
      if (v > 0.0) h -= v * std::log(v);
    }
    return h;
  }
  double total = 0.0;
  for (double v : p) {
    if (v > 0.0) total += std::pow(v, k);
  }
  return std::log(total) / (1.0 - k);
}

double entropy_uid(std::span<const double> s, double k, bool normalize_probabilities) {
  if (s.empty()) throw DomainError("empty profile");
  std::vector<double> weights(s.begin(), s.end());
  if (normalize_probabilities) {
    for (auto& w : weights) w = std::exp(-w);
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw DomainError("entropy of an all-zero profile is undefined");
  for (auto& w : weights) w /= total;
  const double h = renyi_entropy(weights, k);
  if (k < 1.0) return h;
  if (!(h > 0.0)) throw DomainError("degenerate entropy: normalized profile is a point mass");
  return 1.0 / h;
}

double compute_metric(const MetricConfig& config, std::span<const double> s, const MuContext& ctx) {
  config.validate();
  switch (config.kind) {
    case MetricKind::super_linear: return super_linear(s, config.k);
    case MetricKind::variance: return variance(s, config.scope, ctx);
    case MetricKind::local_variance: return local_variance(s);
    case MetricKind::max: return max_surprisal(s);
    case MetricKind::entropy: return entropy_uid(s, config.k, config.normalize_probabilities);
    case MetricKind::global_delta: return global_delta(s, resolve_mu(s, config.scope, ctx), config.delta);
    case MetricKind::local_delta: return local_delta(s, config.delta);
  }
  throw DomainError("unknown metric");
}

double word_variance(double s, double mu) { return (s - mu) * (s - mu); }

std::vector<WordMetric> word_variances(const std::vector<std::vector<double>>& document_sentences,
                                       const MuScope& scope, std::optional<double> language_mean) {
  std::vector<double> flat;
  std::vector<std::size_t> sentence_of;
  for (std::size_t i = 0; i < document_sentences.size(); ++i) {
    for (double v : document_sentences[i]) {
      flat.push_back(v);
      sentence_of.push_back(i);
    }
  }
  std::vector<WordMetric> out(flat.size());
  if (flat.empty()) return out;

  std::vector<double> prefix(flat.size() + 1, 0.0);
  for (std::size_t i = 0; i < flat.size(); ++i) prefix[i + 1] = prefix[i] + flat[i];

  switch (scope.kind) {
    case MuScope::Kind::language: {
      if (!language_mean) throw DomainError("language-scope mean requested but none was supplied");
      for (std::size_t i = 0; i < flat.size(); ++i) out[i] = {word_variance(flat[i], *language_mean), *language_mean, false};
      break;
    }
    case MuScope::Kind::document: {
      const double mu = prefix.back() / static_cast<double>(flat.size());
      for (std::size_t i = 0; i < flat.size(); ++i) out[i] = {word_variance(flat[i], mu), mu, false};
      break;
    }
    case MuScope::Kind::sentence: {
      for (std::size_t i = 0; i < flat.size(); ++i) {
        const double mu = mean(document_sentences[sentence_of[i]]);
        out[i] = {word_variance(flat[i], mu), mu, false};
      }
      break;
    }
    case MuScope::Kind::window:
    case MuScope::Kind::all_previous: {
      if (scope.kind == MuScope::Kind::window && scope.window < 1) throw DomainError("window scope needs W >= 1");
      for (std::size_t i = 0; i < flat.size(); ++i) {
        if (i == 0) {
          out[i] = {0.0, 0.0, true};
          continue;
        }
        const std::size_t lo =
            scope.kind == MuScope::Kind::window && i > static_cast<std::size_t>(scope.window) ? i - static_cast<std::size_t>(scope.window) : 0;
        const double mu = (prefix[i] - prefix[lo]) / static_cast<double>(i - lo);
        out[i] = {word_variance(flat[i], mu), mu, false};
      }
      break;
    }
  }
  return out;
}

}  // namespace uidkit
