#include "uidkit/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "uidkit/error.hpp"
#include "uidkit/tsv.hpp"

namespace uidkit::pipeline {

using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys{
    "schema_version", "corpus",        "lm_corpus",   "reference_corpus", "language_mean",   "reading_times",
    "acceptability",  "ngram",         "external_surprisals", "k_grid",   "table_k_grid",    "entropy_k_grid",
    "windows",        "folds",         "seed",        "baseline",         "raw_probability", "remove_outliers",
    "correlation",    "workers",       "output_dir"};

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config key '") + key + "': " + e.what());
  }
}

std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw InputError(std::string("cannot open ") + what + " file '" + path + "'");
  return in;
}

Corpus read_corpus_file(const std::string& path) {
  auto in = open_input(path, "corpus");
  const std::filesystem::path p(path);
  if (p.extension() == ".tsv") return read_corpus_tsv(in, path);
  std::stringstream buf;
  buf << in.rdbuf();
  if (p.extension() == ".lines") return from_sentence_lines(buf.str());
  return tokenize(buf.str());
}

std::string hex(const unsigned char* bytes, unsigned int len) {
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(bytes[i]);
  return out.str();
}

std::string format_k(double k) { return tsv::format_double(k); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kConfigKeys.count(key)) throw InputError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  if (!j.contains("schema_version")) throw InputError("config is missing schema_version");
  read_key(j, "schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion) {
    throw InputError("unsupported config schema_version " + std::to_string(c.schema_version) + " (expected " +
                     std::to_string(kConfigSchemaVersion) + ")");
  }
  read_key(j, "corpus", c.corpus);
  read_key(j, "lm_corpus", c.lm_corpus);
  read_key(j, "reference_corpus", c.reference_corpus);
  if (j.contains("language_mean") && !j.at("language_mean").is_null()) {
    double v = 0.0;
    read_key(j, "language_mean", v);
    c.language_mean = v;
  }
  read_key(j, "reading_times", c.reading_times);
  read_key(j, "acceptability", c.acceptability);
  if (j.contains("ngram") && !j.at("ngram").is_null()) {
    const auto& n = j.at("ngram");
    if (!n.is_object()) throw InputError("config key 'ngram' must be an object");
    NgramSettings s;
    for (const auto& [key, value] : n.items()) {
      if (key != "order" && key != "unk_threshold") throw InputError("unknown ngram key '" + key + "'");
    }
    read_key(n, "order", s.order);
    read_key(n, "unk_threshold", s.unk_threshold);
    c.ngram = s;
  }
  read_key(j, "external_surprisals", c.external_surprisals);
  read_key(j, "k_grid", c.k_grid);
  read_key(j, "table_k_grid", c.table_k_grid);
  read_key(j, "entropy_k_grid", c.entropy_k_grid);
  read_key(j, "windows", c.windows);
  read_key(j, "folds", c.folds);
  if (j.contains("seed") && !j.at("seed").is_null()) {
    std::uint64_t seed = 0;
    read_key(j, "seed", seed);
    c.seed = seed;
  }
  read_key(j, "baseline", c.baseline);
  read_key(j, "raw_probability", c.raw_probability);
  read_key(j, "remove_outliers", c.remove_outliers);
  if (j.contains("correlation")) {
    std::string method;
    read_key(j, "correlation", method);
    if (method == "pearson") {
      c.correlation = CorrelationMethod::pearson;
    } else if (method == "spearman") {
      c.correlation = CorrelationMethod::spearman;
    } else {
      throw InputError("correlation must be 'pearson' or 'spearman', got '" + method + "'");
    }
  }
  read_key(j, "workers", c.workers);
  read_key(j, "output_dir", c.output_dir);
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["corpus"] = corpus;
  j["lm_corpus"] = lm_corpus;
  j["reference_corpus"] = reference_corpus;
  j["language_mean"] = language_mean ? json(*language_mean) : json(nullptr);
  j["reading_times"] = reading_times;
  j["acceptability"] = acceptability;
  j["ngram"] = ngram ? json{{"order", ngram->order}, {"unk_threshold", ngram->unk_threshold}} : json(nullptr);
  j["external_surprisals"] = external_surprisals;
  j["k_grid"] = k_grid;
  j["table_k_grid"] = table_k_grid;
  j["entropy_k_grid"] = entropy_k_grid;
  j["windows"] = windows;
  j["folds"] = folds;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["baseline"] = baseline;
  j["raw_probability"] = raw_probability;
  j["remove_outliers"] = remove_outliers;
  j["correlation"] = correlation == CorrelationMethod::pearson ? "pearson" : "spearman";
  j["workers"] = workers;
  j["output_dir"] = output_dir;
  return j;
}

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) throw InputError("unsupported config schema_version");
  if (ngram.has_value() == !external_surprisals.empty()) {
    throw InputError("config needs exactly one surprisal source: 'ngram' or 'external_surprisals'");
  }
  if (ngram) {
    if (ngram->order < 1 || ngram->order > NGramModel::kMaxOrder) throw InputError("ngram.order must be in [1, 5]");
    if (ngram->unk_threshold < 1) throw InputError("ngram.unk_threshold must be >= 1");
  }
  if (!seed) throw InputError("config needs a seed");
  if (k_grid.empty()) throw InputError("k_grid must not be empty");
  for (const auto* grid : {&k_grid, &table_k_grid, &entropy_k_grid}) {
    for (double k : *grid) {
      if (!(k > 0.0) || !std::isfinite(k)) throw InputError("every k must be a finite value > 0");
    }
  }
  for (int w : windows) {
    if (w < 1) throw InputError("window sizes must be >= 1");
  }
  if (folds < 2) throw InputError("folds must be >= 2");
  if (baseline != "main" && baseline != "extended") throw InputError("baseline must be 'main' or 'extended'");
  if (workers < 1) throw InputError("workers must be >= 1");
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  // Neither affects results.
  j.erase("workers");
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

std::uint64_t ExperimentConfig::fold_seed() const {
  if (!seed) throw InputError("config needs a seed");
  return *seed;
}

void resolve_config_paths(json& j, const std::filesystem::path& base) {
  if (!j.is_object() || base.empty()) return;
  for (const char* key : {"corpus", "lm_corpus", "reference_corpus", "reading_times", "acceptability",
                          "external_surprisals", "output_dir"}) {
    if (!j.contains(key) || !j.at(key).is_string()) continue;
    const std::filesystem::path p(j.at(key).get<std::string>());
    if (p.empty() || p.is_absolute()) continue;
    j[key] = (base / p).lexically_normal().string();
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  resolve_config_paths(j, path.parent_path());
  return ExperimentConfig::from_json(j);
}

// ---------------------------------------------------------------------------
// Data

double mean_word_surprisal(const SurprisalSet& profiles) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& [ref, p] : profiles) {
    for (double v : p.s) total += v;
    n += p.s.size();
  }
  if (n == 0) throw DomainError("no surprisals to average");
  return total / static_cast<double>(n);
}

std::map<std::string, double> document_means(const Corpus& corpus, const SurprisalSet& profiles) {
  std::map<std::string, double> out;
  for (const auto& doc : corpus.documents()) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& sent : doc.sentences) {
      const auto it = profiles.find(sent.ref());
      if (it == profiles.end()) continue;
      for (double v : it->second.s) total += v;
      n += it->second.s.size();
    }
    if (n > 0) out[doc.id] = total / static_cast<double>(n);
  }
  return out;
}

ExperimentData load_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.corpus.empty()) throw InputError("config needs a corpus");
  ExperimentData data;
  data.corpus = read_corpus_file(config.corpus);
  if (data.corpus.empty()) throw InputError("corpus '" + config.corpus + "' is empty");
  const Corpus lm_corpus = config.lm_corpus.empty() ? data.corpus : read_corpus_file(config.lm_corpus);

  std::optional<NGramModel> model;
  if (config.ngram) {
    model = NGramModel::train(lm_corpus, config.ngram->order, config.ngram->unk_threshold);
    data.profiles = surprisals(*model, data.corpus);
    data.source_tag = "ngram:order=" + std::to_string(config.ngram->order) +
                      ":unk=" + std::to_string(config.ngram->unk_threshold);
  } else {
    auto in = open_input(config.external_surprisals, "surprisal");
    data.profiles = load_external_surprisals(in, data.corpus, config.external_surprisals);
    if (data.profiles.empty()) throw InputError("surprisal file '" + config.external_surprisals + "' has no rows");
    const auto& first = data.profiles.begin()->second;
    data.source_tag = "external:" + (first.model_tag.empty() ? std::string("unknown") : first.model_tag) +
                      (first.pseudo ? ":pseudo" : "");
  }
  data.unigram = UnigramModel::train(lm_corpus);

  if (config.language_mean) {
    data.language_mean = *config.language_mean;
    data.language_mean_source = "config";
  } else if (!config.reference_corpus.empty() && model) {
    const Corpus reference = read_corpus_file(config.reference_corpus);
    data.language_mean = mean_word_surprisal(surprisals(*model, reference));
    data.language_mean_source = "reference_corpus";
  } else {
    data.language_mean = mean_word_surprisal(data.profiles);
    data.language_mean_source = "analysis_corpus";
  }

  if (!config.reading_times.empty()) {
    auto in = open_input(config.reading_times, "reading-time");
    auto records = read_reading_times_tsv(in, config.reading_times);
    for (const auto& r : records) {
      const auto* sent = data.corpus.find(r.token.sentence());
      if (!sent || r.token.tok_idx < 0 || static_cast<std::size_t>(r.token.tok_idx) >= sent->size()) {
        throw InputError("reading time for unknown token " + r.token.to_string());
      }
    }
    if (config.remove_outliers) {
      auto result = remove_outliers(records);
      data.reading = std::move(result.kept);
      data.dropped_pairs = result.dropped.size();
    } else {
      data.reading = std::move(records);
    }
  }
  if (!config.acceptability.empty()) {
    auto in = open_input(config.acceptability, "acceptability");
    data.acceptability = read_acceptability_tsv(in, config.acceptability);
    for (const auto& r : data.acceptability) {
      if (!data.corpus.find(r.sentence)) {
        throw InputError("acceptability label for unknown sentence (" + r.sentence.doc_id + ", s" +
                         std::to_string(r.sentence.sent_idx) + ")");
      }
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Predictors

MetricConfig parse_metric(const std::string& text) {
  const auto parts = tsv::split(text, ':');
  MetricConfig m;
  m.kind = parse_metric_kind(parts.at(0));
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto& part = parts[i];
    if (part.rfind("k=", 0) == 0) {
      try {
        std::size_t used = 0;
        m.k = std::stod(part.substr(2), &used);
        if (used != part.size() - 2) throw std::invalid_argument(part);
      } catch (const std::exception&) {
        throw InputError("bad exponent in metric '" + text + "'");
      }
    } else if (part == "squared" || part == "absolute") {
      m.delta = parse_delta_kind(part);
    } else if (part == "window" && i + 1 < parts.size()) {
      m.scope = MuScope::parse(part + ":" + parts[i + 1]);
      ++i;
    } else {
      m.scope = MuScope::parse(part);
    }
  }
  m.validate();
  return m;
}

double sentence_predictor(const MetricConfig& metric, const SurprisalProfile& profile, const MuContext& ctx,
                          bool raw_probability) {
  const auto n = profile.s.size();
  if (raw_probability && metric.kind == MetricKind::super_linear) {
    double total = 0.0;
    for (double v : profile.s) total += std::pow(std::exp(-v), metric.k);
    return -total;
  }
  return compute_metric(metric, profile.s, ctx) * static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Datasets

std::string to_string(Response r) {
  switch (r) {
    case Response::sentence_rt: return "sentence_rt";
    case Response::word_rt: return "word_rt";
    case Response::acceptability: return "acceptability";
  }
  return "?";
}

Response parse_response(const std::string& text) {
  if (text == "sentence_rt") return Response::sentence_rt;
  if (text == "word_rt") return Response::word_rt;
  if (text == "acceptability") return Response::acceptability;
  throw InputError("unknown response '" + text + "' (sentence_rt, word_rt, acceptability)");
}

ModelSpec baseline_spec(Response response, const std::string& variant) {
  if (variant != "main" && variant != "extended") throw InputError("baseline must be 'main' or 'extended'");
  ModelSpec spec;
  spec.response = to_string(response);
  const std::vector<std::string> extended{"sum_unigram", "sum_char_len", "sum_unigram_x_char_len"};
  switch (response) {
    case Response::sentence_rt:
      spec.family = Family::gaussian;
      spec.fixed_effects = {"word_count", "fixated_count"};
      spec.random_effects = {"word_count"};
      break;
    case Response::acceptability:
      spec.family = Family::bernoulli;
      break;
    case Response::word_rt:
      spec.family = Family::gaussian;
      spec.fixed_effects = {"logprob",      "unigram",      "char_len",      "len_x_unigram",
                            "prev_logprob", "prev_unigram", "prev_char_len", "prev_len_x_unigram"};
      spec.random_effects = {kIntercept};
      return spec;
  }
  if (variant == "extended") spec.fixed_effects.insert(spec.fixed_effects.end(), extended.begin(), extended.end());
  return spec;
}

namespace {

struct SentenceSums {
  double unigram = 0.0;
  double char_len = 0.0;
};

SentenceSums sentence_sums(const Sentence& sent, const UnigramModel& unigram) {
  SentenceSums out;
  for (const auto& t : sent.tokens) {
    out.unigram += unigram.log_prob(t.lowercased);
    out.char_len += static_cast<double>(t.char_len);
  }
  return out;
}

void add_extended_columns(AnalysisTable& table, const ExperimentData& data) {
  if (!data.unigram) throw InputError("extended baseline needs a unigram model");
  std::vector<double> uni, len, inter;
  for (const auto& ref : table.sentences) {
    const auto sums = sentence_sums(data.corpus.at(ref), *data.unigram);
    uni.push_back(sums.unigram);
    len.push_back(sums.char_len);
    inter.push_back(sums.unigram * sums.char_len);
  }
  table.data.add_column("sum_unigram", std::move(uni));
  table.data.add_column("sum_char_len", std::move(len));
  table.data.add_column("sum_unigram_x_char_len", std::move(inter));
}

const SurprisalProfile& profile_for(const ExperimentData& data, const SentenceRef& ref) {
  const auto it = data.profiles.find(ref);
  if (it == data.profiles.end()) {
    throw InputError("no surprisal profile for sentence (" + ref.doc_id + ", s" + std::to_string(ref.sent_idx) + ")");
  }
  return it->second;
}

}  // namespace

AnalysisTable sentence_rt_table(const ExperimentData& data, const std::string& baseline_variant) {
  if (data.reading.empty()) throw InputError("sentence_rt analysis needs reading times");
  AnalysisTable table;
  table.response = Response::sentence_rt;
  table.baseline = baseline_spec(Response::sentence_rt, baseline_variant);
  const auto agg = aggregate_sentence_rts(data.reading);
  std::vector<double> words, fixated;
  for (const auto& row : agg.rows) {
    const auto& sent = data.corpus.at(row.sentence);
    profile_for(data, row.sentence);
    table.data.response.push_back(row.total_rt);
    table.data.groups.push_back(row.subject_id);
    words.push_back(static_cast<double>(sent.size()));
    fixated.push_back(static_cast<double>(row.fixated_count));
    table.sentences.push_back(row.sentence);
  }
  table.data.add_column("word_count", std::move(words));
  table.data.add_column("fixated_count", std::move(fixated));
  table.excluded = agg.no_fixations.size() + data.dropped_pairs;
  if (baseline_variant == "extended") add_extended_columns(table, data);
  return table;
}

AnalysisTable acceptability_table(const ExperimentData& data, const std::string& baseline_variant) {
  if (data.acceptability.empty()) throw InputError("acceptability analysis needs acceptability labels");
  AnalysisTable table;
  table.response = Response::acceptability;
  table.baseline = baseline_spec(Response::acceptability, baseline_variant);
  for (const auto& r : data.acceptability) {
    if (r.scheme != RatingScheme::binary) {
      ++table.excluded;
      continue;
    }
    profile_for(data, r.sentence);
    table.data.response.push_back(r.label);
    table.sentences.push_back(r.sentence);
  }
  if (table.sentences.empty()) throw InputError("logistic fits need binary acceptability labels");
  if (baseline_variant == "extended") add_extended_columns(table, data);
  return table;
}

AnalysisTable word_rt_table(const ExperimentData& data) {
  if (data.reading.empty()) throw InputError("word_rt analysis needs reading times");
  if (!data.unigram) throw InputError("word_rt analysis needs a unigram model");
  AnalysisTable table;
  table.response = Response::word_rt;
  table.baseline = baseline_spec(Response::word_rt);

  struct Features {
    double logprob, unigram, char_len;
    bool has_prev;
    double prev_logprob, prev_unigram, prev_char_len;
  };
  std::map<TokenId, Features> features;
  for (const auto& doc : data.corpus.documents()) {
    const Token* prev = nullptr;
    double prev_s = 0.0;
    for (const auto& sent : doc.sentences) {
      const auto& p = profile_for(data, sent.ref());
      for (std::size_t t = 0; t < sent.size(); ++t) {
        const auto& tok = sent.tokens[t];
        Features f{-p.s[t], data.unigram->log_prob(tok.lowercased), static_cast<double>(tok.char_len),
                   prev != nullptr, 0.0, 0.0, 0.0};
        if (prev) {
          f.prev_logprob = -prev_s;
          f.prev_unigram = data.unigram->log_prob(prev->lowercased);
          f.prev_char_len = static_cast<double>(prev->char_len);
        }
        features.emplace(tok.id(), f);
        prev = &tok;
        prev_s = p.s[t];
      }
    }
  }

  std::map<std::string, std::vector<double>> cols;
  for (const auto& r : data.reading) {
    if (!r.fixated) continue;
    const auto it = features.find(r.token);
    if (it == features.end()) throw InputError("reading time for unknown token " + r.token.to_string());
    const auto& f = it->second;
    if (!f.has_prev) {
      ++table.excluded;
      continue;
    }
    table.data.response.push_back(r.rt);
    table.data.groups.push_back(r.subject_id);
    table.sentences.push_back(r.token.sentence());
    table.tokens.push_back(r.token);
    cols["logprob"].push_back(f.logprob);
    cols["unigram"].push_back(f.unigram);
    cols["char_len"].push_back(f.char_len);
    cols["len_x_unigram"].push_back(f.char_len * f.unigram);
    cols["prev_logprob"].push_back(f.prev_logprob);
    cols["prev_unigram"].push_back(f.prev_unigram);
    cols["prev_char_len"].push_back(f.prev_char_len);
    cols["prev_len_x_unigram"].push_back(f.prev_char_len * f.prev_unigram);
  }
  if (table.data.rows() == 0) throw InputError("no fixated, non-initial words to analyse");
  for (auto& [name, values] : cols) table.data.add_column(name, std::move(values));
  return table;
}

// ---------------------------------------------------------------------------
// Reports

double to_paper_units(double nats) { return nats * 100.0; }
double from_paper_units(double value) { return value / 100.0; }

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json row_json(const ReportRow& r) {
  return json{{"dataset", r.dataset},
              {"predictor", r.predictor},
              {"k", r.k ? json(*r.k) : json(nullptr)},
              {"scope", r.scope},
              {"delta_loglik", number_or_null(r.delta_loglik)},
              {"se", number_or_null(r.se)},
              {"delta_loglik_1e-2", number_or_null(to_paper_units(r.delta_loglik))},
              {"se_1e-2", number_or_null(to_paper_units(r.se))},
              {"n", r.n},
              {"excluded", r.excluded},
              {"status", r.status},
              {"config_hash", r.config_hash},
              {"source", r.source},
              {"seed", r.seed}};
}

std::string tsv_number(double v) { return std::isfinite(v) ? tsv::format_double(v) : "NA"; }

}  // namespace

json to_json(const Report& report) {
  json rows = json::array();
  for (const auto& r : report.rows) rows.push_back(row_json(r));
  json out = report.extra;
  out["kind"] = report.kind;
  out["rows"] = std::move(rows);
  out["units"] = "nats per datapoint; *_1e-2 columns are in 10^-2 nats";
  return out;
}

void write_report_tsv(std::ostream& out, const Report& report) {
  out << "dataset\tpredictor\tk\tscope\tdelta_loglik\tse\tlower\tupper\tdelta_loglik_1e-2\tse_1e-2\tn\texcluded\t"
         "status\tconfig_hash\tsource\tseed\n";
  for (const auto& r : report.rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), '\t', ' ');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << r.dataset << '\t' << r.predictor << '\t' << (r.k ? format_k(*r.k) : "NA") << '\t' << r.scope << '\t'
        << tsv_number(r.delta_loglik) << '\t' << tsv_number(r.se) << '\t' << tsv_number(r.delta_loglik - r.se)
        << '\t' << tsv_number(r.delta_loglik + r.se) << '\t' << tsv_number(to_paper_units(r.delta_loglik)) << '\t'
        << tsv_number(to_paper_units(r.se)) << '\t' << r.n << '\t' << r.excluded << '\t' << status << '\t'
        << r.config_hash << '\t' << r.source << '\t' << r.seed << '\n';
  }
}

Provenance provenance(const ExperimentConfig& config, const ExperimentData& data) {
  return {config.hash(), data.source_tag, config.fold_seed()};
}

namespace {

template <typename T>
std::vector<T> run_parallel(const std::vector<std::function<T()>>& cells, int workers) {
  std::vector<T> out(cells.size());
  const auto threads = static_cast<std::size_t>(std::max(1, std::min<int>(workers, static_cast<int>(cells.size()))));
  if (threads <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) out[i] = cells[i]();
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cells.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        try {
          out[i] = cells[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

struct Cell {
  ReportRow row;
  std::vector<double> delta;
  std::vector<std::string> keys;  // per-row sentence key, for aggregation
};

std::string sentence_key(const SentenceRef& ref) { return ref.doc_id + "#" + std::to_string(ref.sent_idx); }

/// Compares table.baseline against baseline + `values` on the rows where the
/// predictor is defined.
Cell compare_cell(const AnalysisTable& table, const std::vector<std::optional<double>>& values,
                  const ExperimentConfig& config, ReportRow row) {
  Cell cell;
  std::vector<std::size_t> keep;
  std::vector<double> column;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i]) {
      keep.push_back(i);
      column.push_back(*values[i]);
    }
  }
  row.excluded = table.excluded + (values.size() - keep.size());
  Dataset subset = keep.size() == values.size() ? table.data : table.data.subset(keep);
  subset.add_column("uid", std::move(column));
  const auto augmented = table.baseline.with_predictor("uid");
  const auto cmp = compare_models(table.baseline, augmented, subset, config.folds, config.fold_seed());
  row.delta_loglik = cmp.mean;
  row.se = cmp.se;
  row.n = cmp.n();
  cell.delta = cmp.delta;
  for (auto i : keep) cell.keys.push_back(sentence_key(table.sentences[i]));
  cell.row = std::move(row);
  return cell;
}

std::function<Cell()> isolated(std::function<Cell()> body, ReportRow failed_row) {
  return [body = std::move(body), failed_row = std::move(failed_row)]() {
    try {
      return body();
    } catch (const std::exception& e) {
      Cell cell;
      cell.row = failed_row;
      cell.row.status = std::string("failed: ") + e.what();
      cell.row.delta_loglik = std::numeric_limits<double>::quiet_NaN();
      cell.row.se = std::numeric_limits<double>::quiet_NaN();
      return cell;
    }
  };
}

/// Sentence-level predictor per table row; nullopt where it is undefined.
std::vector<std::optional<double>> sentence_values(const AnalysisTable& table, const ExperimentData& data,
                                                   const MetricConfig& metric, bool raw_probability,
                                                   const std::map<std::string, double>& doc_means) {
  std::map<SentenceRef, std::optional<double>> cache;
  std::vector<std::optional<double>> out;
  out.reserve(table.sentences.size());
  for (const auto& ref : table.sentences) {
    auto it = cache.find(ref);
    if (it == cache.end()) {
      std::optional<double> v;
      MuContext ctx;
      ctx.language_mean = data.language_mean;
      if (const auto d = doc_means.find(ref.doc_id); d != doc_means.end()) ctx.document_mean = d->second;
      try {
        v = sentence_predictor(metric, profile_for(data, ref), ctx, raw_probability);
      } catch (const DomainError&) {
        v.reset();
      }
      it = cache.emplace(ref, v).first;
    }
    out.push_back(it->second);
  }
  return out;
}

std::string scope_label(const MetricConfig& m) {
  switch (m.kind) {
    case MetricKind::variance:
    case MetricKind::global_delta:
      return m.scope.name();
    default:
      return "sentence";
  }
}

std::vector<const AnalysisTable*> available(const std::optional<AnalysisTable>& acc,
                                            const std::optional<AnalysisTable>& rt) {
  std::vector<const AnalysisTable*> out;
  if (rt) out.push_back(&*rt);
  if (acc) out.push_back(&*acc);
  return out;
}

void sentence_tables(const ExperimentConfig& config, const ExperimentData& data, std::optional<AnalysisTable>& acc,
                     std::optional<AnalysisTable>& rt) {
  if (!data.acceptability.empty()) acc = acceptability_table(data, config.baseline);
  if (!data.reading.empty()) rt = sentence_rt_table(data, config.baseline);
  if (!acc && !rt) throw InputError("no reading times or acceptability labels to analyse");
}

ReportRow base_row(const Provenance& prov, const std::string& dataset, const std::string& predictor,
                   std::optional<double> k, const std::string& scope) {
  ReportRow row;
  row.dataset = dataset;
  row.predictor = predictor;
  row.k = k;
  row.scope = scope;
  row.config_hash = prov.config_hash;
  row.source = prov.source;
  row.seed = prov.seed;
  return row;
}

}  // namespace

std::vector<ReportRow> run_cells(const std::vector<std::function<ReportRow()>>& cells, int workers) {
  std::vector<std::function<ReportRow()>> wrapped;
  for (const auto& cell : cells) {
    wrapped.push_back([cell]() {
      try {
        return cell();
      } catch (const std::exception& e) {
        ReportRow row;
        row.status = std::string("failed: ") + e.what();
        row.delta_loglik = std::numeric_limits<double>::quiet_NaN();
        row.se = std::numeric_limits<double>::quiet_NaN();
        return row;
      }
    });
  }
  return run_parallel(wrapped, workers);
}

ModelComparison compare_predictor(const ExperimentConfig& config, const ExperimentData& data, Response response,
                                  const MetricConfig& metric) {
  metric.validate();
  AnalysisTable table;
  switch (response) {
    case Response::sentence_rt: table = sentence_rt_table(data, config.baseline); break;
    case Response::acceptability: table = acceptability_table(data, config.baseline); break;
    case Response::word_rt: throw InputError("word_rt comparisons go through the window sweep");
  }
  const auto values = sentence_values(table, data, metric, config.raw_probability,
                                      document_means(data.corpus, data.profiles));
  std::vector<std::size_t> keep;
  std::vector<double> column;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i]) {
      keep.push_back(i);
      column.push_back(*values[i]);
    }
  }
  Dataset subset = table.data.subset(keep);
  subset.add_column("uid", std::move(column));
  return compare_models(table.baseline, table.baseline.with_predictor("uid"), subset, config.folds,
                        config.fold_seed());
}

Report run_k_sweep(const ExperimentConfig& config, const ExperimentData& data) {
  config.validate();
  std::optional<AnalysisTable> acc, rt;
  sentence_tables(config, data, acc, rt);
  const auto prov = provenance(config, data);
  const auto doc_means = document_means(data.corpus, data.profiles);

  std::vector<std::function<Cell()>> cells;
  const auto tables = available(acc, rt);
  for (const auto* table : tables) {
    for (double k : config.k_grid) {
      MetricConfig metric;
      metric.kind = MetricKind::super_linear;
      metric.k = k;
      const auto row = base_row(prov, to_string(table->response), metric.label(), k, "sentence");
      cells.push_back(isolated(
          [table, metric, row, &config, &data, &doc_means]() {
            return compare_cell(*table, sentence_values(*table, data, metric, config.raw_probability, doc_means),
                                config, row);
          },
          row));
    }
  }
  const auto results = run_parallel(cells, config.workers);

  Report report;
  report.kind = "k_sweep";
  for (const auto& c : results) report.rows.push_back(c.row);

  // Paired t-tests of every k > 1 against k = 1, on sentence-level means.
  json tests = json::array();
  const auto& grid = config.k_grid;
  const auto one = std::find(grid.begin(), grid.end(), 1.0);
  const auto m = static_cast<int>(std::count_if(grid.begin(), grid.end(), [](double k) { return k > 1.0; }));
  for (std::size_t t = 0; t < tables.size(); ++t) {
    json peak = nullptr;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& r = results[t * grid.size() + i].row;
      if (r.ok() && r.delta_loglik > best) {
        best = r.delta_loglik;
        peak = grid[i];
      }
    }
    report.extra["peak_k"][to_string(tables[t]->response)] = peak;
    if (one == grid.end() || m == 0) continue;
    const auto& base = results[t * grid.size() + static_cast<std::size_t>(one - grid.begin())];
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!(grid[i] > 1.0)) continue;
      const auto& cell = results[t * grid.size() + i];
      json entry{{"dataset", to_string(tables[t]->response)}, {"k", grid[i]}, {"versus_k", 1.0},
                 {"comparisons", m}};
      try {
        if (!cell.row.ok() || !base.row.ok()) throw DomainError("comparison cell failed");
        if (cell.keys != base.keys) throw DomainError("rows differ between k and k=1");
        const auto a = aggregate_means(cell.delta, cell.keys);
        const auto b = aggregate_means(base.delta, base.keys);
        const auto res = paired_ttest(a, b, m);
        entry.update(json{{"t", res.t}, {"dof", res.dof}, {"p", res.p}, {"threshold", res.threshold},
                          {"significant", res.significant}, {"mean_difference", res.mean_difference},
                          {"n", a.size()}, {"status", "ok"}});
      } catch (const std::exception& e) {
        entry["status"] = std::string("failed: ") + e.what();
      }
      tests.push_back(entry);
    }
  }
  report.extra["ttests"] = tests;
  report.extra["alpha"] = 0.001;
  return report;
}

Report run_operationalization_table(const ExperimentConfig& config, const ExperimentData& data) {
  config.validate();
  std::optional<AnalysisTable> acc, rt;
  sentence_tables(config, data, acc, rt);
  const auto prov = provenance(config, data);
  const auto doc_means = document_means(data.corpus, data.profiles);

  std::vector<MetricConfig> metrics;
  for (double k : config.table_k_grid) {
    MetricConfig m;
    m.kind = MetricKind::super_linear;
    m.k = k;
    metrics.push_back(m);
  }
  for (auto scope : {MuScope::language(), MuScope::sentence()}) {
    MetricConfig m;
    m.kind = MetricKind::variance;
    m.scope = scope;
    metrics.push_back(m);
  }
  metrics.push_back({MetricKind::local_variance});
  metrics.push_back({MetricKind::max});
  for (double k : config.entropy_k_grid) {
    MetricConfig m;
    m.kind = MetricKind::entropy;
    m.k = k;
    metrics.push_back(m);
  }

  std::vector<std::function<Cell()>> cells;
  for (const auto* table : available(acc, rt)) {
    for (const auto& metric : metrics) {
      const bool has_k = metric.kind == MetricKind::super_linear || metric.kind == MetricKind::entropy;
      const auto row = base_row(prov, to_string(table->response), metric.label(),
                                has_k ? std::optional<double>(metric.k) : std::nullopt, scope_label(metric));
      cells.push_back(isolated(
          [table, metric, row, &config, &data, &doc_means]() {
            return compare_cell(*table, sentence_values(*table, data, metric, config.raw_probability, doc_means),
                                config, row);
          },
          row));
    }
  }
  Report report;
  report.kind = "operationalization_table";
  for (auto& c : run_parallel(cells, config.workers)) report.rows.push_back(std::move(c.row));
  return report;
}

Report run_window_sweep(const ExperimentConfig& config, const ExperimentData& data) {
  config.validate();
  const auto table = word_rt_table(data);
  const auto prov = provenance(config, data);

  std::vector<MuScope> scopes;
  for (int w : config.windows) scopes.push_back(MuScope::previous(w));
  scopes.push_back(MuScope::all_previous());
  scopes.push_back(MuScope::sentence());
  scopes.push_back(MuScope::document());
  scopes.push_back(MuScope::language());

  // Word-level values per scope, keyed by token.
  std::vector<std::map<TokenId, WordMetric>> per_scope(scopes.size());
  for (std::size_t i = 0; i < scopes.size(); ++i) {
    for (const auto& doc : data.corpus.documents()) {
      std::vector<std::vector<double>> sents;
      for (const auto& sent : doc.sentences) sents.push_back(profile_for(data, sent.ref()).s);
      const auto values = word_variances(sents, scopes[i], data.language_mean);
      std::size_t pos = 0;
      for (const auto& sent : doc.sentences) {
        for (const auto& tok : sent.tokens) per_scope[i][tok.id()] = values[pos++];
      }
    }
  }
  // Common row set: rows usable under every scope.
  std::vector<std::size_t> keep;
  json excluded_by_scope = json::object();
  std::vector<std::size_t> excluded_counts(scopes.size(), 0);
  for (std::size_t r = 0; r < table.tokens.size(); ++r) {
    bool ok = true;
    for (std::size_t i = 0; i < scopes.size(); ++i) {
      if (per_scope[i].at(table.tokens[r]).excluded) {
        ++excluded_counts[i];
        ok = false;
      }
    }
    if (ok) keep.push_back(r);
  }
  for (std::size_t i = 0; i < scopes.size(); ++i) {
    excluded_by_scope[scopes[i].name()] = excluded_counts[i] + table.excluded;
  }

  std::vector<std::function<Cell()>> cells;
  for (std::size_t i = 0; i < scopes.size(); ++i) {
    const auto row = base_row(prov, "word_rt", "word_variance[" + scopes[i].name() + "]", std::nullopt,
                              scopes[i].name());
    cells.push_back(isolated(
        [&, i, row]() {
          std::vector<std::optional<double>> values(table.tokens.size());
          for (auto r : keep) values[r] = per_scope[i].at(table.tokens[r]).value;
          return compare_cell(table, values, config, row);
        },
        row));
  }
  Report report;
  report.kind = "window_sweep";
  for (auto& c : run_parallel(cells, config.workers)) report.rows.push_back(std::move(c.row));
  report.extra["excluded_by_scope"] = excluded_by_scope;
  report.extra["language_mean"] = data.language_mean;
  report.extra["language_mean_source"] = data.language_mean_source;
  json ranking = json::array();
  std::vector<const ReportRow*> order;
  for (const auto& r : report.rows) {
    if (r.ok()) order.push_back(&r);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const ReportRow* a, const ReportRow* b) { return a->delta_loglik > b->delta_loglik; });
  for (const auto* r : order) ranking.push_back(r->scope);
  report.extra["ranking"] = ranking;
  return report;
}

Report run_correlation_figure(const ExperimentConfig& config, const ExperimentData& data) {
  config.validate();
  if (data.acceptability.empty()) throw InputError("correlation figure needs acceptability labels");
  const auto prov = provenance(config, data);
  std::vector<const SurprisalProfile*> profiles;
  std::vector<double> scores;
  for (const auto& r : data.acceptability) {
    profiles.push_back(&profile_for(data, r.sentence));
    scores.push_back(r.rescaled());
  }
  Report report;
  report.kind = "correlation";
  json points = json::array();
  double best = -1.0;
  json peak = nullptr;
  for (double k : config.k_grid) {
    std::vector<double> x;
    x.reserve(profiles.size());
    for (const auto* p : profiles) {
      double total = 0.0;
      for (double v : p->s) total += std::pow(v, k);
      x.push_back(-total);
    }
    json point{{"k", k}, {"n", x.size()}};
    try {
      const double r = correlate(x, scores, config.correlation);
      point["r"] = r;
      point["status"] = "ok";
      if (std::abs(r) > best) {
        best = std::abs(r);
        peak = k;
      }
    } catch (const std::exception& e) {
      point["r"] = nullptr;
      point["status"] = std::string("failed: ") + e.what();
    }
    points.push_back(point);
  }
  report.extra["points"] = points;
  report.extra["peak_abs_r_k"] = peak;
  report.extra["method"] = config.correlation == CorrelationMethod::pearson ? "pearson" : "spearman";
  report.extra["config_hash"] = prov.config_hash;
  report.extra["source"] = prov.source;
  report.extra["seed"] = prov.seed;
  return report;
}

// ---------------------------------------------------------------------------
// Hashing and manifest

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  return hex(digest, len);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "' for hashing");
  std::stringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

Manifest::Manifest(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

void Manifest::write(const std::string& name, const std::string& content) {
  const auto path = dir_ / name;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << content;
  out.close();
  if (!out) throw InputError("failed writing '" + path.string() + "'");
  add(name);
}

void Manifest::add(const std::string& name) {
  if (!std::filesystem::exists(dir_ / name)) throw InputError("artifact '" + name + "' does not exist");
  if (std::find(names_.begin(), names_.end(), name) == names_.end()) names_.push_back(name);
}

void Manifest::finish() const {
  const auto path = dir_ / "MANIFEST.json";
  json manifest = json::object();
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    try {
      in >> manifest;
    } catch (const json::exception&) {
      manifest = json::object();
    }
  }
  std::map<std::string, json> artifacts;
  if (manifest.contains("artifacts")) {
    for (const auto& a : manifest["artifacts"]) {
      const auto name = a.value("path", std::string());
      if (!name.empty() && std::filesystem::exists(dir_ / name)) artifacts[name] = a;
    }
  }
  for (const auto& name : names_) {
    const auto file = dir_ / name;
    artifacts[name] = json{{"path", name}, {"sha256", sha256_file(file)}, {"bytes", std::filesystem::file_size(file)}};
  }
  json list = json::array();
  for (auto& [name, entry] : artifacts) list.push_back(entry);
  manifest["artifacts"] = list;
  for (const auto& [key, value] : meta_.items()) manifest[key] = value;
  std::ofstream out(path);
  out << manifest.dump(2) << '\n';
}

}  // namespace uidkit::pipeline
