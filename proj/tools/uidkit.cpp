// uidkit command-line driver.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "uidkit/corpus.hpp"
#include "uidkit/effort.hpp"
#include "uidkit/error.hpp"
#include "uidkit/ngram_lm.hpp"
#include "uidkit/pipeline.hpp"
#include "uidkit/synthetic.hpp"
#include "uidkit/tsv.hpp"
#include "uidkit/uid_metrics.hpp"

using namespace uidkit;
using nlohmann::json;

namespace {

// Command-line values that override (or stand in for) the config file.
struct Overrides {
  std::string config_path;
  std::optional<std::string> corpus, lm_corpus, reference_corpus, reading_times, acceptability, external;
  std::optional<std::string> baseline, correlation, output_dir;
  std::optional<double> language_mean;
  std::optional<int> order, unk_threshold, folds, workers;
  std::optional<std::uint64_t> seed;
  std::vector<double> k_grid, table_k_grid, entropy_k_grid;
  std::vector<int> windows;
  bool raw_probability = false;
  bool keep_outliers = false;
};

void add_config_options(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config_path, "JSON experiment config");
  sub->add_option("--corpus", o.corpus, "analysis corpus (.tsv, .lines or raw text)");
  sub->add_option("--lm-corpus", o.lm_corpus, "LM training corpus (default: the analysis corpus)");
  sub->add_option("--reference-corpus", o.reference_corpus, "corpus for the language-level mean");
  sub->add_option("--language-mean", o.language_mean, "language-level mean surprisal in nats");
  sub->add_option("--reading-times", o.reading_times, "word reading-time TSV");
  sub->add_option("--acceptability", o.acceptability, "acceptability TSV");
  sub->add_option("--order", o.order, "n-gram order (selects the n-gram source)");
  sub->add_option("--unk-threshold", o.unk_threshold, "n-gram <unk> count threshold");
  sub->add_option("--external-surprisals", o.external, "surprisal exchange TSV (selects the external source)");
  sub->add_option("--k-grid", o.k_grid, "exponents for sweeps")->delimiter(',');
  sub->add_option("--table-k-grid", o.table_k_grid, "super-linear exponents in the table")->delimiter(',');
  sub->add_option("--entropy-k-grid", o.entropy_k_grid, "entropy orders in the table")->delimiter(',');
  sub->add_option("--windows", o.windows, "previous-word window sizes")->delimiter(',');
  sub->add_option("--folds", o.folds, "cross-validation folds");
  sub->add_option("--seed", o.seed, "fold seed");
  sub->add_option("--baseline", o.baseline, "main or extended");
  sub->add_flag("--raw-probability", o.raw_probability, "super-linear predictor on negative raw probabilities");
  sub->add_flag("--keep-outliers", o.keep_outliers, "skip reading-time outlier removal");
  sub->add_option("--correlation", o.correlation, "pearson or spearman");
  sub->add_option("--workers", o.workers, "concurrent sweep cells");
  sub->add_option("-o,--output-dir", o.output_dir, "output directory");
}

pipeline::ExperimentConfig resolve_config(const Overrides& o) {
  json j = json{{"schema_version", pipeline::kConfigSchemaVersion}};
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw InputError("cannot open config '" + o.config_path + "'");
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw InputError("config '" + o.config_path + "' is not valid JSON: " + e.what());
    }
    pipeline::resolve_config_paths(j, std::filesystem::path(o.config_path).parent_path());
  }
  auto set = [&j](const char* key, const auto& value) {
    if (value) j[key] = *value;
  };
  set("corpus", o.corpus);
  set("lm_corpus", o.lm_corpus);
  set("reference_corpus", o.reference_corpus);
  set("language_mean", o.language_mean);
  set("reading_times", o.reading_times);
  set("acceptability", o.acceptability);
  set("folds", o.folds);
  set("seed", o.seed);
  set("baseline", o.baseline);
  set("correlation", o.correlation);
  set("workers", o.workers);
  set("output_dir", o.output_dir);
  if (!o.k_grid.empty()) j["k_grid"] = o.k_grid;
  if (!o.table_k_grid.empty()) j["table_k_grid"] = o.table_k_grid;
  if (!o.entropy_k_grid.empty()) j["entropy_k_grid"] = o.entropy_k_grid;
  if (!o.windows.empty()) j["windows"] = o.windows;
  if (o.raw_probability) j["raw_probability"] = true;
  if (o.keep_outliers) j["remove_outliers"] = false;
  if (o.external) {
    j["external_surprisals"] = *o.external;
    j["ngram"] = nullptr;
  }
  if (o.order || o.unk_threshold) {
    json n = j.contains("ngram") && j["ngram"].is_object() ? j["ngram"] : json::object();
    if (o.order) n["order"] = *o.order;
    if (o.unk_threshold) n["unk_threshold"] = *o.unk_threshold;
    j["ngram"] = n;
    if (!o.external) j.erase("external_surprisals");
  }
  return pipeline::ExperimentConfig::from_json(j);
}

Corpus read_corpus(const std::string& path, const std::string& format) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus '" + path + "'");
  std::string fmt = format;
  if (fmt == "auto") {
    const auto ext = std::filesystem::path(path).extension();
    fmt = ext == ".tsv" ? "tsv" : ext == ".lines" ? "lines" : "raw";
  }
  if (fmt == "tsv") return read_corpus_tsv(in, path);
  std::stringstream buf;
  buf << in.rdbuf();
  if (fmt == "lines") return from_sentence_lines(buf.str());
  if (fmt == "raw") return tokenize(buf.str());
  throw InputError("unknown corpus format '" + format + "' (auto, raw, lines, tsv)");
}

std::string corpus_tsv(const Corpus& c) {
  std::ostringstream out;
  write_corpus_tsv(out, c);
  return out.str();
}

std::string readings_tsv(const std::vector<ReadingRecord>& r) {
  std::ostringstream out;
  write_reading_times_tsv(out, r);
  return out.str();
}

void emit_report(pipeline::Manifest& manifest, const std::string& name, const pipeline::Report& report) {
  manifest.write(name + ".json", pipeline::to_json(report).dump(2) + "\n");
  if (!report.rows.empty()) {
    std::ostringstream tsv;
    pipeline::write_report_tsv(tsv, report);
    manifest.write(name + ".tsv", tsv.str());
  }
}

pipeline::Manifest config_manifest(const pipeline::ExperimentConfig& config, const std::string& command) {
  pipeline::Manifest manifest(config.output_dir);
  manifest.write("config." + command + ".json", config.to_json().dump(2) + "\n");
  manifest.set("config_hash", config.hash());
  return manifest;
}

void print_rows(const pipeline::Report& report) {
  for (const auto& r : report.rows) {
    std::printf("%-14s %-32s %12s %10s  %s\n", r.dataset.c_str(), r.predictor.c_str(),
                r.ok() ? tsv::format_double(pipeline::to_paper_units(r.delta_loglik)).substr(0, 10).c_str() : "NA",
                r.ok() ? tsv::format_double(pipeline::to_paper_units(r.se)).substr(0, 8).c_str() : "NA",
                r.status.c_str());
  }
}

// --- subcommands -----------------------------------------------------------

struct IngestArgs {
  std::string input, format = "auto", reading_times, acceptability, output_dir = "out";
  bool keep_outliers = false;
};

int run_ingest(const IngestArgs& a) {
  const Corpus corpus = read_corpus(a.input, a.format);
  pipeline::Manifest manifest(a.output_dir);
  manifest.write("corpus.tsv", corpus_tsv(corpus));
  json summary{{"documents", corpus.documents().size()},
               {"sentences", corpus.sentence_count()},
               {"tokens", corpus.token_count()}};
  if (!a.reading_times.empty()) {
    std::ifstream in(a.reading_times);
    if (!in) throw InputError("cannot open reading times '" + a.reading_times + "'");
    auto records = read_reading_times_tsv(in, a.reading_times);
    OutlierResult outliers;
    if (a.keep_outliers) {
      outliers.kept = records;
    } else {
      outliers = remove_outliers(records);
    }
    manifest.write("reading_times.tsv", readings_tsv(outliers.kept));
    std::ostringstream dropped;
    dropped << "subject_id\tdoc_id\tsent_idx\n";
    for (const auto& d : outliers.dropped) {
      dropped << d.subject_id << '\t' << d.sentence.doc_id << '\t' << d.sentence.sent_idx << '\n';
    }
    manifest.write("dropped_pairs.tsv", dropped.str());
    const auto table = aggregate_sentence_rts(outliers.kept);
    std::ostringstream srt;
    srt << "subject_id\tdoc_id\tsent_idx\ttotal_rt\tfixated_count\n";
    for (const auto& r : table.rows) {
      srt << r.subject_id << '\t' << r.sentence.doc_id << '\t' << r.sentence.sent_idx << '\t'
          << tsv::format_double(r.total_rt) << '\t' << r.fixated_count << '\n';
    }
    manifest.write("sentence_rt.tsv", srt.str());
    summary["reading_records"] = records.size();
    summary["outlier_words"] = outliers.outlier_words;
    summary["dropped_pairs"] = outliers.dropped.size();
    summary["no_fixation_pairs"] = table.no_fixations.size();
  }
  if (!a.acceptability.empty()) {
    std::ifstream in(a.acceptability);
    if (!in) throw InputError("cannot open acceptability '" + a.acceptability + "'");
    const auto labels = read_acceptability_tsv(in, a.acceptability);
    for (const auto& r : labels) {
      if (!corpus.find(r.sentence)) {
        throw InputError("acceptability label for unknown sentence (" + r.sentence.doc_id + ", s" +
                         std::to_string(r.sentence.sent_idx) + ")");
      }
    }
    summary["acceptability_labels"] = labels.size();
  }
  manifest.write("ingest.json", summary.dump(2) + "\n");
  manifest.finish();
  std::cout << summary.dump() << "\n";
  return 0;
}

struct TrainArgs {
  std::string corpus, format = "auto", heldout, output_dir = "out";
  int order = 5, unk_threshold = 1;
};

int run_train(const TrainArgs& a) {
  const Corpus corpus = read_corpus(a.corpus, a.format);
  const auto model = NGramModel::train(corpus, a.order, a.unk_threshold);
  pipeline::Manifest manifest(a.output_dir);
  std::ostringstream dump;
  model.save(dump);
  manifest.write("model.ngram", dump.str());
  json info{{"order", model.order()}, {"unk_threshold", model.unk_threshold()}, {"vocab_size", model.vocab_size()},
            {"fallback_discount", model.used_fallback_discount()}};
  json discounts = json::array();
  for (int n = 1; n <= model.order(); ++n) {
    const auto& d = model.discounts(n);
    discounts.push_back({{"n", n}, {"d1", d.d1}, {"d2", d.d2}, {"d3plus", d.d3plus}, {"fallback", d.fallback}});
  }
  info["discounts"] = discounts;
  if (!a.heldout.empty()) info["heldout_perplexity"] = perplexity(model, read_corpus(a.heldout, a.format));
  manifest.write("lm.json", info.dump(2) + "\n");
  manifest.finish();
  std::cout << info.dump() << "\n";
  return 0;
}

struct SurpriseArgs {
  std::string model, corpus, format = "auto", tag, output_dir = "out";
};

int run_surprise(const SurpriseArgs& a) {
  std::ifstream in(a.model);
  if (!in) throw InputError("cannot open model '" + a.model + "'");
  const auto model = NGramModel::load(in);
  const Corpus corpus = read_corpus(a.corpus, a.format);
  const auto profiles = surprisals(model, corpus);
  const std::string tag = a.tag.empty() ? "ngram-o" + std::to_string(model.order()) : a.tag;
  pipeline::Manifest manifest(a.output_dir);
  std::ostringstream out;
  write_surprisal_tsv(out, corpus, profiles, tag);
  manifest.write("surprisals.tsv", out.str());
  manifest.finish();
  return 0;
}

int run_metrics(const pipeline::ExperimentConfig& config, bool word_level) {
  const auto data = pipeline::load_experiment(config);
  auto manifest = config_manifest(config, "metrics");
  const auto doc_means = pipeline::document_means(data.corpus, data.profiles);

  std::vector<MetricConfig> metrics;
  for (double k : config.k_grid) metrics.push_back({MetricKind::super_linear, k});
  for (auto scope : {MuScope::sentence(), MuScope::document(), MuScope::language()}) {
    metrics.push_back({MetricKind::variance, 1.0, scope});
  }
  metrics.push_back({MetricKind::local_variance});
  metrics.push_back({MetricKind::max});
  for (double k : config.entropy_k_grid) metrics.push_back({MetricKind::entropy, k});
  for (auto d : {DeltaKind::squared, DeltaKind::absolute}) {
    metrics.push_back({MetricKind::global_delta, 1.0, MuScope::sentence(), d});
    metrics.push_back({MetricKind::local_delta, 1.0, MuScope::sentence(), d});
  }

  auto has_k = [](const MetricConfig& m) {
    return m.kind == MetricKind::super_linear || m.kind == MetricKind::entropy;
  };
  std::ostringstream out;
  out << "doc_id\tsent_idx\tmetric_kind\tk\tmu_scope\tdelta\tvalue\texcluded\n";
  for (const auto* sent : data.corpus.sentences()) {
    const auto& p = data.profiles.at(sent->ref());
    MuContext ctx;
    ctx.language_mean = data.language_mean;
    ctx.document_mean = doc_means.at(sent->doc_id);
    for (const auto& m : metrics) {
      std::string value = "NA";
      int excluded = 0;
      try {
        value = tsv::format_double(compute_metric(m, p.s, ctx));
      } catch (const DomainError&) {
        excluded = 1;
      }
      out << sent->doc_id << '\t' << sent->sent_idx << '\t' << to_string(m.kind) << '\t'
          << (has_k(m) ? tsv::format_double(m.k) : "NA") << '\t' << m.scope.name() << '\t' << to_string(m.delta)
          << '\t' << value << '\t' << excluded << '\n';
    }
  }
  manifest.write("metrics.tsv", out.str());

  if (word_level) {
    std::vector<MuScope> scopes;
    for (int w : config.windows) scopes.push_back(MuScope::previous(w));
    for (auto s : {MuScope::all_previous(), MuScope::sentence(), MuScope::document(), MuScope::language()}) {
      scopes.push_back(s);
    }
    std::ostringstream words;
    words << "doc_id\tsent_idx\ttok_idx\tmetric_kind\tk\tmu_scope\tdelta\tvalue\texcluded\n";
    for (const auto& doc : data.corpus.documents()) {
      std::vector<std::vector<double>> sents;
      for (const auto& s : doc.sentences) sents.push_back(data.profiles.at(s.ref()).s);
      for (const auto& scope : scopes) {
        const auto values = word_variances(sents, scope, data.language_mean);
        std::size_t pos = 0;
        for (const auto& s : doc.sentences) {
          for (const auto& t : s.tokens) {
            const auto& v = values[pos++];
            words << doc.id << '\t' << s.sent_idx << '\t' << t.tok_idx << "\tword_variance\tNA\t" << scope.name()
                  << "\tsquared\t" << (v.excluded ? "NA" : tsv::format_double(v.value)) << '\t'
                  << (v.excluded ? 1 : 0) << '\n';
          }
        }
      }
    }
    manifest.write("word_metrics.tsv", words.str());
  }
  manifest.finish();
  return 0;
}

int run_compare(const pipeline::ExperimentConfig& config, const std::string& response, const std::string& predictor) {
  const auto data = pipeline::load_experiment(config);
  const auto metric = pipeline::parse_metric(predictor);
  const auto cmp = pipeline::compare_predictor(config, data, pipeline::parse_response(response), metric);
  auto spec_json = [](const ModelSpec& s) {
    return json{{"response", s.response},
                {"fixed_effects", s.fixed_effects},
                {"random_effects", s.random_effects},
                {"family", s.family == Family::gaussian ? "gaussian" : "bernoulli"}};
  };
  json j{{"response", response},
         {"predictor", metric.label()},
         {"baseline", spec_json(cmp.baseline)},
         {"augmented", spec_json(cmp.augmented)},
         {"delta_loglik", cmp.mean},
         {"se", cmp.se},
         {"delta_loglik_1e-2", pipeline::to_paper_units(cmp.mean)},
         {"se_1e-2", pipeline::to_paper_units(cmp.se)},
         {"n", cmp.n()},
         {"fold_means", cmp.fold_means},
         {"config_hash", config.hash()},
         {"source", data.source_tag},
         {"seed", config.fold_seed()}};
  auto manifest = config_manifest(config, "compare");
  manifest.write("comparison.json", j.dump(2) + "\n");
  std::ostringstream folds;
  folds << "row\tfold\tbaseline_ll\taugmented_ll\tdelta\n";
  for (std::size_t i = 0; i < cmp.n(); ++i) {
    folds << i << '\t' << cmp.folds[i] << '\t' << tsv::format_double(cmp.baseline_ll[i]) << '\t'
          << tsv::format_double(cmp.augmented_ll[i]) << '\t' << tsv::format_double(cmp.delta[i]) << '\n';
  }
  manifest.write("folds.tsv", folds.str());
  manifest.finish();
  std::printf("%s  dLL = %.6g +/- %.3g (1e-2 nats), n = %zu\n", metric.label().c_str(),
              pipeline::to_paper_units(cmp.mean), pipeline::to_paper_units(cmp.se), cmp.n());
  return 0;
}

int run_report(const pipeline::ExperimentConfig& config, const std::string& command) {
  const auto data = pipeline::load_experiment(config);
  pipeline::Report report;
  std::string name;
  if (command == "sweep-k") {
    report = pipeline::run_k_sweep(config, data);
    name = "k_sweep";
  } else if (command == "sweep-window") {
    report = pipeline::run_window_sweep(config, data);
    name = "window_sweep";
  } else if (command == "table") {
    report = pipeline::run_operationalization_table(config, data);
    name = "table";
  } else {
    report = pipeline::run_correlation_figure(config, data);
    name = "correlation";
  }
  auto manifest = config_manifest(config, name);
  emit_report(manifest, name, report);
  if (command == "correlate") {
    std::ostringstream tsv;
    tsv << "k\tr\tn\tstatus\n";
    for (const auto& p : report.extra.at("points")) {
      tsv << tsv::format_double(p.at("k").get<double>()) << '\t'
          << (p.at("r").is_null() ? "NA" : tsv::format_double(p.at("r").get<double>())) << '\t'
          << p.at("n").get<std::size_t>() << '\t' << p.at("status").get<std::string>() << '\n';
    }
    manifest.write("correlation.tsv", tsv.str());
    std::cout << report.extra.at("points").dump() << "\n";
  } else {
    print_rows(report);
  }
  manifest.finish();
  return 0;
}

struct TheoryArgs {
  std::uint64_t seed = 1;
  std::size_t draws = 100, trials = 1000;
  std::string output_dir = "out";
};

int run_theory(const TheoryArgs& a) {
  const auto report = theory_check_report(a.seed, a.draws, a.trials);
  pipeline::Manifest manifest(a.output_dir);
  manifest.write("theory_check.json", report.dump(2) + "\n");
  manifest.finish();
  for (const char* key : {"uniform_minimizer", "jensen_bound", "uniform_maximizer", "optimal_length", "convex_in_length"}) {
    std::printf("%-18s %s\n", key, report.at(key).at("passed").get<bool>() ? "pass" : "FAIL");
  }
  return report.at("passed").get<bool>() ? 0 : 1;
}

struct SynthArgs {
  std::uint64_t seed = 1;
  std::size_t documents = 30, sentences_per_document = 30;
  std::string output_dir = "synthetic";
};

int run_synth(const SynthArgs& a) {
  synthetic::StudyOptions opts;
  opts.documents = a.documents;
  opts.sentences_per_document = a.sentences_per_document;
  const auto study = synthetic::make_study(a.seed, opts);
  pipeline::Manifest manifest(a.output_dir);
  manifest.write("corpus.tsv", corpus_tsv(study.corpus));
  manifest.write("lm_corpus.tsv", corpus_tsv(study.lm_corpus));
  manifest.write("reference_corpus.tsv", corpus_tsv(study.reference_corpus));
  manifest.write("reading_times.tsv", readings_tsv(study.sentence_reading));
  manifest.write("word_reading_times.tsv", readings_tsv(study.word_reading));
  std::ostringstream acc;
  acc << "doc_id\tsent_idx\tlabel\tscheme\n";
  for (const auto& r : study.acceptability) {
    acc << r.sentence.doc_id << '\t' << r.sentence.sent_idx << '\t' << r.label << "\tbinary\n";
  }
  manifest.write("acceptability.tsv", acc.str());
  const json base{{"schema_version", pipeline::kConfigSchemaVersion},
                  {"corpus", "corpus.tsv"},
                  {"lm_corpus", "lm_corpus.tsv"},
                  {"reference_corpus", "reference_corpus.tsv"},
                  {"ngram", {{"order", opts.order}, {"unk_threshold", 1}}},
                  {"seed", a.seed},
                  {"output_dir", "results"}};
  json sentence = base;
  sentence["reading_times"] = "reading_times.tsv";
  sentence["acceptability"] = "acceptability.tsv";
  json word = base;
  word["reading_times"] = "word_reading_times.tsv";
  word["output_dir"] = "results_word";
  manifest.write("config.json", sentence.dump(2) + "\n");
  manifest.write("config_word.json", word.dump(2) + "\n");
  manifest.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uidkit: uniform information density analysis toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "tokenize a corpus and preprocess psychometric data");
  c_ingest->add_option("input", ingest.input, "corpus file")->required();
  c_ingest->add_option("--format", ingest.format, "auto, raw, lines or tsv");
  c_ingest->add_option("--reading-times", ingest.reading_times, "word reading-time TSV");
  c_ingest->add_option("--acceptability", ingest.acceptability, "acceptability TSV");
  c_ingest->add_flag("--keep-outliers", ingest.keep_outliers, "skip outlier removal");
  c_ingest->add_option("-o,--output-dir", ingest.output_dir, "output directory");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train-lm", "train a Kneser-Ney n-gram model");
  c_train->add_option("corpus", train.corpus, "training corpus")->required();
  c_train->add_option("--format", train.format, "auto, raw, lines or tsv");
  c_train->add_option("--order", train.order, "n-gram order (1-5)");
  c_train->add_option("--unk-threshold", train.unk_threshold, "types seen fewer times become <unk>");
  c_train->add_option("--heldout", train.heldout, "held-out corpus for perplexity");
  c_train->add_option("-o,--output-dir", train.output_dir, "output directory");

  SurpriseArgs surprise;
  auto* c_surprise = app.add_subcommand("surprise", "write per-word surprisals in the exchange format");
  c_surprise->add_option("--model", surprise.model, "model dump from train-lm")->required();
  c_surprise->add_option("corpus", surprise.corpus, "corpus to score")->required();
  c_surprise->add_option("--format", surprise.format, "auto, raw, lines or tsv");
  c_surprise->add_option("--tag", surprise.tag, "model tag for the header line");
  c_surprise->add_option("-o,--output-dir", surprise.output_dir, "output directory");

  Overrides metrics_o, compare_o, sweep_o, window_o, table_o, corr_o;
  bool word_level = false;
  auto* c_metrics = app.add_subcommand("metrics", "UID metrics per sentence (and per word)");
  add_config_options(c_metrics, metrics_o);
  c_metrics->add_flag("--word", word_level, "also write word-level variances");

  std::string response = "acceptability", predictor = "super_linear:k=1.5";
  auto* c_compare = app.add_subcommand("compare", "cross-validated dLogLik for one predictor");
  add_config_options(c_compare, compare_o);
  c_compare->add_option("--response", response, "sentence_rt or acceptability");
  c_compare->add_option("--predictor", predictor, "e.g. super_linear:k=1.5, variance:language, max");

  auto* c_sweep = app.add_subcommand("sweep-k", "dLogLik of the super-linear predictor over the k grid");
  add_config_options(c_sweep, sweep_o);
  auto* c_window = app.add_subcommand("sweep-window", "word-level dLogLik over variance scopes");
  add_config_options(c_window, window_o);
  auto* c_table = app.add_subcommand("table", "dLogLik for every operationalization");
  add_config_options(c_table, table_o);
  auto* c_corr = app.add_subcommand("correlate", "correlation of -sum s^k with acceptability over k");
  add_config_options(c_corr, corr_o);

  TheoryArgs theory;
  auto* c_theory = app.add_subcommand("theory-check", "randomized checks of the effort-model theorems");
  c_theory->add_option("--seed", theory.seed, "seed");
  c_theory->add_option("--draws", theory.draws, "parameter draws per property");
  c_theory->add_option("--trials", theory.trials, "random profiles per draw");
  c_theory->add_option("-o,--output-dir", theory.output_dir, "output directory");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic study with planted effects");
  c_synth->add_option("--seed", synth.seed, "seed");
  c_synth->add_option("--documents", synth.documents, "documents in the analysis corpus");
  c_synth->add_option("--sentences-per-document", synth.sentences_per_document, "sentences per document");
  c_synth->add_option("-o,--output-dir", synth.output_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_ingest->parsed()) return run_ingest(ingest);
    if (c_train->parsed()) return run_train(train);
    if (c_surprise->parsed()) return run_surprise(surprise);
    if (c_metrics->parsed()) return run_metrics(resolve_config(metrics_o), word_level);
    if (c_compare->parsed()) return run_compare(resolve_config(compare_o), response, predictor);
    if (c_sweep->parsed()) return run_report(resolve_config(sweep_o), "sweep-k");
    if (c_window->parsed()) return run_report(resolve_config(window_o), "sweep-window");
    if (c_table->parsed()) return run_report(resolve_config(table_o), "table");
    if (c_corr->parsed()) return run_report(resolve_config(corr_o), "correlate");
    if (c_theory->parsed()) return run_theory(theory);
    if (c_synth->parsed()) return run_synth(synth);
  } catch (const uidkit::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
