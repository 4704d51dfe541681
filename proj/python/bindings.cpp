#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uidkit/corpus.hpp"
#include "uidkit/effort.hpp"
#include "uidkit/error.hpp"
#include "uidkit/ngram_lm.hpp"
#include "uidkit/pipeline.hpp"
#include "uidkit/regression.hpp"
#include "uidkit/uid_metrics.hpp"

namespace py = pybind11;
using namespace uidkit;

namespace {

using SentenceList = std::vector<std::vector<std::string>>;

// Documents as {"id": ..., "sentences": [[token, ...], ...]}.
py::list corpus_documents(const Corpus& c) {
  py::list docs;
  for (const auto& d : c.documents()) {
    SentenceList sents;
    for (const auto& s : d.sentences) sents.push_back(s.surfaces());
    py::dict doc;
    doc["id"] = d.id;
    doc["sentences"] = sents;
    docs.append(doc);
  }
  return docs;
}

Corpus corpus_from_documents(const std::vector<SentenceList>& docs) {
  std::vector<Document> out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    Document doc{"d" + std::to_string(d), {}};
    for (std::size_t s = 0; s < docs[d].size(); ++s) {
      Sentence sent{doc.id, static_cast<int>(s), {}};
      for (std::size_t t = 0; t < docs[d][s].size(); ++t) {
        sent.tokens.push_back(make_token(doc.id, static_cast<int>(s), static_cast<int>(t), docs[d][s][t]));
      }
      doc.sentences.push_back(std::move(sent));
    }
    out.push_back(std::move(doc));
  }
  return Corpus(std::move(out));
}

Dataset make_dataset(const std::vector<double>& response, const std::map<std::string, std::vector<double>>& columns,
                     const std::vector<std::string>& groups) {
  Dataset d;
  d.response = response;
  for (const auto& [name, values] : columns) d.add_column(name, values);
  d.groups = groups;
  return d;
}

ModelSpec make_spec(const std::vector<std::string>& fixed, const std::vector<std::string>& random,
                    const std::string& family) {
  ModelSpec spec;
  spec.fixed_effects = fixed;
  spec.random_effects = random;
  if (family == "bernoulli") {
    spec.family = Family::bernoulli;
  } else if (family != "gaussian") {
    throw InputError("family must be 'gaussian' or 'bernoulli'");
  }
  return spec;
}

py::dict fit_dict(const FitResult& f) {
  py::dict out;
  py::dict coef;
  for (std::size_t i = 0; i < f.names.size(); ++i) coef[py::str(f.names[i])] = f.coefficients[i];
  py::dict var;
  for (std::size_t i = 0; i < f.random_names.size(); ++i) var[py::str(f.random_names[i])] = f.random_variances[i];
  out["coefficients"] = coef;
  out["sigma2"] = f.sigma2;
  out["random_variances"] = var;
  out["boundary"] = f.boundary;
  out["log_likelihood"] = f.log_likelihood;
  out["deviance"] = f.deviance;
  out["iterations"] = f.iterations;
  out["converged"] = f.converged;
  return out;
}

pipeline::ExperimentConfig config_from(const std::string& json_text) {
  return pipeline::ExperimentConfig::from_json(nlohmann::json::parse(json_text));
}

}  // namespace

PYBIND11_MODULE(_uidkit, m) {
  m.doc() = "Uniform information density toolkit (C++ core)";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());

  py::class_<Corpus>(m, "Corpus")
      .def_static("from_text", [](const std::string& text) { return tokenize(text); }, "Tokenize raw text.")
      .def_static("from_lines", [](const std::string& text) { return from_sentence_lines(text); },
                  "One sentence per line, blank line between documents.")
      .def_static("from_tsv",
                  [](const std::string& path) {
                    std::ifstream in(path);
                    if (!in) throw InputError("cannot open '" + path + "'");
                    return read_corpus_tsv(in, path);
                  })
      .def_static("from_documents", &corpus_from_documents, py::arg("documents"))
      .def_property_readonly("documents", &corpus_documents)
      .def_property_readonly("sentence_count", &Corpus::sentence_count)
      .def_property_readonly("token_count", &Corpus::token_count)
      .def("to_tsv",
           [](const Corpus& c) {
             std::ostringstream out;
             write_corpus_tsv(out, c);
             return out.str();
           })
      .def("detokenize", [](const Corpus& c) { return detokenize(c); });

  py::class_<NGramModel>(m, "NGramModel")
      .def_static("train", py::overload_cast<const Corpus&, int, int>(&NGramModel::train), py::arg("corpus"),
                  py::arg("order") = 5, py::arg("unk_threshold") = 1)
      .def_static(
          "train_sentences",
          [](const SentenceList& sents, int order, int unk) { return NGramModel::train(sents, order, unk); },
          py::arg("sentences"), py::arg("order") = 5, py::arg("unk_threshold") = 1)
      .def_static("load",
                  [](const std::string& path) {
                    std::ifstream in(path);
                    if (!in) throw InputError("cannot open '" + path + "'");
                    return NGramModel::load(in);
                  })
      .def("save",
           [](const NGramModel& lm, const std::string& path) {
             std::ofstream out(path);
             lm.save(out);
           })
      .def_property_readonly("order", &NGramModel::order)
      .def_property_readonly("vocab_size", &NGramModel::vocab_size)
      .def("prob", py::overload_cast<const std::vector<std::string>&, const std::string&>(&NGramModel::prob, py::const_),
           py::arg("context"), py::arg("word"))
      .def(
          "surprisals",
          [](const NGramModel& lm, const std::vector<std::string>& words, bool eos) {
            return lm.token_surprisals(words, eos);
          },
          py::arg("words"), py::arg("include_eos") = false)
      .def("perplexity", [](const NGramModel& lm, const Corpus& c) { return perplexity(lm, c); });

  m.def("surprisal_tsv",
        [](const NGramModel& lm, const Corpus& c, const std::string& tag) {
          std::ostringstream out;
          write_surprisal_tsv(out, c, surprisals(lm, c), tag);
          return out.str();
        },
        py::arg("model"), py::arg("corpus"), py::arg("tag") = "ngram");
  m.def("load_surprisals",
        [](const std::string& text, const Corpus& c) {
          std::istringstream in(text);
          std::map<std::pair<std::string, int>, std::vector<double>> out;
          for (const auto& [ref, p] : load_external_surprisals(in, c)) out[{ref.doc_id, ref.sent_idx}] = p.s;
          return out;
        },
        "Validate an exchange TSV against a corpus; returns {(doc_id, sent_idx): [s, ...]}.");

  m.def("super_linear", [](const std::vector<double>& s, double k) { return super_linear(s, k); });
  m.def("variance", [](const std::vector<double>& s, std::optional<double> mu) {
    return mu ? variance(s, *mu) : variance(s, mean(s));
  }, py::arg("s"), py::arg("mu") = py::none());
  m.def("local_variance", [](const std::vector<double>& s) { return local_variance(s); });
  m.def("max_surprisal", [](const std::vector<double>& s) { return max_surprisal(s); });
  m.def("entropy_uid", [](const std::vector<double>& s, double k) { return entropy_uid(s, k); });
  m.def("global_delta", [](const std::vector<double>& s, double mu, const std::string& d) {
    return global_delta(s, mu, parse_delta_kind(d));
  }, py::arg("s"), py::arg("mu"), py::arg("delta") = "squared");
  m.def("local_delta", [](const std::vector<double>& s, const std::string& d) {
    return local_delta(s, parse_delta_kind(d));
  }, py::arg("s"), py::arg("delta") = "squared");
  m.def("word_variances",
        [](const std::vector<std::vector<double>>& doc, const std::string& scope, std::optional<double> lang) {
          std::vector<std::optional<double>> out;
          for (const auto& w : word_variances(doc, MuScope::parse(scope), lang)) {
            out.push_back(w.excluded ? std::nullopt : std::optional<double>(w.value));
          }
          return out;
        },
        py::arg("document"), py::arg("scope"),
        py::arg("language_mean") = py::none(),
        "Word-level variance for one document; None marks excluded tokens.");

  m.def("effort", [](const std::vector<double>& s, double k, double c) {
    const auto e = effort(s, {k, c});
    return py::make_tuple(e.information, e.length);
  }, py::arg("s"), py::arg("k"), py::arg("c") = 0.0);
  m.def("optimal_length", [](double total, double k, double c) {
    const auto r = optimal_length(total, {k, c});
    py::dict out;
    out["n_star"] = r.n_star;
    out["integer"] = r.integer;
    out["concave"] = r.concave;
    return out;
  }, py::arg("total_surprisal"), py::arg("k"), py::arg("c"));
  m.def("verify_uniform_minimizer",
        [](std::size_t n, double total, double k, std::size_t trials, std::uint64_t seed) {
          return verify_uniform_minimizer(n, total, k, trials, seed).passed;
        },
        py::arg("n"), py::arg("total_surprisal"), py::arg("k"), py::arg("trials") = 1000, py::arg("seed") = 0);
  m.def("_theory_check", [](std::uint64_t seed, std::size_t draws, std::size_t trials) {
    return theory_check_report(seed, draws, trials).dump();
  });

  m.def("fit",
        [](const std::vector<double>& y, const std::map<std::string, std::vector<double>>& columns,
           const std::vector<std::string>& fixed, const std::vector<std::string>& random,
           const std::vector<std::string>& groups, const std::string& family) {
          return fit_dict(fit(make_spec(fixed, random, family), make_dataset(y, columns, groups)));
        },
        py::arg("y"), py::arg("columns"), py::arg("fixed"), py::arg("random") = std::vector<std::string>{},
        py::arg("groups") = std::vector<std::string>{}, py::arg("family") = "gaussian");
  m.def("delta_loglik",
        [](const std::vector<double>& y, const std::map<std::string, std::vector<double>>& columns,
           const std::vector<std::string>& fixed, const std::string& predictor,
           const std::vector<std::string>& random, const std::vector<std::string>& groups,
           const std::string& family, int folds, std::uint64_t seed) {
          const auto cmp = delta_loglik(make_spec(fixed, random, family), predictor,
                                        make_dataset(y, columns, groups), folds, seed);
          py::dict out;
          out["mean"] = cmp.mean;
          out["se"] = cmp.se;
          out["delta"] = cmp.delta;
          out["folds"] = cmp.folds;
          return out;
        },
        py::arg("y"), py::arg("columns"), py::arg("fixed"), py::arg("predictor"),
        py::arg("random") = std::vector<std::string>{}, py::arg("groups") = std::vector<std::string>{},
        py::arg("family") = "gaussian", py::arg("folds") = 10, py::arg("seed") = 0);
  m.def("paired_ttest", [](const std::vector<double>& a, const std::vector<double>& b, int m_cmp, double alpha) {
    const auto r = paired_ttest(a, b, m_cmp, alpha);
    py::dict out;
    out["t"] = r.t;
    out["dof"] = r.dof;
    out["p"] = r.p;
    out["threshold"] = r.threshold;
    out["significant"] = r.significant;
    return out;
  }, py::arg("a"), py::arg("b"), py::arg("comparisons") = 1, py::arg("alpha") = 0.001);
  m.def("correlate", [](const std::vector<double>& x, const std::vector<double>& y, const std::string& method) {
    if (method != "pearson" && method != "spearman") throw InputError("method must be 'pearson' or 'spearman'");
    return correlate(x, y, method == "pearson" ? CorrelationMethod::pearson : CorrelationMethod::spearman);
  }, py::arg("x"), py::arg("y"), py::arg("method") = "pearson");

  m.def("_run_report",
        [](const std::string& config_json, const std::string& kind) {
          const auto config = config_from(config_json);
          pipeline::Report report;
          {
            py::gil_scoped_release release;
            const auto data = pipeline::load_experiment(config);
            if (kind == "sweep-k") {
              report = pipeline::run_k_sweep(config, data);
            } else if (kind == "table") {
              report = pipeline::run_operationalization_table(config, data);
            } else if (kind == "sweep-window") {
              report = pipeline::run_window_sweep(config, data);
            } else if (kind == "correlate") {
              report = pipeline::run_correlation_figure(config, data);
            } else {
              throw InputError("unknown report kind '" + kind + "'");
            }
          }
          return pipeline::to_json(report).dump();
        },
        py::arg("config_json"), py::arg("kind"));
  m.def("_config_hash", [](const std::string& config_json) { return config_from(config_json).hash(); });
}
