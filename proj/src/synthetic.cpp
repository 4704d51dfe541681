#include "uidkit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "uidkit/error.hpp"

namespace uidkit::synthetic {

namespace {

const char* const kSyllables[] = {"ba", "ko", "ri", "tu", "me", "sa", "lo", "ni", "pe", "du",
                                  "ga", "fi", "mo", "ze", "ku", "ta", "vi", "no", "he", "ju"};

std::string pseudo_word(int index) {
  std::string out;
  int i = index;
  do {
    out += kSyllables[i % 20];
    i /= 20;
  } while (i > 0);
  return out;
}

int sample_cdf(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

std::vector<double> standardized(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(x.size()));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sd > 0.0 ? (x[i] - mean) / sd : 0.0;
  return out;
}

double sum_power(const std::vector<double>& s, double k) {
  double total = 0.0;
  for (double v : s) total += std::pow(v, k);
  return total;
}

std::string subject_name(int j) {
  std::string id = std::to_string(j);
  return "subj" + std::string(id.size() < 2 ? 2 - id.size() : 0, '0') + id;
}

}  // namespace

TextSource::TextSource(std::uint64_t seed, TextOptions options) : options_(options), rng_(seed) {
  if (options_.vocab_size < options_.classes || options_.classes < 2) throw DomainError("bad text options");
  for (int i = 0; i < options_.vocab_size; ++i) {
    words_.push_back(pseudo_word(i));
    word_class_.push_back(i % options_.classes);
  }
  class_words_.resize(static_cast<std::size_t>(options_.classes));
  for (int i = 0; i < options_.vocab_size; ++i) class_words_[static_cast<std::size_t>(word_class_[static_cast<std::size_t>(i)])].push_back(i);
  for (const auto& members : class_words_) {
    std::vector<double> cdf;
    double acc = 0.0;
    for (std::size_t r = 0; r < members.size(); ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), 1.1);
      cdf.push_back(acc);
    }
    class_cdf_.push_back(std::move(cdf));
  }
  for (int c = 0; c < options_.classes; ++c) {
    std::vector<std::pair<int, double>> next;
    for (int t = 0; t < 3; ++t) next.emplace_back(static_cast<int>(rng_.index(static_cast<std::uint64_t>(options_.classes))), rng_.exponential());
    class_next_.push_back(std::move(next));
  }
  for (int i = 0; i < options_.vocab_size; ++i) {
    const auto& next = class_next_[static_cast<std::size_t>(word_class_[static_cast<std::size_t>(i)])];
    sticky_next_.push_back(draw_word(next[rng_.index(next.size())].first));
  }
}

int TextSource::draw_word(int cls) {
  const auto& members = class_words_[static_cast<std::size_t>(cls)];
  return members[static_cast<std::size_t>(sample_cdf(class_cdf_[static_cast<std::size_t>(cls)], rng_.uniform()))];
}

int TextSource::draw_class(int cls) {
  const auto& next = class_next_[static_cast<std::size_t>(cls)];
  double total = 0.0;
  for (const auto& [c, w] : next) total += w;
  double u = rng_.uniform() * total;
  for (const auto& [c, w] : next) {
    if (u < w) return c;
    u -= w;
  }
  return next.back().first;
}

std::vector<std::string> TextSource::sentence(double predictability) {
  const auto span = static_cast<std::uint64_t>(options_.max_length - options_.min_length + 1);
  const int length = options_.min_length + static_cast<int>(rng_.index(span));
  std::vector<std::string> out;
  int word = draw_word(static_cast<int>(rng_.index(static_cast<std::uint64_t>(options_.classes))));
  out.push_back(words_[static_cast<std::size_t>(word)]);
  for (int n = 1; n < length; ++n) {
    if (rng_.bernoulli(predictability)) {
      word = sticky_next_[static_cast<std::size_t>(word)];
    } else {
      word = draw_word(draw_class(word_class_[static_cast<std::size_t>(word)]));
    }
    out.push_back(words_[static_cast<std::size_t>(word)]);
  }
  return out;
}

std::vector<std::vector<std::string>> TextSource::sentences(std::size_t n, double predictability) {
  std::vector<std::vector<std::string>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sentence(predictability));
  return out;
}

Corpus TextSource::corpus(std::size_t documents, std::size_t sentences_per_document) {
  std::vector<Document> docs;
  for (std::size_t d = 0; d < documents; ++d) {
    Document doc{"d" + std::to_string(d), {}};
    const double predictability = rng_.uniform(0.1, 0.9);
    for (std::size_t s = 0; s < sentences_per_document; ++s) {
      const auto words = sentence(predictability);
      Sentence sent{doc.id, static_cast<int>(s), {}};
      for (std::size_t t = 0; t < words.size(); ++t) {
        sent.tokens.push_back(make_token(doc.id, static_cast<int>(s), static_cast<int>(t), words[t]));
      }
      doc.sentences.push_back(std::move(sent));
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs));
}

Corpus corpus_from_sentences(const std::vector<std::vector<std::string>>& sentences, std::size_t per_document) {
  if (per_document == 0) throw DomainError("per_document must be >= 1");
  std::vector<Document> docs;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i % per_document == 0) docs.push_back({"d" + std::to_string(docs.size()), {}});
    auto& doc = docs.back();
    Sentence sent{doc.id, static_cast<int>(doc.sentences.size()), {}};
    for (std::size_t t = 0; t < sentences[i].size(); ++t) {
      sent.tokens.push_back(make_token(doc.id, sent.sent_idx, static_cast<int>(t), sentences[i][t]));
    }
    doc.sentences.push_back(std::move(sent));
  }
  return Corpus(std::move(docs));
}

std::vector<AcceptabilityRecord> plant_acceptability(const SurprisalSet& profiles, const AcceptabilityOptions& options,
                                                     std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> effort;
  for (const auto& [ref, p] : profiles) effort.push_back(sum_power(p.s, options.k_true));
  const auto z = standardized(effort);
  std::vector<AcceptabilityRecord> out;
  std::size_t i = 0;
  for (const auto& [ref, p] : profiles) {
    const double logit = options.intercept - options.slope * z[i++];
    const double prob = 1.0 / (1.0 + std::exp(-logit));
    AcceptabilityRecord r;
    r.sentence = ref;
    r.label = rng.bernoulli(prob) ? 1.0 : 0.0;
    out.push_back(r);
  }
  return out;
}

std::vector<ReadingRecord> plant_sentence_reading(const Corpus& corpus, const SurprisalSet& profiles,
                                                  const SentenceRtOptions& options, std::uint64_t seed) {
  Rng rng(seed);
  const auto sentences = corpus.sentences();
  std::vector<double> effort;
  for (const auto* s : sentences) effort.push_back(sum_power(profiles.at(s->ref()).s, options.k_true));
  const auto z = standardized(effort);

  std::vector<ReadingRecord> out;
  for (int j = 0; j < options.subjects; ++j) {
    const auto subject = subject_name(j);
    const double slope = rng.normal(0.0, options.subject_slope_sd);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto& sent = *sentences[i];
      const auto n = static_cast<double>(sent.size());
      std::vector<bool> fixated(sent.size());
      double f = 0.0;
      for (std::size_t t = 0; t < sent.size(); ++t) {
        fixated[t] = !rng.bernoulli(options.skip_probability);
        f += fixated[t] ? 1.0 : 0.0;
      }
      double total = options.base_ms + (options.per_word_ms + slope) * n + options.per_fixation_ms * f +
                     options.effort_ms * z[i] + rng.normal(0.0, options.noise_ms);
      total = std::max(total, 40.0 * std::max(f, 1.0));
      std::vector<double> weights(sent.size(), 0.0);
      double wsum = 0.0;
      for (std::size_t t = 0; t < sent.size(); ++t) {
        if (!fixated[t]) continue;
        for (int g = 0; g < 8; ++g) weights[t] += rng.exponential();
        wsum += weights[t];
      }
      for (std::size_t t = 0; t < sent.size(); ++t) {
        ReadingRecord r;
        r.subject_id = subject;
        r.token = sent.tokens[t].id();
        r.fixated = fixated[t];
        r.rt = fixated[t] ? total * weights[t] / wsum : 0.0;
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

std::vector<ReadingRecord> plant_word_reading(const Corpus& corpus, const SurprisalSet& profiles,
                                              double language_mean, const WordRtOptions& options,
                                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ReadingRecord> out;
  for (int j = 0; j < options.subjects; ++j) {
    const auto subject = subject_name(j);
    const double intercept = rng.normal(0.0, options.subject_sd);
    for (const auto* sent : corpus.sentences()) {
      const auto& s = profiles.at(sent->ref()).s;
      for (std::size_t t = 0; t < sent->size(); ++t) {
        ReadingRecord r;
        r.subject_id = subject;
        r.token = sent->tokens[t].id();
        r.fixated = !rng.bernoulli(options.skip_probability);
        if (r.fixated) {
          const double dev = s[t] - language_mean;
          const double rt = options.base_ms + intercept + options.surprisal_ms * s[t] +
                            options.length_ms * static_cast<double>(sent->tokens[t].char_len) +
                            options.variance_ms * dev * dev + rng.normal(0.0, options.noise_ms);
          r.rt = std::max(rt, 30.0);
        }
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

Study make_study(std::uint64_t seed, const StudyOptions& options) {
  TextSource source(seed, options.text);
  Study study;
  // Mixed predictability so every sample covers the same text distribution.
  const std::size_t chunk = 200;
  study.lm_corpus = source.corpus((options.lm_sentences + chunk - 1) / chunk, chunk);
  study.reference_corpus = source.corpus((options.reference_sentences + chunk - 1) / chunk, chunk);
  study.corpus = source.corpus(options.documents, options.sentences_per_document);

  const auto model = NGramModel::train(study.lm_corpus, options.order);
  study.profiles = surprisals(model, study.corpus);
  const auto reference = surprisals(model, study.reference_corpus);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& [ref, p] : reference) {
    for (double v : p.s) total += v;
    n += p.s.size();
  }
  study.language_mean = total / static_cast<double>(n);

  study.acceptability = plant_acceptability(study.profiles, options.acceptability, seed + 1);
  study.sentence_reading = plant_sentence_reading(study.corpus, study.profiles, options.sentence_rt, seed + 2);
  study.word_reading =
      plant_word_reading(study.corpus, study.profiles, study.language_mean, options.word_rt, seed + 3);
  return study;
}

}  // namespace uidkit::synthetic
