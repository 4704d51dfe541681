#pragma once

// Seeded generators for desk-scale experiments: a class-based Markov text
// source, and psychometric responses planted from the effort and
// acceptability models.

#include <cstdint>
#include <string>
#include <vector>

#include "uidkit/corpus.hpp"
#include "uidkit/ngram_lm.hpp"
#include "uidkit/random.hpp"

namespace uidkit::synthetic {

struct TextOptions {
  int vocab_size = 600;
  int classes = 24;
  int min_length = 3;
  int max_length = 22;
};

/// Markov text source over word classes with Zipfian emissions and sticky
/// word-to-word successors. Documents differ in how predictable they are.
class TextSource {
 public:
  explicit TextSource(std::uint64_t seed, TextOptions options = {});

  /// `predictability` in [0, 1] scales how often the sticky successor is used.
  std::vector<std::string> sentence(double predictability);
  std::vector<std::vector<std::string>> sentences(std::size_t n, double predictability = 0.5);
  /// Documents with ids d0, d1, ...; each draws its own predictability.
  Corpus corpus(std::size_t documents, std::size_t sentences_per_document);

 private:
  TextOptions options_;
  Rng rng_;
  std::vector<std::string> words_;
  std::vector<std::vector<int>> class_words_;
  std::vector<std::vector<std::pair<int, double>>> class_next_;
  std::vector<int> word_class_;
  std::vector<int> sticky_next_;
  std::vector<std::vector<double>> class_cdf_;

  int draw_word(int cls);
  int draw_class(int cls);
};

/// Corpus of pre-split sentences (one document per `per_document` sentences).
Corpus corpus_from_sentences(const std::vector<std::vector<std::string>>& sentences, std::size_t per_document);

struct AcceptabilityOptions {
  double k_true = 1.5;
  double intercept = 0.5;
  double slope = 2.5;  // per standard deviation of sum s^k
};

/// Binary labels with logit = intercept - slope * z(sum s^k_true).
std::vector<AcceptabilityRecord> plant_acceptability(const SurprisalSet& profiles, const AcceptabilityOptions& options,
                                                     std::uint64_t seed);

struct SentenceRtOptions {
  double k_true = 1.25;
  int subjects = 24;
  double skip_probability = 0.15;
  double base_ms = 300.0;
  double per_word_ms = 180.0;
  double per_fixation_ms = 60.0;
  double effort_ms = 90.0;         // per standard deviation of sum s^k
  double subject_slope_sd = 25.0;  // ms per word
  double noise_ms = 60.0;
};

/// Word-level reading records whose per-(subject, sentence) sums follow the
/// effort model with exponent k_true plus a per-subject word-count slope.
std::vector<ReadingRecord> plant_sentence_reading(const Corpus& corpus, const SurprisalSet& profiles,
                                                  const SentenceRtOptions& options, std::uint64_t seed);

struct WordRtOptions {
  int subjects = 12;
  double skip_probability = 0.1;
  double base_ms = 220.0;
  double surprisal_ms = 12.0;
  double length_ms = 6.0;
  double variance_ms = 6.0;  // per unit of (s - mu_lang)^2
  double subject_sd = 30.0;
  double noise_ms = 25.0;
};

/// Word-level reading times driven by the language-scope squared deviation.
std::vector<ReadingRecord> plant_word_reading(const Corpus& corpus, const SurprisalSet& profiles,
                                              double language_mean, const WordRtOptions& options,
                                              std::uint64_t seed);

struct StudyOptions {
  std::size_t lm_sentences = 6000;
  std::size_t reference_sentences = 2000;
  std::size_t documents = 50;
  std::size_t sentences_per_document = 40;
  int order = 3;
  TextOptions text;
  AcceptabilityOptions acceptability;
  SentenceRtOptions sentence_rt;
  WordRtOptions word_rt;
};

/// A complete synthetic study: the LM is trained on separate text, the
/// language-level mean comes from a separate reference sample, and all
/// responses are planted over the analysis corpus surprisals.
struct Study {
  Corpus lm_corpus;
  Corpus reference_corpus;
  Corpus corpus;
  SurprisalSet profiles;
  double language_mean = 0.0;
  std::vector<AcceptabilityRecord> acceptability;
  std::vector<ReadingRecord> sentence_reading;
  std::vector<ReadingRecord> word_reading;
};

Study make_study(std::uint64_t seed, const StudyOptions& options = {});

}  // namespace uidkit::synthetic
