#pragma once

// Interpolated Modified Kneser-Ney n-gram language model, a lowercased
// unigram model, and per-token surprisal profiles (in nats).

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uidkit/corpus.hpp"

namespace uidkit {

inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";

using WordId = std::uint32_t;

/// Per-order discounts for counts 1, 2 and 3+.
struct Discounts {
  double d1 = 0.0;
  double d2 = 0.0;
  double d3plus = 0.0;
  /// True when counts-of-counts were too sparse and the 0.75 absolute
  /// discount was used instead.
  bool fallback = false;

  double operator()(std::uint64_t count) const {
    if (count == 0) return 0.0;
    if (count == 1) return d1;
    if (count == 2) return d2;
    return d3plus;
  }
};

/// Counts-of-counts n1..n4 -> D_i = i - (i+1) Y n_{i+1} / n_i with
/// Y = n1 / (n1 + 2 n2), each clamped to [0, i].
Discounts modified_kn_discounts(std::uint64_t n1, std::uint64_t n2, std::uint64_t n3, std::uint64_t n4);

class NGramModel {
 public:
  static constexpr int kMaxOrder = 5;
  static constexpr WordId kBosId = 0;
  static constexpr WordId kEosId = 1;
  static constexpr WordId kUnkId = 2;

  /// Tokens seen fewer than `unk_threshold` times are mapped to <unk>.
  static NGramModel train(std::span<const std::vector<std::string>> sentences, int order,
                          int unk_threshold = 1);
  static NGramModel train(const Corpus& corpus, int order, int unk_threshold = 1);

  int order() const { return order_; }
  int unk_threshold() const { return unk_threshold_; }
  /// Size of the predictable vocabulary: every kept type plus <unk> and </s>.
  std::size_t vocab_size() const { return words_.size() - 1; }
  /// Ids a distribution is defined over (everything except <s>).
  std::vector<WordId> predictable_ids() const;

  WordId id(std::string_view word) const;
  const std::string& word(WordId id) const { return words_.at(id); }
  std::vector<WordId> ids(std::span<const std::string> words) const;

  /// p(word | context). Only the last order()-1 context ids are used; a
  /// leading <s> marks the sentence start.
  double prob(std::span<const WordId> context, WordId word) const;
  double prob(const std::vector<std::string>& context, const std::string& word) const;

  /// Per-word surprisals of a sentence, followed by the </s> surprisal when
  /// `include_eos` is set. Accumulating this vector left to right gives
  /// sequence_neg_log_prob() bit for bit.
  std::vector<double> token_surprisals(std::span<const std::string> words, bool include_eos) const;
  double sequence_neg_log_prob(std::span<const std::string> words, bool include_eos) const;

  const Discounts& discounts(int n) const { return discounts_.at(static_cast<std::size_t>(n - 1)); }
  bool used_fallback_discount() const;

  /// Plain-text, versioned count dump.
  void save(std::ostream& out) const;
  static NGramModel load(std::istream& in);

 private:
  struct Key {
    std::array<WordId, kMaxOrder> ids{};
    std::uint8_t len = 0;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  struct ContextEntry {
    std::unordered_map<WordId, std::uint64_t> counts;
    std::uint64_t total = 0;
    std::uint64_t n1 = 0, n2 = 0, n3plus = 0;
  };
  using Level = std::unordered_map<Key, ContextEntry, KeyHash>;

  NGramModel() = default;
  void add_count(int n, const Key& ngram, std::uint64_t count);
  void finalize();
  static Key make_key(std::span<const WordId> ids);

  int order_ = 0;
  int unk_threshold_ = 1;
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
  std::vector<Level> levels_;  // levels_[n-1]: contexts of length n-1
  std::vector<Discounts> discounts_;
};

/// MLE unigram distribution over lowercased tokens. Types below the
/// threshold pool into <unk>, which also carries a half-count reserve so
/// unseen words keep finite log-probability.
class UnigramModel {
 public:
  static UnigramModel train(const Corpus& corpus, int unk_threshold = 1);
  static UnigramModel train(std::span<const std::string> tokens, int unk_threshold = 1);

  /// Input is lowercased before lookup.
  double prob(std::string_view word) const;
  double log_prob(std::string_view word) const;
  double unk_prob() const { return unk_count_ / total_; }
  std::size_t size() const { return counts_.size(); }
  /// Sum of every probability (kept types plus <unk>).
  double total_mass() const;

 private:
  std::unordered_map<std::string, double> counts_;
  double unk_count_ = 0.0;
  double total_ = 0.0;
};

// ---------------------------------------------------------------------------
// Surprisal profiles

enum class SurprisalSource { ngram, external };

struct SurprisalProfile {
  SentenceRef sentence;
  std::vector<double> s;  // nats, one per word
  std::optional<double> eos;  // </s> surprisal when the source provides it
  SurprisalSource source = SurprisalSource::ngram;
  std::string model_tag;
  bool pseudo = false;

  std::size_t size() const { return s.size(); }
};

using SurprisalSet = std::map<SentenceRef, SurprisalProfile>;

SurprisalProfile surprisal(const NGramModel& model, const Sentence& sentence);
SurprisalSet surprisals(const NGramModel& model, const Corpus& corpus);

/// exp(mean per-token surprisal), </s> included. Throws on an empty corpus.
double perplexity(const NGramModel& model, const Corpus& heldout);

/// Exchange format: optional "# model=<tag> pseudo=<0|1> units=nats" line,
/// header doc_id, sent_idx, tok_idx, token, surprisal_nats; one row per word.
void write_surprisal_tsv(std::ostream& out, const Corpus& corpus, const SurprisalSet& profiles,
                         const std::string& model_tag, bool pseudo = false);

/// Validates coverage against `corpus`: every token of every referenced
/// sentence exactly once, matching surface, surprisal >= 0.
SurprisalSet load_external_surprisals(std::istream& in, const Corpus& corpus,
                                      const std::string& source = "surprisals");

}  // namespace uidkit
