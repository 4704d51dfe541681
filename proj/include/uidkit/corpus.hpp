#pragma once

// Canonical in-memory corpus model plus the psychometric records that
// annotate it (per-word reading times, per-sentence acceptability).

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uidkit {

struct SentenceRef {
  std::string doc_id;
  int sent_idx = 0;

  auto operator<=>(const SentenceRef&) const = default;
  bool operator==(const SentenceRef&) const = default;
};

struct TokenId {
  std::string doc_id;
  int sent_idx = 0;
  int tok_idx = 0;

  SentenceRef sentence() const { return {doc_id, sent_idx}; }
  /// "(d0, s0, t2)"
  std::string to_string() const;

  auto operator<=>(const TokenId&) const = default;
  bool operator==(const TokenId&) const = default;
};

struct Token {
  std::string doc_id;
  int sent_idx = 0;
  int tok_idx = 0;
  std::string surface;
  std::string lowercased;
  std::size_t char_len = 0;

  TokenId id() const { return {doc_id, sent_idx, tok_idx}; }
};

/// Builds a token with derived fields (lowercase form, code-point length).
Token make_token(std::string doc_id, int sent_idx, int tok_idx, std::string surface);

struct Sentence {
  std::string doc_id;
  int sent_idx = 0;
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  SentenceRef ref() const { return {doc_id, sent_idx}; }
  std::vector<std::string> surfaces() const;
};

struct Document {
  std::string id;
  std::vector<Sentence> sentences;
};

/// Immutable once built; safe to share across threads.
class Corpus {
 public:
  Corpus() = default;
  /// Validates invariants: non-empty sentences, contiguous indices, unique ids.
  explicit Corpus(std::vector<Document> documents);

  const std::vector<Document>& documents() const { return documents_; }
  std::size_t sentence_count() const;
  std::size_t token_count() const;
  bool empty() const { return documents_.empty(); }

  const Sentence* find(const SentenceRef& ref) const;
  const Sentence& at(const SentenceRef& ref) const;
  const Document* find_document(std::string_view doc_id) const;

  /// Sentences in corpus order.
  std::vector<const Sentence*> sentences() const;

 private:
  std::vector<Document> documents_;
  std::map<SentenceRef, std::pair<std::size_t, std::size_t>> index_;
};

/// UTF-8 raw text, blank-line document delimiter. Documents get ids d0, d1, ...
/// A sentence ends after . ! or ? when the next word starts with a capital;
/// abbreviations followed by a capitalized word are split too.
Corpus tokenize(std::string_view raw_text);

/// Whitespace tokenization with leading/trailing punctuation detached.
/// Tokens that are entirely punctuation stay whole.
std::vector<std::string> tokenize_words(std::string_view text);

/// Pre-segmented input: one sentence per line, tokens separated by spaces,
/// blank line between documents. Tokens are taken verbatim.
Corpus from_sentence_lines(std::string_view text);

/// Inverse of tokenize() for corpora whose sentences start with a capital
/// letter and do not end in a closing quote or bracket: tokens joined by single spaces, documents separated by blank lines.
std::string detokenize(const Corpus& corpus);

/// Columns doc_id, sent_idx, tok_idx, token.
Corpus read_corpus_tsv(std::istream& in, const std::string& source = "corpus");
void write_corpus_tsv(std::ostream& out, const Corpus& corpus);

// ---------------------------------------------------------------------------
// Reading times

struct ReadingRecord {
  std::string subject_id;
  TokenId token;
  double rt = 0.0;  // milliseconds
  bool fixated = false;
};

/// Columns doc_id, sent_idx, tok_idx, subject_id, rt_ms, fixated.
std::vector<ReadingRecord> read_reading_times_tsv(std::istream& in,
                                                  const std::string& source = "reading_times");
void write_reading_times_tsv(std::ostream& out, std::span<const ReadingRecord> records);

struct SubjectSentence {
  std::string subject_id;
  SentenceRef sentence;

  auto operator<=>(const SubjectSentence&) const = default;
  bool operator==(const SubjectSentence&) const = default;
};

struct OutlierResult {
  std::vector<ReadingRecord> kept;
  std::set<SubjectSentence> dropped;
  std::size_t outlier_words = 0;
};

/// z-scores of log(rt) over all fixated records of the whole dataset
/// (population standard deviation). Any word with |z| > threshold drops its
/// entire (subject, sentence) pair. Fewer than two fixated records: no-op.
OutlierResult remove_outliers(std::span<const ReadingRecord> records, double z_threshold = 3.0);

struct SentenceReading {
  std::string subject_id;
  SentenceRef sentence;
  double total_rt = 0.0;        // sum over fixated words, ms
  std::size_t fixated_count = 0;
};

/// Sum of fixated-word times for one (subject, sentence). std::nullopt when
/// the pair has no fixated words.
std::optional<SentenceReading> sentence_rt(std::span<const ReadingRecord> records,
                                           const std::string& subject_id,
                                           const SentenceRef& sentence);

struct SentenceReadingTable {
  std::vector<SentenceReading> rows;         // ordered by (subject, sentence)
  std::vector<SubjectSentence> no_fixations;  // excluded pairs
};

SentenceReadingTable aggregate_sentence_rts(std::span<const ReadingRecord> records);

// ---------------------------------------------------------------------------
// Acceptability

enum class RatingScheme { binary, graded };

struct AcceptabilityRecord {
  SentenceRef sentence;
  double label = 0.0;
  RatingScheme scheme = RatingScheme::binary;
  double scale_min = 0.0;
  double scale_max = 1.0;

  /// Graded scores min-max rescaled to [0,1]; binary labels unchanged.
  double rescaled() const;
};

/// Columns doc_id, sent_idx, label, scheme. scheme is "binary", "graded"
/// (1-4 scale) or "graded:LO:HI".
std::vector<AcceptabilityRecord> read_acceptability_tsv(std::istream& in,
                                                        const std::string& source = "acceptability");

}  // namespace uidkit
