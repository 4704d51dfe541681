#include "uidkit/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "uidkit/error.hpp"
#include "uidkit/tsv.hpp"

namespace uidkit {

std::string TokenId::to_string() const {
  return "(" + doc_id + ", s" + std::to_string(sent_idx) + ", t" + std::to_string(tok_idx) + ")";
}

namespace {

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool all_punct(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_punct);
}

// A field closes a sentence when its trailing punctuation holds . ! or ?
// ("gate.\"", "Really?!", a bare "...").
bool ends_sentence(std::string_view field) {
  std::size_t i = field.size();
  while (i > 0 && is_punct(field[i - 1])) {
    const char c = field[i - 1];
    if (c == '.' || c == '!' || c == '?') return true;
    --i;
  }
  return false;
}

// First non-punctuation character is an ASCII capital ("\"Stop", "(The").
bool starts_capital(std::string_view field) {
  for (char c : field) {
    if (!is_punct(c)) return c >= 'A' && c <= 'Z';
  }
  return false;
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

// Splits on lines that contain only whitespace.
std::vector<std::string_view> split_documents(std::string_view text) {
  std::vector<std::string_view> docs;
  std::size_t doc_start = std::string_view::npos;
  std::size_t doc_end = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = text.substr(pos, eol - pos);
    const bool blank = std::all_of(line.begin(), line.end(), is_space);
    if (blank) {
      if (doc_start != std::string_view::npos) {
        docs.push_back(text.substr(doc_start, doc_end - doc_start));
        doc_start = std::string_view::npos;
      }
    } else {
      if (doc_start == std::string_view::npos) doc_start = pos;
      doc_end = eol;
    }
    pos = eol + 1;
  }
  if (doc_start != std::string_view::npos) docs.push_back(text.substr(doc_start, doc_end - doc_start));
  return docs;
}

Sentence make_sentence(const std::string& doc_id, int sent_idx, const std::vector<std::string>& words) {
  Sentence s{doc_id, sent_idx, {}};
  s.tokens.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    s.tokens.push_back(make_token(doc_id, sent_idx, static_cast<int>(i), words[i]));
  }
  return s;
}

}  // namespace

Token make_token(std::string doc_id, int sent_idx, int tok_idx, std::string surface) {
  Token t;
  t.doc_id = std::move(doc_id);
  t.sent_idx = sent_idx;
  t.tok_idx = tok_idx;
  t.lowercased = ascii_lower(surface);
  t.char_len = utf8_length(surface);
  t.surface = std::move(surface);
  return t;
}

std::vector<std::string> Sentence::surfaces() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

Corpus::Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
  std::set<std::string> doc_ids;
  for (std::size_t d = 0; d < documents_.size(); ++d) {
    const auto& doc = documents_[d];
    if (!doc_ids.insert(doc.id).second) throw InputError("duplicate document id '" + doc.id + "'");
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      const auto& sent = doc.sentences[s];
      if (sent.doc_id != doc.id || sent.sent_idx != static_cast<int>(s)) {
        throw InputError("document '" + doc.id + "': sentence indices must be contiguous from 0");
      }
      if (sent.tokens.empty()) {
        throw InputError("sentence " + TokenId{doc.id, sent.sent_idx, 0}.to_string() + " is empty");
      }
      for (std::size_t t = 0; t < sent.tokens.size(); ++t) {
        const auto& tok = sent.tokens[t];
        if (tok.doc_id != doc.id || tok.sent_idx != sent.sent_idx || tok.tok_idx != static_cast<int>(t)) {
          throw InputError("token " + tok.id().to_string() + ": indices must be contiguous from 0");
        }
      }
      index_[sent.ref()] = {d, s};
    }
  }
}

std::size_t Corpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& d : documents_) n += d.sentences.size();
  return n;
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& d : documents_) {
    for (const auto& s : d.sentences) n += s.size();
  }
  return n;
}

const Sentence* Corpus::find(const SentenceRef& ref) const {
  const auto it = index_.find(ref);
  if (it == index_.end()) return nullptr;
  return &documents_[it->second.first].sentences[it->second.second];
}

const Sentence& Corpus::at(const SentenceRef& ref) const {
  const auto* s = find(ref);
  if (!s) throw InputError("unknown sentence (" + ref.doc_id + ", s" + std::to_string(ref.sent_idx) + ")");
  return *s;
}

const Document* Corpus::find_document(std::string_view doc_id) const {
  for (const auto& d : documents_) {
    if (d.id == doc_id) return &d;
  }
  return nullptr;
}

std::vector<const Sentence*> Corpus::sentences() const {
  std::vector<const Sentence*> out;
  for (const auto& d : documents_) {
    for (const auto& s : d.sentences) out.push_back(&s);
  }
  return out;
}

namespace {

void split_field(std::string_view field, std::vector<std::string>& out) {
  if (all_punct(field)) {
    out.emplace_back(field);
    return;
  }
  std::size_t lo = 0;
  std::size_t hi = field.size();
  while (lo < hi && is_punct(field[lo])) ++lo;
  while (hi > lo && is_punct(field[hi - 1])) --hi;
  for (std::size_t i = 0; i < lo; ++i) out.emplace_back(1, field[i]);
  out.emplace_back(field.substr(lo, hi - lo));
  for (std::size_t i = hi; i < field.size(); ++i) out.emplace_back(1, field[i]);
}

// Break after field i when it closes a sentence, the next field does not
// continue a run of terminators (". . ."), and the next word-bearing field
// starts with a capital. Punctuation-only fields in between (an opening
// quote split off by detokenize) go to the new sentence.
bool sentence_break(const std::vector<std::string_view>& fields, std::size_t i) {
  if (!ends_sentence(fields[i])) return false;
  if (all_punct(fields[i + 1]) && ends_sentence(fields[i + 1])) return false;
  for (std::size_t j = i + 1; j < fields.size(); ++j) {
    if (!all_punct(fields[j])) return starts_capital(fields[j]);
  }
  return false;
}

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  for (const auto field : split_whitespace(text)) split_field(field, out);
  return out;
}

Corpus tokenize(std::string_view raw_text) {
  std::vector<Document> docs;
  for (const auto doc_text : split_documents(raw_text)) {
    Document doc;
    doc.id = "d" + std::to_string(docs.size());
    const auto fields = split_whitespace(doc_text);
    std::vector<std::string> current;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      split_field(fields[i], current);
      if (i + 1 == fields.size() || sentence_break(fields, i)) {
        doc.sentences.push_back(make_sentence(doc.id, static_cast<int>(doc.sentences.size()), current));
        current.clear();
      }
    }
    if (!doc.sentences.empty()) docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs));
}

Corpus from_sentence_lines(std::string_view text) {
  std::vector<Document> docs;
  for (const auto doc_text : split_documents(text)) {
    Document doc;
    doc.id = "d" + std::to_string(docs.size());
    std::istringstream lines{std::string(doc_text)};
    std::string line;
    while (std::getline(lines, line)) {
      const auto fields = split_whitespace(line);
      if (fields.empty()) continue;
      std::vector<std::string> words(fields.begin(), fields.end());
      doc.sentences.push_back(make_sentence(doc.id, static_cast<int>(doc.sentences.size()), words));
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs));
}

std::string detokenize(const Corpus& corpus) {
  std::string out;
  for (std::size_t d = 0; d < corpus.documents().size(); ++d) {
    if (d > 0) out += "\n\n";
    bool first = true;
    for (const auto& sent : corpus.documents()[d].sentences) {
      for (const auto& tok : sent.tokens) {
        if (!first) out += ' ';
        out += tok.surface;
        first = false;
      }
    }
  }
  out += '\n';
  return out;
}

Corpus read_corpus_tsv(std::istream& in, const std::string& source) {
  tsv::Reader reader(in, source);
  reader.require_columns({"doc_id", "sent_idx", "tok_idx", "token"});
  std::vector<std::string> doc_order;
  std::map<std::string, std::map<int, std::map<int, std::string>>> rows;
  while (reader.next()) {
    const auto& doc = reader.field("doc_id");
    const int s = static_cast<int>(reader.integer("sent_idx"));
    const int t = static_cast<int>(reader.integer("tok_idx"));
    if (!rows.count(doc)) doc_order.push_back(doc);
    auto& slot = rows[doc][s];
    if (!slot.emplace(t, reader.field("token")).second) {
      reader.fail("duplicate token " + TokenId{doc, s, t}.to_string());
    }
  }
  std::vector<Document> docs;
  for (const auto& doc_id : doc_order) {
    Document doc{doc_id, {}};
    for (const auto& [s, toks] : rows[doc_id]) {
      Sentence sent{doc_id, s, {}};
      for (const auto& [t, surface] : toks) sent.tokens.push_back(make_token(doc_id, s, t, surface));
      doc.sentences.push_back(std::move(sent));
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs));
}

void write_corpus_tsv(std::ostream& out, const Corpus& corpus) {
  out << "doc_id\tsent_idx\ttok_idx\ttoken\n";
  for (const auto& doc : corpus.documents()) {
    for (const auto& sent : doc.sentences) {
      for (const auto& tok : sent.tokens) {
        out << tok.doc_id << '\t' << tok.sent_idx << '\t' << tok.tok_idx << '\t' << tok.surface << '\n';
      }
    }
  }
}

std::vector<ReadingRecord> read_reading_times_tsv(std::istream& in, const std::string& source) {
  tsv::Reader reader(in, source);
  reader.require_columns({"doc_id", "sent_idx", "tok_idx", "subject_id", "rt_ms", "fixated"});
  std::vector<ReadingRecord> out;
  while (reader.next()) {
    ReadingRecord r;
    r.subject_id = reader.field("subject_id");
    r.token = {reader.field("doc_id"), static_cast<int>(reader.integer("sent_idx")),
               static_cast<int>(reader.integer("tok_idx"))};
    const auto fix = reader.integer("fixated");
    if (fix != 0 && fix != 1) reader.fail("fixated must be 0 or 1");
    r.fixated = fix == 1;
    r.rt = reader.field("rt_ms").empty() ? 0.0 : reader.number("rt_ms");
    if (r.fixated && !(r.rt > 0.0)) reader.fail("fixated record must have rt_ms > 0");
    if (r.rt < 0.0) reader.fail("rt_ms must be >= 0");
    out.push_back(std::move(r));
  }
  return out;
}

void write_reading_times_tsv(std::ostream& out, std::span<const ReadingRecord> records) {
  out << "doc_id\tsent_idx\ttok_idx\tsubject_id\trt_ms\tfixated\n";
  for (const auto& r : records) {
    out << r.token.doc_id << '\t' << r.token.sent_idx << '\t' << r.token.tok_idx << '\t' << r.subject_id
        << '\t' << tsv::format_double(r.rt) << '\t' << (r.fixated ? 1 : 0) << '\n';
  }
}

OutlierResult remove_outliers(std::span<const ReadingRecord> records, double z_threshold) {
  OutlierResult result;
  std::vector<double> logs;
  for (const auto& r : records) {
    if (r.fixated) logs.push_back(std::log(r.rt));
  }
  if (logs.size() < 2) {
    result.kept.assign(records.begin(), records.end());
    return result;
  }
  // Sum in sorted order so the statistics do not depend on record order.
  std::sort(logs.begin(), logs.end());
  double sum = 0.0;
  for (double v : logs) sum += v;
  const double mean = sum / static_cast<double>(logs.size());
  double ss = 0.0;
  for (double v : logs) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(logs.size()));

  if (sd > 0.0) {
    for (const auto& r : records) {
      if (!r.fixated) continue;
      const double z = (std::log(r.rt) - mean) / sd;
      if (std::abs(z) > z_threshold) {
        ++result.outlier_words;
        result.dropped.insert({r.subject_id, r.token.sentence()});
      }
    }
  }
  for (const auto& r : records) {
    if (!result.dropped.count({r.subject_id, r.token.sentence()})) result.kept.push_back(r);
  }
  return result;
}

std::optional<SentenceReading> sentence_rt(std::span<const ReadingRecord> records,
                                           const std::string& subject_id, const SentenceRef& sentence) {
  SentenceReading out{subject_id, sentence, 0.0, 0};
  for (const auto& r : records) {
    if (r.fixated && r.subject_id == subject_id && r.token.sentence() == sentence) {
      out.total_rt += r.rt;
      ++out.fixated_count;
    }
  }
  if (out.fixated_count == 0) return std::nullopt;
  return out;
}

SentenceReadingTable aggregate_sentence_rts(std::span<const ReadingRecord> records) {
  std::map<SubjectSentence, SentenceReading> acc;
  for (const auto& r : records) {
    const SubjectSentence key{r.subject_id, r.token.sentence()};
    auto [it, inserted] = acc.try_emplace(key, SentenceReading{r.subject_id, key.sentence, 0.0, 0});
    if (r.fixated) {
      it->second.total_rt += r.rt;
      ++it->second.fixated_count;
    }
  }
  SentenceReadingTable table;
  for (auto& [key, reading] : acc) {
    if (reading.fixated_count == 0) {
      table.no_fixations.push_back(key);
    } else {
      table.rows.push_back(std::move(reading));
    }
  }
  return table;
}

double AcceptabilityRecord::rescaled() const {
  if (scheme == RatingScheme::binary) return label;
  return (label - scale_min) / (scale_max - scale_min);
}

std::vector<AcceptabilityRecord> read_acceptability_tsv(std::istream& in, const std::string& source) {
  tsv::Reader reader(in, source);
  reader.require_columns({"doc_id", "sent_idx", "label", "scheme"});
  std::vector<AcceptabilityRecord> out;
  while (reader.next()) {
    AcceptabilityRecord r;
    r.sentence = {reader.field("doc_id"), static_cast<int>(reader.integer("sent_idx"))};
    r.label = reader.number("label");
    const auto& scheme = reader.field("scheme");
    if (scheme == "binary") {
      r.scheme = RatingScheme::binary;
      if (r.label != 0.0 && r.label != 1.0) reader.fail("binary label must be 0 or 1");
    } else if (scheme == "graded" || scheme.rfind("graded:", 0) == 0) {
      r.scheme = RatingScheme::graded;
      r.scale_min = 1.0;
      r.scale_max = 4.0;
      if (scheme != "graded") {
        const auto parts = tsv::split(scheme, ':');
        if (parts.size() != 3) reader.fail("scheme must be graded:LO:HI");
        try {
          r.scale_min = std::stod(parts[1]);
          r.scale_max = std::stod(parts[2]);
        } catch (const std::exception&) {
          reader.fail("scheme bounds are not numbers: '" + scheme + "'");
        }
      }
      if (!(r.scale_max > r.scale_min)) reader.fail("graded scale needs HI > LO");
      if (r.label < r.scale_min || r.label > r.scale_max) reader.fail("graded score outside scale bounds");
    } else {
      reader.fail("unknown scheme '" + scheme + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace uidkit
