#include "uidkit/ngram_lm.hpp"

#include <algorithm>
#include <boost/container_hash/hash.hpp>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "uidkit/error.hpp"
#include "uidkit/tsv.hpp"

namespace uidkit {

Discounts modified_kn_discounts(std::uint64_t n1, std::uint64_t n2, std::uint64_t n3, std::uint64_t n4) {
  Discounts d;
  if (n1 == 0 || n2 == 0 || n3 == 0) {
    d.d1 = d.d2 = d.d3plus = 0.75;
    d.fallback = true;
    return d;
  }
  const double y = static_cast<double>(n1) / (static_cast<double>(n1) + 2.0 * static_cast<double>(n2));
  auto discount = [y](double i, double ni, double ni1) {
    return std::clamp(i - (i + 1.0) * y * ni1 / ni, 0.0, i);
  };
  d.d1 = discount(1.0, static_cast<double>(n1), static_cast<double>(n2));
  d.d2 = discount(2.0, static_cast<double>(n2), static_cast<double>(n3));
  d.d3plus = discount(3.0, static_cast<double>(n3), static_cast<double>(n4));
  return d;
}

std::size_t NGramModel::KeyHash::operator()(const Key& k) const noexcept {
  std::size_t seed = k.len;
  for (std::uint8_t i = 0; i < k.len; ++i) boost::hash_combine(seed, k.ids[i]);
  return seed;
}

NGramModel::Key NGramModel::make_key(std::span<const WordId> ids) {
  Key k;
  k.len = static_cast<std::uint8_t>(ids.size());
  std::copy(ids.begin(), ids.end(), k.ids.begin());
  return k;
}

NGramModel NGramModel::train(const Corpus& corpus, int order, int unk_threshold) {
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(corpus.sentence_count());
  for (const auto* s : corpus.sentences()) sentences.push_back(s->surfaces());
  return train(sentences, order, unk_threshold);
}

NGramModel NGramModel::train(std::span<const std::vector<std::string>> sentences, int order,
                             int unk_threshold) {
  if (order < 1 || order > kMaxOrder) throw DomainError("n-gram order must be in [1, 5]");
  if (sentences.empty()) throw DomainError("cannot train a language model on an empty corpus");

  std::map<std::string, std::uint64_t> freq;
  for (const auto& sent : sentences) {
    for (const auto& w : sent) ++freq[w];
  }

  NGramModel m;
  m.order_ = order;
  m.unk_threshold_ = unk_threshold;
  m.words_ = {std::string(kBos), std::string(kEos), std::string(kUnk)};
  for (const auto& [w, c] : freq) {
    if (w == kBos || w == kEos || w == kUnk) continue;
    if (c >= static_cast<std::uint64_t>(std::max(unk_threshold, 1))) m.words_.push_back(w);
  }
  for (WordId i = 0; i < m.words_.size(); ++i) m.index_.emplace(m.words_[i], i);

  // raw[n-1]: every n-gram ending at a predicted position of <s> w1 .. wN </s>.
  std::vector<std::map<std::vector<WordId>, std::uint64_t>> raw(static_cast<std::size_t>(order));
  std::vector<WordId> seq;
  for (const auto& sent : sentences) {
    seq.assign(1, kBosId);
    for (const auto& w : sent) seq.push_back(m.id(w));
    seq.push_back(kEosId);
    for (std::size_t i = 1; i < seq.size(); ++i) {
      for (int n = 1; n <= order; ++n) {
        if (static_cast<int>(i) - n + 1 < 0) break;
        ++raw[static_cast<std::size_t>(n - 1)][std::vector<WordId>(seq.begin() + static_cast<long>(i) - n + 1,
                                                                  seq.begin() + static_cast<long>(i) + 1)];
      }
    }
  }

  // Lower orders use continuation counts N1+(. g); n-grams that start with
  // <s> have no left extension and keep their raw counts.
  m.levels_.assign(static_cast<std::size_t>(order), {});
  for (int n = order; n >= 1; --n) {
    const auto& level_raw = raw[static_cast<std::size_t>(n - 1)];
    std::map<std::vector<WordId>, std::uint64_t> adjusted;
    if (n == order) {
      adjusted = level_raw;
    } else {
      for (const auto& [g, c] : level_raw) {
        if (g.front() == kBosId) adjusted[g] = c;
      }
      for (const auto& [longer, c] : raw[static_cast<std::size_t>(n)]) {
        std::vector<WordId> suffix(longer.begin() + 1, longer.end());
        ++adjusted[suffix];
      }
    }
    for (const auto& [g, c] : adjusted) m.add_count(n, make_key(g), c);
  }

  m.discounts_.assign(static_cast<std::size_t>(order), {});
  for (int n = 1; n <= order; ++n) {
    std::array<std::uint64_t, 5> coc{};
    for (const auto& [ctx, entry] : m.levels_[static_cast<std::size_t>(n - 1)]) {
      for (const auto& [w, c] : entry.counts) {
        if (c <= 4) ++coc[c];
      }
    }
    m.discounts_[static_cast<std::size_t>(n - 1)] = modified_kn_discounts(coc[1], coc[2], coc[3], coc[4]);
  }
  m.finalize();
  return m;
}

void NGramModel::add_count(int n, const Key& ngram, std::uint64_t count) {
  Key ctx = ngram;
  ctx.len = static_cast<std::uint8_t>(n - 1);
  ctx.ids[static_cast<std::size_t>(n - 1)] = 0;
  auto& entry = levels_[static_cast<std::size_t>(n - 1)][ctx];
  entry.counts[ngram.ids[static_cast<std::size_t>(n - 1)]] += count;
}

void NGramModel::finalize() {
  for (auto& level : levels_) {
    for (auto& [ctx, entry] : level) {
      entry.total = entry.n1 = entry.n2 = entry.n3plus = 0;
      for (const auto& [w, c] : entry.counts) {
        entry.total += c;
        if (c == 1) {
          ++entry.n1;
        } else if (c == 2) {
          ++entry.n2;
        } else if (c >= 3) {
          ++entry.n3plus;
        }
      }
    }
  }
}

std::vector<WordId> NGramModel::predictable_ids() const {
  std::vector<WordId> out;
  for (WordId i = 1; i < words_.size(); ++i) out.push_back(i);
  return out;
}

WordId NGramModel::id(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end() || it->second == kBosId || it->second == kEosId) return kUnkId;
  return it->second;
}

std::vector<WordId> NGramModel::ids(std::span<const std::string> words) const {
  std::vector<WordId> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

double NGramModel::prob(std::span<const WordId> context, WordId word) const {
  if (word == kBosId || word >= words_.size()) throw DomainError("word id is not predictable");
  const std::size_t usable = std::min(context.size(), static_cast<std::size_t>(order_ - 1));
  const auto ctx = context.subspan(context.size() - usable);

  double p = 1.0 / static_cast<double>(vocab_size());
  for (std::size_t n = 1; n <= usable + 1; ++n) {
    const auto it = levels_[n - 1].find(make_key(ctx.subspan(ctx.size() - (n - 1))));
    if (it == levels_[n - 1].end()) continue;
    const auto& e = it->second;
    const auto& d = discounts_[n - 1];
    const auto cit = e.counts.find(word);
    const std::uint64_t c = cit == e.counts.end() ? 0 : cit->second;
    const double total = static_cast<double>(e.total);
    const double backoff = (d.d1 * static_cast<double>(e.n1) + d.d2 * static_cast<double>(e.n2) +
                            d.d3plus * static_cast<double>(e.n3plus)) /
                           total;
    p = std::max(static_cast<double>(c) - d(c), 0.0) / total + backoff * p;
  }
  return p;
}

double NGramModel::prob(const std::vector<std::string>& context, const std::string& word) const {
  std::vector<WordId> ctx;
  ctx.reserve(context.size());
  for (const auto& w : context) ctx.push_back(w == kBos ? kBosId : id(w));
  return prob(ctx, word == kEos ? kEosId : id(word));
}

std::vector<double> NGramModel::token_surprisals(std::span<const std::string> words, bool include_eos) const {
  std::vector<WordId> history{kBosId};
  std::vector<double> out;
  out.reserve(words.size() + 1);
  for (const auto& w : words) {
    const WordId wid = id(w);
    out.push_back(-std::log(prob(history, wid)));
    history.push_back(wid);
  }
  if (include_eos) out.push_back(-std::log(prob(history, kEosId)));
  return out;
}

double NGramModel::sequence_neg_log_prob(std::span<const std::string> words, bool include_eos) const {
  double total = 0.0;
  for (double s : token_surprisals(words, include_eos)) total += s;
  return total;
}

bool NGramModel::used_fallback_discount() const {
  return std::any_of(discounts_.begin(), discounts_.end(), [](const Discounts& d) { return d.fallback; });
}

void NGramModel::save(std::ostream& out) const {
  out << "uidkit-ngram 1\n";
  out << "order " << order_ << "\n";
  out << "unk_threshold " << unk_threshold_ << "\n";
  for (int n = 1; n <= order_; ++n) {
    const auto& d = discounts(n);
    out << "discounts " << n << ' ' << tsv::format_double(d.d1) << ' ' << tsv::format_double(d.d2) << ' '
        << tsv::format_double(d.d3plus) << ' ' << (d.fallback ? 1 : 0) << "\n";
  }
  out << "vocab " << words_.size() << "\n";
  for (const auto& w : words_) out << w << "\n";
  for (int n = 1; n <= order_; ++n) {
    std::vector<std::pair<std::vector<WordId>, std::uint64_t>> rows;
    for (const auto& [ctx, entry] : levels_[static_cast<std::size_t>(n - 1)]) {
      for (const auto& [w, c] : entry.counts) {
        std::vector<WordId> g(ctx.ids.begin(), ctx.ids.begin() + ctx.len);
        g.push_back(w);
        rows.emplace_back(std::move(g), c);
      }
    }
    std::sort(rows.begin(), rows.end());
    out << "ngrams " << n << ' ' << rows.size() << "\n";
    for (const auto& [g, c] : rows) {
      for (WordId w : g) out << w << ' ';
      out << c << "\n";
    }
  }
  out << "end\n";
}

NGramModel NGramModel::load(std::istream& in) {
  auto fail = [](const std::string& what) -> void { throw InputError("n-gram model file: " + what); };
  std::string line;
  std::string tag;
  int version = 0;
  if (!std::getline(in, line) || !(std::istringstream(line) >> tag >> version) || tag != "uidkit-ngram") {
    fail("bad magic line");
  }
  if (version != 1) fail("unsupported format version " + std::to_string(version));

  NGramModel m;
  auto expect = [&](const std::string& key) -> std::istringstream {
    if (!std::getline(in, line)) fail("unexpected end of file, wanted '" + key + "'");
    std::istringstream ss(line);
    std::string got;
    ss >> got;
    if (got != key) fail("expected '" + key + "', got '" + got + "'");
    return ss;
  };
  expect("order") >> m.order_;
  if (m.order_ < 1 || m.order_ > kMaxOrder) fail("order out of range");
  expect("unk_threshold") >> m.unk_threshold_;
  m.discounts_.resize(static_cast<std::size_t>(m.order_));
  for (int n = 1; n <= m.order_; ++n) {
    auto ss = expect("discounts");
    int got_n = 0;
    std::string d1, d2, d3;
    int fb = 0;
    ss >> got_n >> d1 >> d2 >> d3 >> fb;
    if (got_n != n || !ss) fail("bad discounts line");
    m.discounts_[static_cast<std::size_t>(n - 1)] = {std::stod(d1), std::stod(d2), std::stod(d3), fb != 0};
  }
  std::size_t vocab = 0;
  expect("vocab") >> vocab;
  for (std::size_t i = 0; i < vocab; ++i) {
    if (!std::getline(in, line)) fail("truncated vocabulary");
    m.words_.push_back(line);
    m.index_.emplace(line, static_cast<WordId>(i));
  }
  if (m.words_.size() < 3 || m.words_[kBosId] != kBos || m.words_[kEosId] != kEos || m.words_[kUnkId] != kUnk) {
    fail("vocabulary must start with <s> </s> <unk>");
  }
  m.levels_.assign(static_cast<std::size_t>(m.order_), {});
  for (int n = 1; n <= m.order_; ++n) {
    auto ss = expect("ngrams");
    int got_n = 0;
    std::size_t rows = 0;
    ss >> got_n >> rows;
    if (got_n != n) fail("n-gram sections out of order");
    std::vector<WordId> g(static_cast<std::size_t>(n));
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) fail("truncated n-gram section");
      std::istringstream row(line);
      std::uint64_t c = 0;
      for (auto& w : g) row >> w;
      row >> c;
      if (!row || std::any_of(g.begin(), g.end(), [&](WordId w) { return w >= m.words_.size(); })) {
        fail("bad n-gram row '" + line + "'");
      }
      m.add_count(n, make_key(g), c);
    }
  }
  expect("end");
  m.finalize();
  return m;
}

// ---------------------------------------------------------------------------

UnigramModel UnigramModel::train(const Corpus& corpus, int unk_threshold) {
  std::vector<std::string> tokens;
  for (const auto* s : corpus.sentences()) {
    for (const auto& t : s->tokens) tokens.push_back(t.lowercased);
  }
  return train(tokens, unk_threshold);
}

UnigramModel UnigramModel::train(std::span<const std::string> tokens, int unk_threshold) {
  std::unordered_map<std::string, double> freq;
  for (const auto& t : tokens) {
    std::string lower = t;
    for (auto& c : lower) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    freq[lower] += 1.0;
  }
  UnigramModel m;
  m.unk_count_ = 0.5;
  for (const auto& [w, c] : freq) {
    if (c >= static_cast<double>(unk_threshold)) {
      m.counts_.emplace(w, c);
    } else {
      m.unk_count_ += c;
    }
  }
  m.total_ = m.unk_count_;
  for (const auto& [w, c] : m.counts_) m.total_ += c;
  return m;
}

double UnigramModel::prob(std::string_view word) const {
  std::string lower(word);
  for (auto& c : lower) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  const auto it = counts_.find(lower);
  return (it == counts_.end() ? unk_count_ : it->second) / total_;
}

double UnigramModel::log_prob(std::string_view word) const { return std::log(prob(word)); }

double UnigramModel::total_mass() const {
  double mass = unk_count_ / total_;
  for (const auto& [w, c] : counts_) mass += c / total_;
  return mass;
}

// ---------------------------------------------------------------------------

SurprisalProfile surprisal(const NGramModel& model, const Sentence& sentence) {
  SurprisalProfile p;
  p.sentence = sentence.ref();
  p.source = SurprisalSource::ngram;
  p.model_tag = "ngram-o" + std::to_string(model.order());
  p.s = model.token_surprisals(sentence.surfaces(), true);
  p.eos = p.s.back();
  p.s.pop_back();
  return p;
}

SurprisalSet surprisals(const NGramModel& model, const Corpus& corpus) {
  SurprisalSet out;
  for (const auto* s : corpus.sentences()) out.emplace(s->ref(), surprisal(model, *s));
  return out;
}

double perplexity(const NGramModel& model, const Corpus& heldout) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto* s : heldout.sentences()) {
    for (double v : model.token_surprisals(s->surfaces(), true)) {
      total += v;
      ++count;
    }
  }
  if (count == 0) throw DomainError("perplexity of an empty held-out set is undefined");
  return std::exp(total / static_cast<double>(count));
}

void write_surprisal_tsv(std::ostream& out, const Corpus& corpus, const SurprisalSet& profiles,
                         const std::string& model_tag, bool pseudo) {
  out << "# model=" << model_tag << " pseudo=" << (pseudo ? 1 : 0) << " units=nats\n";
  out << "doc_id\tsent_idx\ttok_idx\ttoken\tsurprisal_nats\n";
  for (const auto* sent : corpus.sentences()) {
    const auto it = profiles.find(sent->ref());
    if (it == profiles.end()) continue;
    if (it->second.s.size() != sent->size()) {
      throw InputError("profile length mismatch for sentence " + TokenId{sent->doc_id, sent->sent_idx, 0}.to_string());
    }
    for (const auto& tok : sent->tokens) {
      out << tok.doc_id << '\t' << tok.sent_idx << '\t' << tok.tok_idx << '\t' << tok.surface << '\t'
          << tsv::format_double(it->second.s[static_cast<std::size_t>(tok.tok_idx)]) << '\n';
    }
  }
}

SurprisalSet load_external_surprisals(std::istream& in, const Corpus& corpus, const std::string& source) {
  tsv::Reader reader(in, source);
  reader.require_columns({"doc_id", "sent_idx", "tok_idx", "token", "surprisal_nats"});

  std::string model_tag = "external";
  bool pseudo = false;
  for (const auto& comment : reader.comments()) {
    std::istringstream ss(comment.substr(1));
    std::string kv;
    while (ss >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const auto key = kv.substr(0, eq);
      const auto value = kv.substr(eq + 1);
      if (key == "model") model_tag = value;
      if (key == "pseudo") pseudo = value == "1";
      if (key == "units" && value != "nats") throw InputError(source + ": surprisals must be in nats, got " + value);
    }
  }

  std::map<SentenceRef, std::vector<std::optional<double>>> cover;
  while (reader.next()) {
    const TokenId id{reader.field("doc_id"), static_cast<int>(reader.integer("sent_idx")),
                     static_cast<int>(reader.integer("tok_idx"))};
    const auto* sent = corpus.find(id.sentence());
    if (!sent || id.tok_idx < 0 || id.tok_idx >= static_cast<int>(sent->size())) {
      reader.fail("token " + id.to_string() + " is not in the corpus");
    }
    const auto& tok = sent->tokens[static_cast<std::size_t>(id.tok_idx)];
    if (reader.field("token") != tok.surface) {
      reader.fail("token " + id.to_string() + " is '" + reader.field("token") + "' but the corpus has '" +
                  tok.surface + "'");
    }
    const double value = reader.number("surprisal_nats");
    if (!(value >= 0.0) || !std::isfinite(value)) {
      reader.fail("token " + id.to_string() + " has invalid surprisal " + reader.field("surprisal_nats"));
    }
    auto& slots = cover[id.sentence()];
    slots.resize(sent->size());
    auto& slot = slots[static_cast<std::size_t>(id.tok_idx)];
    if (slot) reader.fail("token " + id.to_string() + " is covered more than once");
    slot = value;
  }

  SurprisalSet out;
  for (const auto* sent : corpus.sentences()) {
    const auto it = cover.find(sent->ref());
    if (it == cover.end()) continue;
    SurprisalProfile p;
    p.sentence = sent->ref();
    p.source = SurprisalSource::external;
    p.model_tag = model_tag;
    p.pseudo = pseudo;
    for (std::size_t t = 0; t < sent->size(); ++t) {
      if (!it->second[t]) {
        throw InputError(source + ": token " + sent->tokens[t].id().to_string() + " is missing");
      }
      p.s.push_back(*it->second[t]);
    }
    out.emplace(p.sentence, std::move(p));
  }
  return out;
}

}  // namespace uidkit
