#include <cmath>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "uidkit/ngram_lm.hpp"
#include "uidkit/random.hpp"

using namespace uidkit;
using testsupport::data_path;
using testsupport::read_file;

namespace {

std::vector<std::vector<std::string>> fixture_sentences() {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(read_file(data_path("kn_fixture.lines")));
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    std::vector<std::string> s;
    std::string w;
    while (words >> w) s.push_back(w);
    if (!s.empty()) out.push_back(s);
  }
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

double context_mass(const NGramModel& m, std::span<const WordId> ctx) {
  double total = 0.0;
  for (WordId w : m.predictable_ids()) total += m.prob(ctx, w);
  return total;
}

}  // namespace

TEST_CASE("discounts from counts-of-counts") {
  const auto d = modified_kn_discounts(10, 4, 2, 1);
  const double y = 10.0 / 18.0;
  CHECK(d.d1 == doctest::Approx(1 - 2 * y * 4 / 10.0));
  CHECK(d.d2 == doctest::Approx(2 - 3 * y * 2 / 4.0));
  CHECK(d.d3plus == doctest::Approx(3 - 4 * y * 1 / 2.0));
  CHECK_FALSE(d.fallback);

  const auto f = modified_kn_discounts(5, 0, 1, 1);
  CHECK(f.fallback);
  CHECK(f.d1 == 0.75);
  CHECK(f.d3plus == 0.75);
}

TEST_CASE("order-1 model on 'a a b' is normalized") {
  const std::vector<std::vector<std::string>> s{{"a", "a", "b"}};
  const auto m = NGramModel::train(s, 1);
  CHECK(context_mass(m, {}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.prob({}, m.id("a")) > m.prob({}, m.id("b")));
}

TEST_CASE("order-3 fixture matches the brute-force oracle table") {
  const auto m = NGramModel::train(fixture_sentences(), 3);
  std::istringstream in(read_file(data_path("kn_oracle.tsv")));
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  double worst = 0.0;
  while (std::getline(in, line)) {
    const auto tab1 = line.find('\t');
    const auto tab2 = line.find('\t', tab1 + 1);
    const std::string ctx_text = line.substr(0, tab1);
    const std::string word = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const double want = std::stod(line.substr(tab2 + 1));
    const auto ctx = ctx_text == "-" ? std::vector<std::string>{} : split_words(ctx_text);
    const double got = m.prob(ctx, word);
    worst = std::max(worst, std::fabs(got - want));
    ++rows;
  }
  CHECK(rows > 1000);
  CHECK(worst <= 1e-9);
}

TEST_CASE("fixture sentences match oracle log-probabilities") {
  const auto m = NGramModel::train(fixture_sentences(), 3);
  std::istringstream in(read_file(data_path("kn_oracle_sentences.tsv")));
  std::string line;
  std::getline(in, line);
  int n = 0;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    const auto words = split_words(line.substr(0, tab));
    const double want = std::stod(line.substr(tab + 1));
    CHECK(m.sequence_neg_log_prob(words, true) == doctest::Approx(want).epsilon(1e-12));
    ++n;
  }
  CHECK(n == 3);
}

TEST_CASE("every context is normalized and every probability positive") {
  const auto sents = fixture_sentences();
  for (int order = 1; order <= 5; ++order) {
    const auto m = NGramModel::train(sents, order);
    Rng rng(static_cast<std::uint64_t>(order));
    const auto ids = m.predictable_ids();
    for (int t = 0; t < 200; ++t) {
      std::vector<WordId> ctx{NGramModel::kBosId};
      const auto len = rng.index(6);
      for (std::size_t i = 0; i < len; ++i) ctx.push_back(ids[rng.index(ids.size())]);
      if (rng.bernoulli(0.5)) ctx.erase(ctx.begin());
      double total = 0.0;
      for (WordId w : ids) {
        const double p = m.prob(ctx, w);
        CHECK(p > 0.0);
        CHECK(p <= 1.0);
        total += p;
      }
      CHECK(std::fabs(total - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("rare words map to unk") {
  const auto sents = fixture_sentences();
  const auto m = NGramModel::train(sents, 3, 2);
  CHECK(m.id("zyx") == NGramModel::kUnkId);
  const std::vector<std::string> ctx{"the"};
  CHECK(m.prob(ctx, "zyx") == m.prob(ctx, std::string(kUnk)));
  CHECK(m.prob(ctx, "never-seen") == m.prob(ctx, "zyx"));
  const auto full = NGramModel::train(sents, 3, 1);
  CHECK(full.id("zyx") != NGramModel::kUnkId);
}

TEST_CASE("a deterministic context gives near-zero surprisal") {
  std::vector<std::vector<std::string>> s(200, std::vector<std::string>{"always", "the", "same"});
  const auto m = NGramModel::train(s, 3);
  const auto prof = m.token_surprisals(s[0], true);
  for (double v : prof) CHECK(v < 0.05);
}

TEST_CASE("sentence surprisals telescope to the sequence log-probability") {
  const auto sents = fixture_sentences();
  const auto m = NGramModel::train(sents, 3);
  for (const auto& s : sents) {
    const auto prof = m.token_surprisals(s, true);
    double sum = 0.0;
    for (double v : prof) sum += v;
    CHECK(sum == m.sequence_neg_log_prob(s, true));
    double chain = 0.0;
    std::vector<std::string> hist{std::string(kBos)};
    for (const auto& w : s) {
      chain += -std::log(m.prob(hist, w));
      hist.push_back(w);
    }
    chain += -std::log(m.prob(hist, std::string(kEos)));
    CHECK(chain == doctest::Approx(sum).epsilon(1e-13));
  }
}

TEST_CASE("surprisal profile covers every word and keeps EOS apart") {
  const auto c = from_sentence_lines(read_file(data_path("kn_fixture.lines")));
  const auto m = NGramModel::train(c, 3);
  const auto set = surprisals(m, c);
  REQUIRE(set.size() == c.sentence_count());
  for (const auto* s : c.sentences()) {
    const auto& p = set.at(s->ref());
    CHECK(p.size() == s->size());
    CHECK(p.eos.has_value());
    for (double v : p.s) CHECK(std::isfinite(v));
  }
}

TEST_CASE("perplexity") {
  const auto c = from_sentence_lines(read_file(data_path("kn_fixture.lines")));
  const auto m = NGramModel::train(c, 3);
  // exp of mean per-token surprisal, EOS included
  double total = 0.0;
  std::size_t n = 0;
  for (const auto* s : c.sentences()) {
    for (double v : m.token_surprisals(s->surfaces(), true)) {
      total += v;
      ++n;
    }
  }
  CHECK(perplexity(m, c) == doctest::Approx(std::exp(total / static_cast<double>(n))).epsilon(1e-12));

  // A held-out sentence equal to a training sentence.
  const auto one = from_sentence_lines("the cat sat on the mat\n");
  std::vector<std::vector<std::string>> train_s;
  for (const auto* s : c.sentences()) train_s.push_back(s->surfaces());
  train_s.push_back({"the", "cat", "sat", "on", "the", "mat"});
  const auto tri = NGramModel::train(train_s, 3);
  const auto uni = NGramModel::train(train_s, 1);
  CHECK(perplexity(tri, one) <= perplexity(uni, one));

  CHECK_THROWS_AS(perplexity(m, Corpus{}), Error);
}

TEST_CASE("uniform model has perplexity V") {
  // Equal counts for every predictable symbol: discounted mass plus the
  // redistributed mass is exactly 1/V for each word.
  std::istringstream file(
      "uidkit-ngram 1\norder 1\nunk_threshold 1\ndiscounts 1 0.75 0.75 0.75 1\n"
      "vocab 5\n<s>\n</s>\n<unk>\na\nb\n"
      "ngrams 1 4\n1 3\n2 3\n3 3\n4 3\nend\n");
  const auto m = NGramModel::load(file);
  REQUIRE(m.vocab_size() == 4);
  for (WordId w : m.predictable_ids()) CHECK(m.prob(std::span<const WordId>{}, w) == doctest::Approx(0.25).epsilon(1e-15));
  const auto held = from_sentence_lines("a b a\nb zzz\n");
  CHECK(perplexity(m, held) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("save and load round-trip") {
  const auto sents = fixture_sentences();
  const auto m = NGramModel::train(sents, 4, 2);
  std::stringstream ss;
  m.save(ss);
  const auto back = NGramModel::load(ss);
  CHECK(back.order() == 4);
  CHECK(back.unk_threshold() == 2);
  CHECK(back.vocab_size() == m.vocab_size());
  for (const auto& s : sents) CHECK(back.token_surprisals(s, true) == m.token_surprisals(s, true));
}

TEST_CASE("training preconditions") {
  const std::vector<std::vector<std::string>> s{{"a"}};
  CHECK_THROWS_AS(NGramModel::train(s, 0), DomainError);
  CHECK_THROWS_AS(NGramModel::train(s, 6), DomainError);
  CHECK_THROWS_AS(NGramModel::train(std::vector<std::vector<std::string>>{}, 3), DomainError);
}

TEST_CASE("unigram model is normalized over lowercased forms") {
  const auto c = tokenize("The cat. the Cat sat. A dog!");
  const auto u = UnigramModel::train(c);
  CHECK(u.total_mass() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(u.prob("the") == u.prob("THE"));
  CHECK(u.prob("the") > u.prob("dog"));
  CHECK(u.prob("unseen") == u.unk_prob());
  CHECK(u.log_prob("cat") == doctest::Approx(std::log(u.prob("cat"))));
}

// ---------------------------------------------------------------------------
// Exchange format

TEST_CASE("exchange file round-trip") {
  const auto c = from_sentence_lines(read_file(data_path("kn_fixture.lines")));
  const auto m = NGramModel::train(c, 3);
  const auto set = surprisals(m, c);
  std::stringstream ss;
  write_surprisal_tsv(ss, c, set, "kn3", false);
  CHECK(ss.str().rfind("# model=kn3 pseudo=0 units=nats\n", 0) == 0);
  const auto back = load_external_surprisals(ss, c);
  REQUIRE(back.size() == set.size());
  for (const auto& [ref, p] : set) {
    CHECK(back.at(ref).s == p.s);
    CHECK(back.at(ref).model_tag == "kn3");
    CHECK(back.at(ref).source == SurprisalSource::external);
    CHECK_FALSE(back.at(ref).pseudo);
  }
}

TEST_CASE("exchange file validation names the offending token") {
  const auto c = from_sentence_lines("a b c d\n");
  const std::string head = "doc_id\tsent_idx\ttok_idx\ttoken\tsurprisal_nats\n";
  std::istringstream missing(head + "d0\t0\t0\ta\t1\nd0\t0\t1\tb\t1\nd0\t0\t3\td\t1\n");
  try {
    load_external_surprisals(missing, c);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("(d0, s0, t2)") != std::string::npos);
  }
  std::istringstream dup(head + "d0\t0\t0\ta\t1\nd0\t0\t1\tb\t1\nd0\t0\t1\tb\t1\nd0\t0\t2\tc\t1\nd0\t0\t3\td\t1\n");
  try {
    load_external_surprisals(dup, c);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("(d0, s0, t1)") != std::string::npos);
  }
  std::istringstream negative(head + "d0\t0\t0\ta\t1\nd0\t0\t1\tb\t-0.5\nd0\t0\t2\tc\t1\nd0\t0\t3\td\t1\n");
  CHECK_THROWS_AS(load_external_surprisals(negative, c), InputError);
  std::istringstream surface(head + "d0\t0\t0\ta\t1\nd0\t0\t1\tX\t1\nd0\t0\t2\tc\t1\nd0\t0\t3\td\t1\n");
  CHECK_THROWS_AS(load_external_surprisals(surface, c), InputError);
  std::istringstream subword(head + "d0\t0\t0\ta\t1\nd0\t0\t1a\tb\t1\nd0\t0\t1b\tb\t1\nd0\t0\t2\tc\t1\n");
  CHECK_THROWS_AS(load_external_surprisals(subword, c), InputError);
}

TEST_CASE("pre-summed subword rows load as single word values") {
  std::istringstream corpus_in(read_file(data_path("subword_corpus.tsv")));
  const auto c = read_corpus_tsv(corpus_in);
  std::istringstream ex(read_file(data_path("subword_exchange.tsv")));
  const auto set = load_external_surprisals(ex, c);
  REQUIRE(set.size() == 5);
  CHECK(set.at({"d0", 0}).s[1] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(set.at({"d0", 0}).model_tag == "fixture-bpe");

  // Hand-sum the per-piece debug rows and compare every word.
  std::istringstream pieces(read_file(data_path("subword_pieces.tsv")));
  std::string line;
  std::getline(pieces, line);
  std::map<std::pair<int, int>, double> sums;
  while (std::getline(pieces, line)) {
    std::istringstream f(line);
    std::string doc, tok, piece;
    int sent = 0;
    double v = 0;
    f >> doc >> sent >> tok >> piece >> v;
    sums[{sent, std::stoi(tok)}] += v;
  }
  std::size_t words = 0;
  for (const auto& [key, v] : sums) {
    CHECK(set.at({"d0", key.first}).s.at(static_cast<std::size_t>(key.second)) == doctest::Approx(v).epsilon(1e-9));
    ++words;
  }
  CHECK(words == c.token_count());
}
