// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Seeds are fixed; nothing here is tuned per run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uidkit/effort.hpp"
#include "uidkit/error.hpp"
#include "uidkit/ngram_lm.hpp"
#include "uidkit/pipeline.hpp"
#include "uidkit/random.hpp"
#include "uidkit/regression.hpp"
#include "uidkit/synthetic.hpp"
#include "uidkit/tsv.hpp"
#include "uidkit/uid_metrics.hpp"

using namespace uidkit;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (!out.pass) ++failures;
  std::printf("%s  %-28s %7.2fs  %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), secs, out.detail.c_str());
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// --- Independent metric evaluator (long double, textbook loops) -------------

using Ld = long double;

Ld o_mean(const std::vector<double>& s) {
  Ld t = 0;
  for (double v : s) t += v;
  return t / s.size();
}
Ld o_super(const std::vector<double>& s, double k) {
  Ld t = 0;
  for (double v : s) t += std::pow(static_cast<Ld>(v), static_cast<Ld>(k));
  return t / s.size();
}
Ld o_var(const std::vector<double>& s, Ld mu) {
  Ld t = 0;
  for (double v : s) t += (v - mu) * (v - mu);
  return t / s.size();
}
Ld o_abs(const std::vector<double>& s, Ld mu) {
  Ld t = 0;
  for (double v : s) t += std::fabs(v - mu);
  return t / s.size();
}
Ld o_local(const std::vector<double>& s, bool squared) {
  if (s.size() < 2) return 0;
  Ld t = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const Ld d = static_cast<Ld>(s[i]) - s[i - 1];
    t += squared ? d * d : std::fabs(d);
  }
  return t / (s.size() - 1);
}
Ld o_max(const std::vector<double>& s) {
  Ld m = s[0];
  for (double v : s) m = std::max<Ld>(m, v);
  return m;
}
// Throws when undefined, mirroring the contract.
Ld o_entropy(const std::vector<double>& s, double k) {
  Ld total = 0;
  for (double v : s) total += v;
  if (total <= 0) throw DomainError("zero profile");
  Ld h = 0;
  if (k == 1.0) {
    for (double v : s) {
      const Ld p = v / total;
      if (p > 0) h -= p * std::log(p);
    }
  } else {
    Ld acc = 0;
    for (double v : s) {
      const Ld p = v / total;
      if (p > 0) acc += std::pow(p, static_cast<Ld>(k));
    }
    h = std::log(acc) / (1 - static_cast<Ld>(k));
  }
  if (k < 1.0) return h;
  if (h <= 0) throw DomainError("degenerate");
  return 1 / h;
}

bool close_rel(double got, Ld want, double tol) {
  const Ld scale = std::max<Ld>(std::fabs(want), 1e-300L);
  return std::fabs(static_cast<Ld>(got) - want) <= tol * scale || (want == 0 && std::fabs(got) <= 1e-300);
}

// --- Shared synthetic study ---------------------------------------------------

const synthetic::Study& study() {
  static const synthetic::Study s = [] {
    synthetic::StudyOptions opts;
    opts.documents = 60;
    opts.sentences_per_document = 45;
    return synthetic::make_study(20240611, opts);
  }();
  return s;
}

pipeline::ExperimentConfig study_config() {
  pipeline::ExperimentConfig c;
  c.ngram = pipeline::NgramSettings{3, 1};
  c.seed = 7;
  c.workers = 1;
  return c;
}

pipeline::ExperimentData study_data(bool word_level) {
  const auto& s = study();
  pipeline::ExperimentData d;
  d.corpus = s.corpus;
  d.profiles = s.profiles;
  d.source_tag = "ngram:order=3:unk=1";
  d.language_mean = s.language_mean;
  d.language_mean_source = "reference_corpus";
  d.unigram = UnigramModel::train(s.lm_corpus);
  if (word_level) {
    d.reading = remove_outliers(s.word_reading).kept;
  } else {
    auto kept = remove_outliers(s.sentence_reading);
    d.reading = std::move(kept.kept);
    d.dropped_pairs = kept.dropped.size();
    d.acceptability = s.acceptability;
  }
  return d;
}

const pipeline::Report& k_sweep() {
  static const pipeline::Report r = [] {
    auto config = study_config();
    return pipeline::run_k_sweep(config, study_data(false));
  }();
  return r;
}

}  // namespace

int main() {
  std::printf("uidkit acceptance suite\n");

  report("jensen_uniformity", [] {
    const auto start = Clock::now();
    Rng rng(101);
    const double convex[] = {1.25, 1.5, 2.0, 3.0};
    const double concave[] = {0.25, 0.5};
    int bad = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100; ++i) {
      const auto n = static_cast<std::size_t>(2 + rng.index(19));
      const double s = 50.0 * (1.0 - rng.uniform());  // (0, 50]
      const double k = convex[rng.index(4)];
      const auto check = verify_uniform_minimizer(n, s, k, 1000, 1000 + static_cast<std::uint64_t>(i));
      worst = std::min(worst, check.worst_margin);
      bad += check.passed ? 0 : 1;
      // Jensen bound on fresh samples, equality only at the uniform profile.
      Rng local(5000 + static_cast<std::uint64_t>(i));
      std::vector<double> p(n);
      for (int t = 0; t < 50; ++t) {
        double sum = 0.0;
        for (auto& v : p) sum += (v = local.exponential());
        for (auto& v : p) v *= s / sum;
        const double lhs = effort(p, {k, 0.0}).information;
        const double rhs = static_cast<double>(n) * std::pow(s / static_cast<double>(n), k);
        if (lhs < rhs * (1.0 - 1e-12)) ++bad;
      }
      const std::vector<double> flat(n, s / static_cast<double>(n));
      const double eq = effort(flat, {k, 0.0}).information;
      const double rhs = static_cast<double>(n) * std::pow(s / static_cast<double>(n), k);
      if (std::abs(eq - rhs) > 1e-9 * std::max(1.0, rhs)) ++bad;
    }
    for (int i = 0; i < 100; ++i) {
      const auto n = static_cast<std::size_t>(2 + rng.index(19));
      const double s = 50.0 * (1.0 - rng.uniform());
      const double k = concave[rng.index(2)];
      bad += verify_uniform_minimizer(n, s, k, 1000, 9000 + static_cast<std::uint64_t>(i)).passed ? 0 : 1;
    }
    const double secs = seconds_since(start);
    return Outcome{bad == 0 && secs < 10.0, std::to_string(bad) + " violations, worst convex margin " +
                                                fmt("%.3g", worst) + ", " + fmt("%.2fs < 10s", secs)};
  });

  report("optimal_length", [] {
    const auto start = Clock::now();
    Rng rng(202);
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
      const double k = rng.uniform(1.05, 4.0);
      const double c = rng.uniform(0.05, 5.0);
      const double scale = std::pow((k - 1.0) / c, 1.0 / k);
      const double s = rng.uniform(0.01, 9000.0 / scale);
      const EffortParams params{k, c};
      const auto analytic = optimal_length(s, params);
      // Exhaustive oracle over N in [1, 10^4], evaluated independently.
      double best = std::numeric_limits<double>::infinity();
      std::vector<std::int64_t> argmin;
      for (std::int64_t n = 1; n <= 10000; ++n) {
        const double dn = static_cast<double>(n);
        const double v = std::pow(s, k) / std::pow(dn, k - 1.0) + c * dn;
        if (v < best) {
          best = v;
          argmin = {n};
        } else if (v == best) {
          argmin.push_back(n);
        }
      }
      const auto lo = static_cast<std::int64_t>(std::floor(analytic.n_star));
      const auto hi = static_cast<std::int64_t>(std::ceil(analytic.n_star));
      for (auto n : argmin) {
        const bool in_set = n == lo || n == hi;
        const bool reported =
            std::find(analytic.integer.begin(), analytic.integer.end(), n) != analytic.integer.end();
        if (!in_set || !reported) ++bad;
      }
    }
    const double secs = seconds_since(start);
    return Outcome{bad == 0 && secs < 5.0, std::to_string(bad) + " mismatches over 100 draws, " +
                                               fmt("%.2fs < 5s", secs)};
  });

  report("lm_normalization", [] {
    const auto start = Clock::now();
    synthetic::TextSource source(303);
    const auto corpus = source.corpus(10, 100);  // 1000 sentences
    const auto heldout = source.corpus(2, 100);
    const auto lm5 = NGramModel::train(corpus, 5);
    const auto lm1 = NGramModel::train(corpus, 1);
    const auto ids = lm5.predictable_ids();
    Rng rng(304);
    std::vector<std::vector<WordId>> contexts;
    const auto sents = corpus.sentences();
    while (contexts.size() < 1000) {
      std::vector<WordId> ctx{NGramModel::kBosId};
      if (contexts.size() % 2 == 0) {
        // Seen history: a prefix of a training sentence.
        const auto& s = *sents[rng.index(sents.size())];
        const auto len = rng.index(s.size());
        for (std::size_t t = 0; t < len; ++t) ctx.push_back(lm5.id(s.tokens[t].surface));
      } else {
        // Arbitrary history, mostly unseen.
        ctx.clear();
        const auto len = 1 + rng.index(4);
        for (std::size_t t = 0; t < len; ++t) ctx.push_back(ids[rng.index(ids.size())]);
      }
      contexts.push_back(std::move(ctx));
    }
    double worst = 0.0;
    for (const auto& ctx : contexts) {
      double total = 0.0;
      for (auto w : ids) total += lm5.prob(ctx, w);
      worst = std::max(worst, std::abs(total - 1.0));
    }
    const double ppl5 = perplexity(lm5, heldout);
    const double ppl1 = perplexity(lm1, heldout);
    const double secs = seconds_since(start);
    return Outcome{worst <= 1e-6 && ppl5 < ppl1 && secs < 30.0,
                   "max |sum-1| " + fmt("%.2e", worst) + ", ppl order5 " + fmt("%.3f", ppl5) + " < order1 " +
                       fmt("%.3f", ppl1) + ", " + fmt("%.2fs < 30s", secs)};
  });

  report("metric_oracle", [] {
    Rng rng(404);
    int bad = 0, identity_bad = 0, checked = 0;
    const double ks[] = {0.25, 0.5, 1.0, 1.5, 2.0, 3.0};
    for (int i = 0; i < 500; ++i) {
      const auto n = static_cast<std::size_t>(1 + rng.index(30));
      std::vector<double> s(n);
      for (auto& v : s) v = rng.uniform() < 0.05 ? 0.0 : rng.uniform(0.0, 15.0);
      const double lang = rng.uniform(0.0, 8.0);
      const double docm = rng.uniform(0.0, 8.0);
      const MuContext ctx{docm, lang};
      auto expect = [&](double got, Ld want) {
        ++checked;
        if (!close_rel(got, want, 1e-12)) ++bad;
      };
      for (double k : ks) expect(super_linear(s, k), o_super(s, k));
      expect(variance(s, MuScope::sentence(), ctx), o_var(s, o_mean(s)));
      expect(variance(s, MuScope::language(), ctx), o_var(s, lang));
      expect(variance(s, MuScope::document(), ctx), o_var(s, docm));
      expect(local_variance(s), o_local(s, true));
      expect(local_delta(s, DeltaKind::absolute), o_local(s, false));
      expect(global_delta(s, lang, DeltaKind::absolute), o_abs(s, lang));
      expect(max_surprisal(s), o_max(s));
      for (double k : ks) {
        bool want_error = false;
        Ld want = 0;
        try {
          want = o_entropy(s, k);
        } catch (const DomainError&) {
          want_error = true;
        }
        try {
          const double got = entropy_uid(s, k);
          if (want_error) {
            ++bad;
          } else {
            expect(got, want);
          }
        } catch (const DomainError&) {
          if (!want_error) ++bad;
        }
      }
      // Squared-delta identities, bit for bit.
      const double mu = static_cast<double>(o_mean(s));
      if (variance(s, mu) != global_delta(s, mu, DeltaKind::squared)) ++identity_bad;
      if (variance(s, lang) != global_delta(s, lang, DeltaKind::squared)) ++identity_bad;
      if (local_variance(s) != local_delta(s, DeltaKind::squared)) ++identity_bad;
    }
    return Outcome{bad == 0 && identity_bad == 0, std::to_string(checked) + " values within 1e-12 rel, " +
                                                      std::to_string(bad) + " mismatches, " +
                                                      std::to_string(identity_bad) + " identity breaks"};
  });

  report("regression_recovery", [] {
    const auto start = Clock::now();
    std::ostringstream detail;
    bool ok = true;
    {  // OLS, noiseless
      Rng rng(505);
      Dataset d;
      std::vector<double> x1, x2, x3;
      for (int i = 0; i < 10000; ++i) {
        x1.push_back(rng.normal());
        x2.push_back(rng.uniform(-3.0, 3.0));
        x3.push_back(rng.normal(5.0, 2.0));
        d.response.push_back(1.5 - 2.0 * x1.back() + 0.75 * x2.back() + 0.3 * x3.back());
      }
      d.add_column("x1", x1);
      d.add_column("x2", x2);
      d.add_column("x3", x3);
      const auto fit = fit_linear({"y", {"x1", "x2", "x3"}}, d);
      const double want[] = {1.5, -2.0, 0.75, 0.3};
      double err = 0.0;
      for (int j = 0; j < 4; ++j) err = std::max(err, std::abs(fit.coefficients[static_cast<std::size_t>(j)] - want[j]));
      ok = ok && err <= 1e-8;
      detail << "ols max err " << fmt("%.1e", err);
    }
    {  // logistic, n = 10^4
      Rng rng(606);
      Dataset d;
      std::vector<double> x1, x2;
      const double b0 = -1.0, b1 = 2.0, b2 = -1.5;
      for (int i = 0; i < 10000; ++i) {
        x1.push_back(rng.normal());
        x2.push_back(rng.normal());
        const double eta = b0 + b1 * x1.back() + b2 * x2.back();
        d.response.push_back(rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0);
      }
      d.add_column("x1", x1);
      d.add_column("x2", x2);
      ModelSpec spec{"y", {"x1", "x2"}};
      spec.family = Family::bernoulli;
      const auto fit = fit_logistic(spec, d);
      const double want[] = {b0, b1, b2};
      double rel = 0.0;
      for (int j = 0; j < 3; ++j) {
        rel = std::max(rel, std::abs(fit.coefficients[static_cast<std::size_t>(j)] - want[j]) / std::abs(want[j]));
      }
      ok = ok && rel <= 0.05;
      detail << ", logistic max rel err " << fmt("%.3f", rel);
    }
    {  // LMM, 200 subjects x 50 items
      Rng rng(707);
      Dataset d;
      std::vector<double> x;
      const double s_int = 2.0, s_slope = 1.0, s_eps = 1.5;  // standard deviations
      for (int g = 0; g < 200; ++g) {
        const double u0 = rng.normal(0.0, s_int);
        const double u1 = rng.normal(0.0, s_slope);
        for (int i = 0; i < 50; ++i) {
          const double xi = rng.normal();
          x.push_back(xi);
          d.groups.push_back("g" + std::to_string(g));
          d.response.push_back(3.0 + 0.5 * xi + u0 + u1 * xi + rng.normal(0.0, s_eps));
        }
      }
      d.add_column("x", x);
      ModelSpec spec{"y", {"x"}, {kIntercept, "x"}};
      const auto fit = fit_lmm(spec, d);
      const double want[] = {s_int * s_int, s_slope * s_slope};
      double rel = std::abs(fit.sigma2 - s_eps * s_eps) / (s_eps * s_eps);
      for (std::size_t j = 0; j < 2; ++j) rel = std::max(rel, std::abs(fit.random_variances[j] - want[j]) / want[j]);
      ok = ok && rel <= 0.20;
      detail << ", lmm max rel err " << fmt("%.3f", rel);
    }
    const double secs = seconds_since(start);
    ok = ok && secs < 120.0;
    detail << ", " << fmt("%.2fs < 120s", secs);
    return Outcome{ok, detail.str()};
  });

  report("protocol_acceptability", [] {
    const auto start = Clock::now();
    const auto& r = k_sweep();
    const auto peak = r.extra.at("peak_k").at("acceptability");
    double t = std::numeric_limits<double>::quiet_NaN();
    for (const auto& test : r.extra.at("ttests")) {
      if (test.at("dataset") == "acceptability" && test.at("k") == 1.5 && test.contains("t")) t = test.at("t");
    }
    const bool peak_ok = !peak.is_null() && std::abs(peak.get<double>() - 1.5) <= 0.25;
    const double secs = seconds_since(start);
    return Outcome{peak_ok && t > 3.0 && secs < 300.0,
                   "peak k " + (peak.is_null() ? std::string("none") : fmt("%.2f", peak.get<double>())) +
                       " (target 1.5 +/- 0.25), dLL(1.5)-dLL(1) = " + fmt("%.2f", t) + " SE > 3"};
  });

  report("protocol_reading_time", [] {
    const auto start = Clock::now();
    const auto& r = k_sweep();
    const auto peak = r.extra.at("peak_k").at("sentence_rt");
    const bool ok = !peak.is_null() && std::abs(peak.get<double>() - 1.25) <= 0.25;
    const double secs = seconds_since(start);
    return Outcome{ok && secs < 300.0, "peak k " +
                                           (peak.is_null() ? std::string("none") : fmt("%.2f", peak.get<double>())) +
                                           " (target 1.25 +/- 0.25)"};
  });

  report("scope_sweep", [] {
    auto config = study_config();
    const auto r = pipeline::run_window_sweep(config, study_data(true));
    const auto& ranking = r.extra.at("ranking");
    std::string order;
    for (const auto& s : ranking) order += (order.empty() ? "" : " > ") + s.get<std::string>();
    bool failed_cells = false;
    for (const auto& row : r.rows) failed_cells = failed_cells || !row.ok();
    return Outcome{!ranking.empty() && ranking.at(0) == "language" && !failed_cells, order};
  });

  report("unit_fidelity", [] {
    const auto& r = k_sweep();
    const auto j = pipeline::to_json(r);
    int bad = 0, n = 0;
    for (const auto& row : j.at("rows")) {
      if (row.at("delta_loglik").is_null()) continue;
      const double nats = row.at("delta_loglik");
      const double paper = row.at("delta_loglik_1e-2");
      ++n;
      if (paper != nats * 100.0) ++bad;
      const double back = pipeline::from_paper_units(paper);
      if (std::abs(back - nats) > 1e-15 * std::abs(nats)) ++bad;
    }
    // Rendered TSV carries the same paper-unit values.
    std::ostringstream tsv;
    pipeline::write_report_tsv(tsv, r);
    std::istringstream in(tsv.str());
    tsv::Reader reader(in, "report");
    while (reader.next()) {
      if (reader.field("delta_loglik") == "NA") continue;
      const double nats = reader.number("delta_loglik");
      const double paper = reader.number("delta_loglik_1e-2");
      if (std::abs(pipeline::from_paper_units(paper) - nats) > 1e-15 * std::abs(nats)) ++bad;
    }
    return Outcome{bad == 0 && n > 0, std::to_string(n) + " rows, " + std::to_string(bad) + " round-trip breaks"};
  });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
