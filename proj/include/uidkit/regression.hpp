#pragma once

// Linear, logistic and linear mixed-effects regression; cross-validated
// held-out log-likelihood comparison; paired t-tests and correlations.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace uidkit {

inline constexpr const char* kIntercept = "(Intercept)";

/// Column store: a response, named numeric predictors and an optional
/// grouping factor (subject id) per row.
struct Dataset {
  std::vector<double> response;
  std::map<std::string, std::vector<double>> columns;
  std::vector<std::string> groups;

  std::size_t rows() const { return response.size(); }
  bool has(const std::string& name) const { return columns.count(name) > 0; }
  const std::vector<double>& column(const std::string& name) const;
  void add_column(const std::string& name, std::vector<double> values);
  Dataset subset(std::span<const std::size_t> rows) const;
};

enum class Family { gaussian, bernoulli };

struct ModelSpec {
  std::string response = "y";
  std::vector<std::string> fixed_effects;   // intercept is implicit
  std::vector<std::string> random_effects;  // per-group terms; kIntercept allowed
  Family family = Family::gaussian;

  bool mixed() const { return !random_effects.empty(); }
  /// Adds `predictor` as a fixed effect and, for grouped gaussian models,
  /// as a per-group random slope.
  ModelSpec with_predictor(const std::string& predictor) const;
  /// Throws InputError for unknown columns or random terms on a bernoulli
  /// model or a dataset without groups.
  void validate(const Dataset& data) const;
};

struct FitResult {
  std::vector<std::string> names;  // kIntercept first
  std::vector<double> coefficients;
  double sigma2 = 0.0;  // residual variance (gaussian)
  std::vector<std::string> random_names;
  std::vector<double> random_variances;
  std::vector<double> theta;  // relative standard deviations
  std::vector<bool> boundary;  // theta at zero
  std::map<std::string, std::vector<double>> group_effects;  // conditional modes
  double log_likelihood = 0.0;
  double deviance = 0.0;
  int iterations = 0;
  bool converged = true;
  std::vector<double> deviance_trace;  // per IRLS iteration / optimizer step

  double coefficient(const std::string& name) const;
};

/// OLS with MLE residual variance. Throws DomainError naming collinear
/// columns when the design is rank deficient.
FitResult fit_linear(const ModelSpec& spec, const Dataset& data);

/// IRLS with an L2 ridge `ridge` on every coefficient (keeps separable and
/// all-one-class data finite). Throws ConvergenceError after 100 iterations.
FitResult fit_logistic(const ModelSpec& spec, const Dataset& data, double ridge = 1e-6);

struct LmmOptions {
  int max_iterations = 500;
  double tolerance = 1e-8;  // deviance change
};

/// Maximum-likelihood linear mixed model with independent per-group random
/// terms, fitted by minimizing the profiled deviance over the relative
/// standard deviations.
FitResult fit_lmm(const ModelSpec& spec, const Dataset& data, const LmmOptions& options = {});

/// Dispatches on family and on whether random terms are present.
FitResult fit(const ModelSpec& spec, const Dataset& data);

/// Profiled ML deviance at fixed relative standard deviations `theta`.
double lmm_profiled_deviance(const ModelSpec& spec, const Dataset& data, std::span<const double> theta);

/// Per-row log-likelihood of `data` under a fitted model. Mixed models use
/// the conditional modes for groups seen in training; rows of unseen groups
/// are scored marginally with variance sigma^2 + z' Psi z.
std::vector<double> row_log_likelihood(const ModelSpec& spec, const FitResult& fit, const Dataset& data);

/// Random fold labels in [0, folds): a pure function of (seed, rows).
std::vector<int> fold_assignment(std::size_t rows, int folds, std::uint64_t seed);

struct ModelComparison {
  ModelSpec baseline;
  ModelSpec augmented;
  std::vector<int> folds;
  std::vector<double> baseline_ll;
  std::vector<double> augmented_ll;
  std::vector<double> delta;  // augmented - baseline, per row
  std::vector<double> fold_means;
  double mean = 0.0;
  double se = 0.0;
  std::size_t n() const { return delta.size(); }
};

/// Cross-validated held-out log-likelihood comparison of two specs that
/// differ by exactly one predictor. Predictors are z-scored within each
/// training fold; predictors that are constant in a training fold are
/// dropped from both models for that fold.
ModelComparison compare_models(const ModelSpec& baseline, const ModelSpec& augmented, const Dataset& data,
                               int folds, std::uint64_t seed);

/// baseline vs. baseline.with_predictor(predictor).
ModelComparison delta_loglik(const ModelSpec& baseline, const std::string& predictor, const Dataset& data,
                             int folds = 10, std::uint64_t seed = 0);

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;          // one-sided, H1: mean(a - b) > 0
  double threshold = 0.0;  // alpha / m
  bool significant = false;
  double mean_difference = 0.0;
};

/// One-sided paired t-test with Bonferroni threshold alpha / m.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b, int comparisons,
                         double alpha = 0.001);

/// Means of `values` grouped by `keys`, in order of first appearance.
std::vector<double> aggregate_means(std::span<const double> values, std::span<const std::string> keys);

enum class CorrelationMethod { pearson, spearman };

/// Throws DomainError when either input is constant.
double correlate(std::span<const double> x, std::span<const double> y,
                 CorrelationMethod method = CorrelationMethod::pearson);

/// Average ranks (1-based), ties share their mean rank.
std::vector<double> ranks(std::span<const double> x);

}  // namespace uidkit
