#include "uidkit/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include "uidkit/error.hpp"
#include "uidkit/random.hpp"

namespace uidkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const std::vector<double>& Dataset::column(const std::string& name) const {
  const auto it = columns.find(name);
  if (it == columns.end()) throw InputError("unknown predictor column '" + name + "'");
  return it->second;
}

void Dataset::add_column(const std::string& name, std::vector<double> values) {
  if (values.size() != rows()) {
    throw InputError("column '" + name + "' has " + std::to_string(values.size()) + " rows, expected " +
                     std::to_string(rows()));
  }
  columns[name] = std::move(values);
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset out;
  out.response.reserve(idx.size());
  for (auto i : idx) out.response.push_back(response.at(i));
  for (const auto& [name, values] : columns) {
    std::vector<double> v;
    v.reserve(idx.size());
    for (auto i : idx) v.push_back(values[i]);
    out.columns.emplace(name, std::move(v));
  }
  if (!groups.empty()) {
    for (auto i : idx) out.groups.push_back(groups[i]);
  }
  return out;
}

ModelSpec ModelSpec::with_predictor(const std::string& predictor) const {
  ModelSpec out = *this;
  out.fixed_effects.push_back(predictor);
  if (family == Family::gaussian && mixed()) out.random_effects.push_back(predictor);
  return out;
}

void ModelSpec::validate(const Dataset& data) const {
  for (const auto& name : fixed_effects) {
    if (!data.has(name)) throw InputError("predictor '" + name + "' is not in the dataset");
  }
  for (const auto& name : random_effects) {
    if (name != kIntercept && !data.has(name)) throw InputError("random term '" + name + "' is not in the dataset");
  }
  if (mixed()) {
    if (family != Family::gaussian) throw InputError("random effects are only supported for gaussian models");
    if (data.groups.size() != data.rows()) throw InputError("mixed model needs a group id for every row");
  }
  for (const auto& [name, values] : data.columns) {
    if (values.size() != data.rows()) throw InputError("column '" + name + "' has the wrong length");
  }
}

double FitResult::coefficient(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return coefficients[i];
  }
  throw InputError("no coefficient named '" + name + "'");
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

MatrixXd design_matrix(const ModelSpec& spec, const Dataset& data, std::vector<std::string>& names) {
  const auto n = static_cast<Eigen::Index>(data.rows());
  names.assign(1, kIntercept);
  MatrixXd x(n, static_cast<Eigen::Index>(spec.fixed_effects.size() + 1));
  x.col(0).setOnes();
  for (std::size_t j = 0; j < spec.fixed_effects.size(); ++j) {
    const auto& col = data.column(spec.fixed_effects[j]);
    names.push_back(spec.fixed_effects[j]);
    x.col(static_cast<Eigen::Index>(j + 1)) = Eigen::Map<const VectorXd>(col.data(), n);
  }
  return x;
}

MatrixXd random_design(const ModelSpec& spec, const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.rows());
  MatrixXd z(n, static_cast<Eigen::Index>(spec.random_effects.size()));
  for (std::size_t j = 0; j < spec.random_effects.size(); ++j) {
    if (spec.random_effects[j] == kIntercept) {
      z.col(static_cast<Eigen::Index>(j)).setOnes();
    } else {
      const auto& col = data.column(spec.random_effects[j]);
      z.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const VectorXd>(col.data(), n);
    }
  }
  return z;
}

VectorXd response_vector(const Dataset& data) {
  return Eigen::Map<const VectorXd>(data.response.data(), static_cast<Eigen::Index>(data.rows()));
}

double gaussian_ll(double residual, double variance) {
  return -0.5 * (kLog2Pi + std::log(variance) + residual * residual / variance);
}

// log sigma(eta) and log(1 - sigma(eta)) without overflow.
double log_sigmoid(double eta) { return eta >= 0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta)); }

double bernoulli_ll(double y, double eta) { return y * log_sigmoid(eta) + (1.0 - y) * log_sigmoid(-eta); }

// ---------------------------------------------------------------------------
// Mixed model internals

struct GroupBlock {
  MatrixXd xtx, xtz, ztz;
  VectorXd xty, zty;
  double yty = 0.0;
};

struct LmmProblem {
  std::vector<std::string> names;
  std::vector<std::string> group_names;
  std::vector<GroupBlock> blocks;
  Eigen::Index p = 0;
  Eigen::Index q = 0;
  double n = 0.0;
  double y_shift = 0.0;  // response is centered; the intercept absorbs it
};

struct LmmEval {
  double deviance = 0.0;
  VectorXd beta;
  double r2 = 0.0;
};

LmmProblem build_lmm(const ModelSpec& spec, const Dataset& data) {
  LmmProblem prob;
  const MatrixXd x = design_matrix(spec, data, prob.names);
  const MatrixXd z = random_design(spec, data);
  VectorXd y = response_vector(data);
  prob.y_shift = y.mean();
  y.array() -= prob.y_shift;
  prob.p = x.cols();
  prob.q = z.cols();
  prob.n = static_cast<double>(data.rows());

  std::map<std::string, std::size_t> index;
  std::vector<std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto [it, inserted] = index.try_emplace(data.groups[i], members.size());
    if (inserted) {
      members.emplace_back();
      prob.group_names.push_back(data.groups[i]);
    }
    members[it->second].push_back(static_cast<Eigen::Index>(i));
  }
  for (const auto& rows : members) {
    const auto m = static_cast<Eigen::Index>(rows.size());
    MatrixXd xj(m, prob.p), zj(m, prob.q);
    VectorXd yj(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      xj.row(r) = x.row(rows[static_cast<std::size_t>(r)]);
      zj.row(r) = z.row(rows[static_cast<std::size_t>(r)]);
      yj(r) = y(rows[static_cast<std::size_t>(r)]);
    }
    GroupBlock b;
    b.xtx = xj.transpose() * xj;
    b.xtz = xj.transpose() * zj;
    b.ztz = zj.transpose() * zj;
    b.xty = xj.transpose() * yj;
    b.zty = zj.transpose() * yj;
    b.yty = yj.squaredNorm();
    prob.blocks.push_back(std::move(b));
  }
  return prob;
}

// Profiled ML deviance: log det(L Z'Z L + I) + n (1 + log(2 pi r^2 / n)),
// with r^2 the generalized residual sum of squares at the GLS estimate.
LmmEval evaluate_lmm(const LmmProblem& prob, const VectorXd& theta) {
  MatrixXd a = MatrixXd::Zero(prob.p, prob.p);
  VectorXd b = VectorXd::Zero(prob.p);
  double c = 0.0;
  double logdet = 0.0;
  const auto lambda = theta.asDiagonal();
  for (const auto& blk : prob.blocks) {
    MatrixXd m = lambda * blk.ztz * lambda;
    m.diagonal().array() += 1.0;
    const Eigen::LLT<MatrixXd> llt(m);
    logdet += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const MatrixXd lzx = lambda * blk.xtz.transpose();  // q x p
    const VectorXd lzy = lambda * blk.zty;
    a += blk.xtx - lzx.transpose() * llt.solve(lzx);
    b += blk.xty - lzx.transpose() * llt.solve(lzy);
    c += blk.yty - lzy.dot(llt.solve(lzy));
  }
  LmmEval out;
  out.beta = a.ldlt().solve(b);
  out.r2 = std::max(c - b.dot(out.beta), std::numeric_limits<double>::min());
  out.deviance = logdet + prob.n * (1.0 + std::log(2.0 * std::numbers::pi * out.r2 / prob.n));
  return out;
}

struct SimplexResult {
  VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Nelder-Mead; stops when the simplex's function spread is below `ftol` and
// its extent below `xtol`.
SimplexResult nelder_mead(const std::function<double(const VectorXd&)>& f, const VectorXd& start, double step,
                          double ftol, double xtol, int max_iterations, std::vector<double>* trace) {
  const auto dim = start.size();
  std::vector<VectorXd> pts(static_cast<std::size_t>(dim + 1), start);
  std::vector<double> vals(static_cast<std::size_t>(dim + 1));
  for (Eigen::Index i = 0; i < dim; ++i) pts[static_cast<std::size_t>(i + 1)](i) += step;
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = f(pts[i]);

  SimplexResult out;
  std::vector<std::size_t> order(pts.size());
  for (int it = 0; it < max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto l, auto r) { return vals[l] < vals[r]; });
    const auto best = order.front();
    const auto worst = order.back();
    const auto second = order[order.size() - 2];
    if (trace) trace->push_back(vals[best]);
    double extent = 0.0;
    for (const auto& p : pts) extent = std::max(extent, (p - pts[best]).cwiseAbs().maxCoeff());
    if (vals[worst] - vals[best] < ftol && extent < xtol) {
      out.converged = true;
      out.iterations = it;
      break;
    }
    out.iterations = it + 1;
    VectorXd centroid = VectorXd::Zero(dim);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= static_cast<double>(dim);
    const VectorXd reflected = centroid + (centroid - pts[worst]);
    const double fr = f(reflected);
    if (fr < vals[best]) {
      const VectorXd expanded = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(expanded);
      if (fe < fr) {
        pts[worst] = expanded;
        vals[worst] = fe;
      } else {
        pts[worst] = reflected;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = reflected;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const VectorXd contracted =
        outside ? VectorXd(centroid + 0.5 * (reflected - centroid)) : VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = f(contracted);
    if (fc < std::min(fr, vals[worst])) {
      pts[worst] = contracted;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = f(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  out.x = pts[best];
  out.f = vals[best];
  return out;
}

}  // namespace

FitResult fit_linear(const ModelSpec& spec, const Dataset& data) {
  spec.validate(data);
  FitResult out;
  const MatrixXd x = design_matrix(spec, data, out.names);
  const VectorXd y = response_vector(data);
  if (data.rows() < static_cast<std::size_t>(x.cols())) throw DomainError("fewer rows than coefficients");
  const Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  if (qr.rank() < x.cols()) {
    // Express each dropped column through the kept ones; every column with
    // a non-negligible weight belongs to the collinear set.
    const auto& perm = qr.colsPermutation().indices();
    MatrixXd kept(x.rows(), qr.rank());
    for (Eigen::Index i = 0; i < qr.rank(); ++i) kept.col(i) = x.col(perm(i));
    const Eigen::ColPivHouseholderQR<MatrixXd> kqr(kept);
    std::set<std::string> involved;
    for (Eigen::Index i = qr.rank(); i < x.cols(); ++i) {
      involved.insert(out.names[static_cast<std::size_t>(perm(i))]);
      const VectorXd w = kqr.solve(x.col(perm(i)));
      for (Eigen::Index t = 0; t < w.size(); ++t) {
        if (std::abs(w(t)) > 1e-8) involved.insert(out.names[static_cast<std::size_t>(perm(t))]);
      }
    }
    std::string cols;
    for (const auto& n : involved) cols += (cols.empty() ? "" : ", ") + n;
    throw DomainError("rank-deficient design; collinear columns: " + cols);
  }
  const VectorXd beta = qr.solve(y);
  const VectorXd resid = y - x * beta;
  const double n = static_cast<double>(data.rows());
  out.coefficients.assign(beta.data(), beta.data() + beta.size());
  out.sigma2 = std::max(resid.squaredNorm() / n, std::numeric_limits<double>::min());
  out.log_likelihood = 0.0;
  for (Eigen::Index i = 0; i < resid.size(); ++i) out.log_likelihood += gaussian_ll(resid(i), out.sigma2);
  out.deviance = -2.0 * out.log_likelihood;
  return out;
}

FitResult fit_logistic(const ModelSpec& spec, const Dataset& data, double ridge) {
  spec.validate(data);
  if (spec.family != Family::bernoulli) throw InputError("fit_logistic needs a bernoulli spec");
  for (double v : data.response) {
    if (v != 0.0 && v != 1.0) throw InputError("logistic regression needs a 0/1 response");
  }
  FitResult out;
  const MatrixXd x = design_matrix(spec, data, out.names);
  const VectorXd y = response_vector(data);
  const auto p = x.cols();

  auto penalized_deviance = [&](const VectorXd& beta) {
    const VectorXd eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += bernoulli_ll(y(i), eta(i));
    return -2.0 * ll + ridge * beta.squaredNorm();
  };

  VectorXd beta = VectorXd::Zero(p);
  double dev = penalized_deviance(beta);
  out.deviance_trace.push_back(dev);
  constexpr int kMaxIterations = 100;
  bool converged = false;
  int it = 0;
  for (; it < kMaxIterations && !converged; ++it) {
    const VectorXd eta = x * beta;
    VectorXd w(eta.size()), score(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double mu = 1.0 / (1.0 + std::exp(-eta(i)));
      w(i) = std::max(mu * (1.0 - mu), 1e-12);
      score(i) = y(i) - mu;
    }
    MatrixXd h = x.transpose() * w.asDiagonal() * x;
    h.diagonal().array() += ridge;
    const VectorXd grad = x.transpose() * score - ridge * beta;
    VectorXd step = h.ldlt().solve(grad);
    double next = penalized_deviance(beta + step);
    for (int halving = 0; halving < 50 && next > dev; ++halving) {
      step *= 0.5;
      next = penalized_deviance(beta + step);
    }
    if (next > dev) {
      next = dev;
      step.setZero();
    }
    beta += step;
    converged = std::abs(dev - next) < 1e-10 * (std::abs(next) + 0.1);
    dev = next;
    out.deviance_trace.push_back(dev);
  }
  if (!converged) {
    throw ConvergenceError("logistic IRLS did not converge after 100 iterations; last deviance " +
                           std::to_string(dev));
  }
  out.iterations = it;
  out.coefficients.assign(beta.data(), beta.data() + beta.size());
  const VectorXd eta = x * beta;
  for (Eigen::Index i = 0; i < eta.size(); ++i) out.log_likelihood += bernoulli_ll(y(i), eta(i));
  out.deviance = -2.0 * out.log_likelihood;
  return out;
}

double lmm_profiled_deviance(const ModelSpec& spec, const Dataset& data, std::span<const double> theta) {
  spec.validate(data);
  const auto prob = build_lmm(spec, data);
  if (static_cast<Eigen::Index>(theta.size()) != prob.q) throw DomainError("theta has the wrong length");
  return evaluate_lmm(prob, Eigen::Map<const VectorXd>(theta.data(), prob.q)).deviance;
}

FitResult fit_lmm(const ModelSpec& spec, const Dataset& data, const LmmOptions& options) {
  spec.validate(data);
  if (!spec.mixed()) throw InputError("fit_lmm needs at least one random term");
  if (spec.family != Family::gaussian) throw InputError("fit_lmm needs a gaussian spec");
  const auto prob = build_lmm(spec, data);

  FitResult out;
  // The deviance only depends on |theta|, so the search runs unconstrained.
  auto objective = [&](const VectorXd& theta) { return evaluate_lmm(prob, theta).deviance; };
  int budget = options.max_iterations;
  auto first = nelder_mead(objective, VectorXd::Ones(prob.q), 0.5, options.tolerance, 1e-4, budget,
                           &out.deviance_trace);
  budget -= first.iterations;
  // One restart around the optimum guards against a collapsed simplex.
  auto second = nelder_mead(objective, first.x, 0.1, options.tolerance, 1e-4, std::max(budget, 0),
                            &out.deviance_trace);
  auto& best = second.f <= first.f ? second : first;
  out.iterations = first.iterations + second.iterations;
  if (!second.converged) {
    throw ConvergenceError("mixed model did not converge after " + std::to_string(options.max_iterations) +
                           " iterations; deviance " + std::to_string(best.f));
  }

  VectorXd theta = best.x.cwiseAbs();
  double dev = best.f;
  out.boundary.assign(static_cast<std::size_t>(prob.q), false);
  for (Eigen::Index i = 0; i < prob.q; ++i) {
    if (theta(i) > 1e-3) continue;
    VectorXd trial = theta;
    trial(i) = 0.0;
    const double d = objective(trial);
    if (d <= dev + options.tolerance) {
      theta = trial;
      dev = std::min(dev, d);
      out.boundary[static_cast<std::size_t>(i)] = true;
    }
  }

  const auto eval = evaluate_lmm(prob, theta);
  out.names = prob.names;
  out.coefficients.assign(eval.beta.data(), eval.beta.data() + eval.beta.size());
  out.sigma2 = eval.r2 / prob.n;
  out.theta.assign(theta.data(), theta.data() + theta.size());
  out.random_names = spec.random_effects;
  for (double t : out.theta) out.random_variances.push_back(out.sigma2 * t * t);
  out.deviance = eval.deviance;
  out.log_likelihood = -0.5 * eval.deviance;
  out.converged = true;

  const auto lambda = theta.asDiagonal();
  for (std::size_t j = 0; j < prob.blocks.size(); ++j) {
    const auto& blk = prob.blocks[j];
    MatrixXd m = lambda * blk.ztz * lambda;
    m.diagonal().array() += 1.0;
    const VectorXd rhs = lambda * (blk.zty - blk.xtz.transpose() * eval.beta);
    const VectorXd mode = lambda * m.llt().solve(rhs);
    out.group_effects[prob.group_names[j]] = std::vector<double>(mode.data(), mode.data() + mode.size());
  }
  out.coefficients.front() += prob.y_shift;
  return out;
}

FitResult fit(const ModelSpec& spec, const Dataset& data) {
  if (spec.family == Family::bernoulli) return fit_logistic(spec, data);
  return spec.mixed() ? fit_lmm(spec, data) : fit_linear(spec, data);
}

std::vector<double> row_log_likelihood(const ModelSpec& spec, const FitResult& fit, const Dataset& data) {
  spec.validate(data);
  std::vector<std::string> names;
  const MatrixXd x = design_matrix(spec, data, names);
  if (names != fit.names) throw InputError("fit does not match model spec");
  const VectorXd beta = Eigen::Map<const VectorXd>(fit.coefficients.data(), static_cast<Eigen::Index>(fit.coefficients.size()));
  const VectorXd eta = x * beta;
  const VectorXd y = response_vector(data);
  std::vector<double> out(data.rows());
  if (spec.family == Family::bernoulli) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = bernoulli_ll(y(static_cast<Eigen::Index>(i)), eta(static_cast<Eigen::Index>(i)));
    return out;
  }
  if (!spec.mixed()) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      out[i] = gaussian_ll(y(r) - eta(r), fit.sigma2);
    }
    return out;
  }
  const MatrixXd z = random_design(spec, data);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto it = fit.group_effects.find(data.groups[i]);
    double mean = eta(r);
    double variance = fit.sigma2;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      if (it != fit.group_effects.end()) {
        mean += z(r, j) * it->second[static_cast<std::size_t>(j)];
      } else {
        variance += z(r, j) * z(r, j) * fit.random_variances[static_cast<std::size_t>(j)];
      }
    }
    out[i] = gaussian_ll(y(r) - mean, variance);
  }
  return out;
}

std::vector<int> fold_assignment(std::size_t rows, int folds, std::uint64_t seed) {
  if (folds < 2) throw DomainError("cross-validation needs at least 2 folds");
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<int> out(rows);
  for (std::size_t pos = 0; pos < rows; ++pos) out[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  return out;
}

namespace {

void check_single_predictor_difference(const ModelSpec& a, const ModelSpec& b) {
  if (a.family != b.family) throw InputError("compared models must share a family");
  const std::set<std::string> fa(a.fixed_effects.begin(), a.fixed_effects.end());
  const std::set<std::string> fb(b.fixed_effects.begin(), b.fixed_effects.end());
  std::vector<std::string> diff;
  std::set_symmetric_difference(fa.begin(), fa.end(), fb.begin(), fb.end(), std::back_inserter(diff));
  if (diff.size() != 1) throw InputError("compared models must differ by exactly one fixed predictor");
  const std::set<std::string> ra(a.random_effects.begin(), a.random_effects.end());
  const std::set<std::string> rb(b.random_effects.begin(), b.random_effects.end());
  std::vector<std::string> rdiff;
  std::set_symmetric_difference(ra.begin(), ra.end(), rb.begin(), rb.end(), std::back_inserter(rdiff));
  if (rdiff.size() > 1 || (rdiff.size() == 1 && rdiff.front() != diff.front())) {
    throw InputError("random terms may only differ by the added predictor's slope");
  }
}

ModelSpec drop_terms(ModelSpec spec, const std::set<std::string>& inactive) {
  auto gone = [&](const std::string& n) { return inactive.count(n) > 0; };
  std::erase_if(spec.fixed_effects, gone);
  std::erase_if(spec.random_effects, gone);
  return spec;
}

}  // namespace

ModelComparison compare_models(const ModelSpec& baseline, const ModelSpec& augmented, const Dataset& data,
                               int folds, std::uint64_t seed) {
  check_single_predictor_difference(baseline, augmented);
  baseline.validate(data);
  augmented.validate(data);

  ModelComparison out;
  out.baseline = baseline;
  out.augmented = augmented;
  out.folds = fold_assignment(data.rows(), folds, seed);
  out.baseline_ll.assign(data.rows(), 0.0);
  out.augmented_ll.assign(data.rows(), 0.0);

  std::set<std::string> predictors(baseline.fixed_effects.begin(), baseline.fixed_effects.end());
  predictors.insert(augmented.fixed_effects.begin(), augmented.fixed_effects.end());
  for (const auto& r : augmented.random_effects) {
    if (r != kIntercept) predictors.insert(r);
  }
  for (const auto& r : baseline.random_effects) {
    if (r != kIntercept) predictors.insert(r);
  }

  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < data.rows(); ++i) (out.folds[i] == f ? test : train).push_back(i);
    if (test.empty()) continue;
    Dataset tr = data.subset(train);
    Dataset te = data.subset(test);
    std::set<std::string> inactive;
    for (const auto& name : predictors) {
      auto& a = tr.columns.at(name);
      auto& b = te.columns.at(name);
      const double mu = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
      double ss = 0.0;
      for (double v : a) ss += (v - mu) * (v - mu);
      const double sd = std::sqrt(ss / static_cast<double>(a.size()));
      if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) {
        inactive.insert(name);
        continue;
      }
      for (auto& v : a) v = (v - mu) / sd;
      for (auto& v : b) v = (v - mu) / sd;
    }
    const auto base_spec = drop_terms(baseline, inactive);
    const auto aug_spec = drop_terms(augmented, inactive);
    const auto base_fit = fit(base_spec, tr);
    const auto base_ll = row_log_likelihood(base_spec, base_fit, te);
    // Identical specs after dropping a constant predictor share one fit.
    const auto aug_ll = (aug_spec.fixed_effects.size() == base_spec.fixed_effects.size())
                            ? base_ll
                            : row_log_likelihood(aug_spec, fit(aug_spec, tr), te);
    for (std::size_t i = 0; i < test.size(); ++i) {
      out.baseline_ll[test[i]] = base_ll[i];
      out.augmented_ll[test[i]] = aug_ll[i];
    }
  }

  out.delta.resize(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) out.delta[i] = out.augmented_ll[i] - out.baseline_ll[i];
  out.fold_means.assign(static_cast<std::size_t>(folds), 0.0);
  std::vector<std::size_t> fold_sizes(static_cast<std::size_t>(folds), 0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    out.fold_means[static_cast<std::size_t>(out.folds[i])] += out.delta[i];
    ++fold_sizes[static_cast<std::size_t>(out.folds[i])];
  }
  for (std::size_t f = 0; f < out.fold_means.size(); ++f) {
    if (fold_sizes[f]) out.fold_means[f] /= static_cast<double>(fold_sizes[f]);
  }
  const double n = static_cast<double>(data.rows());
  out.mean = std::accumulate(out.delta.begin(), out.delta.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : out.delta) ss += (d - out.mean) * (d - out.mean);
  out.se = data.rows() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
  return out;
}

ModelComparison delta_loglik(const ModelSpec& baseline, const std::string& predictor, const Dataset& data,
                             int folds, std::uint64_t seed) {
  return compare_models(baseline, baseline.with_predictor(predictor), data, folds, seed);
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b, int comparisons, double alpha) {
  if (a.size() != b.size()) throw DomainError("paired t-test needs equal-length samples");
  if (a.size() < 2) throw DomainError("paired t-test needs at least 2 pairs");
  if (comparisons < 1) throw DomainError("number of comparisons must be >= 1");
  const double n = static_cast<double>(a.size());
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw DomainError("paired differences have zero variance");

  TTestResult out;
  out.mean_difference = mean;
  out.t = mean / (sd / std::sqrt(n));
  out.dof = n - 1.0;
  const boost::math::students_t dist(out.dof);
  out.p = boost::math::cdf(boost::math::complement(dist, out.t));
  out.threshold = alpha / static_cast<double>(comparisons);
  out.significant = out.p < out.threshold;
  return out;
}

std::vector<double> aggregate_means(std::span<const double> values, std::span<const std::string> keys) {
  if (values.size() != keys.size()) throw DomainError("values and keys differ in length");
  std::map<std::string, std::size_t> slot;
  std::vector<double> sums;
  std::vector<double> counts;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(keys[i], sums.size());
    if (inserted) {
      sums.push_back(0.0);
      counts.push_back(0.0);
    }
    sums[it->second] += values[i];
    counts[it->second] += 1.0;
  }
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] /= counts[i];
  return sums;
}

std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> out(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) out[order[t]] = rank;
    i = j + 1;
  }
  return out;
}

double correlate(std::span<const double> x, std::span<const double> y, CorrelationMethod method) {
  if (x.size() != y.size()) throw DomainError("correlation inputs differ in length");
  if (x.size() < 2) throw DomainError("correlation needs at least 2 points");
  if (method == CorrelationMethod::spearman) {
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    return correlate(rx, ry, CorrelationMethod::pearson);
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DomainError("correlation with a constant input is undefined");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace uidkit
