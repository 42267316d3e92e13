#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "enetpath/cox.hpp"
#include "enetpath/family.hpp"
#include "enetpath/relaxed.hpp"

namespace enetpath {

/**
 * Seeded fold assignment: a Fisher-Yates permutation split into k groups
 * whose sizes differ by at most one. The generator is hand-rolled on top of
 * mt19937_64 so assignments are identical across platforms.
 */
inline std::vector<int> make_folds(int n, int k, std::uint64_t seed) {
  if (k < 2 || k > n) throw std::invalid_argument("make_folds: need 2 <= k <= n");
  std::mt19937_64 rng(seed);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  // first n % k folds get the extra observation
  std::vector<int> fold(n);
  const int base = n / k, extra = n % k;
  int pos = 0;
  for (int f = 0; f < k; ++f) {
    const int size = base + (f < extra ? 1 : 0);
    for (int t = 0; t < size; ++t) fold[perm[pos++]] = f;
  }
  return fold;
}

enum class Measure { deviance, mse, mae, cls, auc, cindex };

inline std::string measure_name(Measure m) {
  switch (m) {
    case Measure::deviance: return "deviance";
    case Measure::mse: return "mse";
    case Measure::mae: return "mae";
    case Measure::cls: return "class";
    case Measure::auc: return "auc";
    case Measure::cindex: return "C";
  }
  throw std::logic_error("unreachable");
}

inline Measure parse_measure(const std::string& s) {
  if (s == "deviance" || s == "default") return Measure::deviance;
  if (s == "mse") return Measure::mse;
  if (s == "mae") return Measure::mae;
  if (s == "class") return Measure::cls;
  if (s == "auc") return Measure::auc;
  if (s == "C" || s == "c-index" || s == "cindex") return Measure::cindex;
  throw std::invalid_argument("measure: unknown type '" + s + "'");
}

inline std::vector<Measure> valid_measures(const FamilySpec& family) {
  if (family.is_binomial_like())
    return {Measure::deviance, Measure::mse, Measure::mae, Measure::cls, Measure::auc};
  return {Measure::deviance, Measure::mse, Measure::mae};
}

inline std::vector<Measure> valid_measures_cox() {
  return {Measure::deviance, Measure::cindex};
}

/// Tie-corrected Mann-Whitney AUC from midranks.
inline double auc_rank(const std::vector<double>& score, const std::vector<int>& label) {
  const std::size_t n = score.size();
  if (label.size() != n) throw std::invalid_argument("auc: length mismatch");
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return score[a] < score[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && score[order[j + 1]] == score[order[i]]) ++j;
    const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  long npos = 0, nneg = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (label[t] == 1) {
      rank_sum += rank[t];
      ++npos;
    } else {
      ++nneg;
    }
  }
  if (npos == 0 || nneg == 0) throw std::invalid_argument("auc: needs both classes");
  return (rank_sum - 0.5 * npos * (npos + 1.0)) / (static_cast<double>(npos) * nneg);
}

struct RocPoint {
  double fpr = 0.0, tpr = 0.0;
};

/**
 * ROC sweep from +inf to -inf over unique score thresholds: starts at (0,0),
 * ends at (1,1), tied scores advance both coordinates in one step so the
 * trapezoidal area equals the tie-corrected Mann-Whitney statistic.
 */
inline std::vector<RocPoint> roc_curve(const std::vector<double>& score,
                                       const std::vector<int>& label) {
  const std::size_t n = score.size();
  if (label.size() != n) throw std::invalid_argument("roc_curve: length mismatch");
  long npos = 0, nneg = 0;
  for (int l : label) (l == 1 ? npos : nneg)++;
  if (npos == 0 || nneg == 0) throw std::invalid_argument("roc_curve: needs both classes");
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return score[a] > score[b]; });
  std::vector<RocPoint> pts{{0.0, 0.0}};
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && score[order[j + 1]] == score[order[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) (label[order[t]] == 1 ? tp : fp)++;
    pts.push_back({static_cast<double>(fp) / nneg, static_cast<double>(tp) / npos});
    i = j + 1;
  }
  return pts;
}

inline double roc_auc_trapezoid(const std::vector<RocPoint>& pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].fpr - pts[i - 1].fpr) * 0.5 * (pts[i].tpr + pts[i - 1].tpr);
  return area;
}

/// K-class contingency table with the "Predicted x True" layout.
struct Confusion {
  std::vector<int> classes;
  std::vector<std::vector<long>> counts;  // [predicted][true]
  double percent_correct = 0.0;

  std::string format() const {
    const int k = static_cast<int>(classes.size());
    std::vector<long> row_tot(k, 0), col_tot(k, 0);
    long total = 0;
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        row_tot[a] += counts[a][b];
        col_tot[b] += counts[a][b];
        total += counts[a][b];
      }
    int w = 5;
    for (long v : {total}) w = std::max(w, static_cast<int>(std::to_string(v).size()) + 1);
    std::ostringstream os;
    os << std::string(9, ' ') << "True\n";
    os << "Predicted";
    for (int b = 0; b < k; ++b) os << std::setw(w) << classes[b];
    os << std::setw(w + 1) << "Total" << "\n";
    for (int a = 0; a < k; ++a) {
      os << "    " << std::left << std::setw(5) << classes[a] << std::right;
      for (int b = 0; b < k; ++b) os << std::setw(w) << counts[a][b];
      os << std::setw(w + 1) << row_tot[a] << "\n";
    }
    os << "    Total";
    for (int b = 0; b < k; ++b) os << std::setw(w) << col_tot[b];
    os << std::setw(w + 1) << total << "\n\n";
    os << " Percent Correct:  " << std::setprecision(2) << std::fixed << percent_correct
       << "\n";
    return os.str();
  }
};

inline Confusion confusion_matrix(const std::vector<int>& predicted,
                                  const std::vector<int>& truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("confusion_matrix: length mismatch");
  if (predicted.empty()) throw std::invalid_argument("confusion_matrix: empty input");
  Confusion c;
  c.classes = predicted;
  c.classes.insert(c.classes.end(), truth.begin(), truth.end());
  std::sort(c.classes.begin(), c.classes.end());
  c.classes.erase(std::unique(c.classes.begin(), c.classes.end()), c.classes.end());
  const int k = static_cast<int>(c.classes.size());
  c.counts.assign(k, std::vector<long>(k, 0));
  auto slot = [&](int v) {
    return static_cast<int>(std::lower_bound(c.classes.begin(), c.classes.end(), v) -
                            c.classes.begin());
  };
  long correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    c.counts[slot(predicted[i])][slot(truth[i])]++;
    if (predicted[i] == truth[i]) ++correct;
  }
  c.percent_correct = static_cast<double>(correct) / predicted.size();
  return c;
}

/**
 * Performance measure of link-scale predictions against a GLM response,
 * averaged per observation with the supplied weights.
 */
inline double measure_glm(const FamilySpec& family, const std::vector<double>& link_pred,
                          const std::vector<double>& y, const std::vector<double>& w,
                          Measure m) {
  const std::size_t n = y.size();
  if (link_pred.size() != n || w.size() != n)
    throw std::invalid_argument("measure: length mismatch");
  if ((m == Measure::cls || m == Measure::auc) && !family.is_binomial_like())
    throw std::invalid_argument("measure: type valid only for binomial families");
  if (m == Measure::cindex)
    throw std::invalid_argument("measure: C-index is a Cox measure");
  double wsum = 0.0;
  for (double v : w) wsum += v;
  switch (m) {
    case Measure::deviance: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        acc += w[i] * family.unit_deviance(y[i], family.clamp_mu(family.link_inverse(link_pred[i])));
      return acc / wsum;
    }
    case Measure::mse:
    case Measure::mae: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - family.link_inverse(link_pred[i]);
        acc += w[i] * (m == Measure::mse ? r * r : std::abs(r));
      }
      return acc / wsum;
    }
    case Measure::cls: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double cls = family.link_inverse(link_pred[i]) >= 0.5 ? 1.0 : 0.0;
        acc += w[i] * (cls != y[i] ? 1.0 : 0.0);
      }
      return acc / wsum;
    }
    case Measure::auc: {
      std::vector<int> label(n);
      for (std::size_t i = 0; i < n; ++i) label[i] = y[i] > 0.5 ? 1 : 0;
      return auc_rank(link_pred, label);
    }
    default: throw std::logic_error("unreachable");
  }
}

/// Cox measures: per-observation partial-likelihood deviance or concordance.
inline double measure_cox(const SurvivalResponse& surv, const std::vector<double>& eta,
                          const std::vector<double>& w, Measure m) {
  switch (m) {
    case Measure::deviance:
      return cox_deviance(surv, eta, w) / surv.size();
    case Measure::cindex:
      return cox_cindex(surv, eta);
    default:
      throw std::invalid_argument("measure: type '" + measure_name(m) +
                                  "' is not a Cox measure");
  }
}

struct LambdaChoice {
  int min_index = 0;
  int ose_index = 0;
};

/// True for measures where larger is better; selection negates these so the
/// argmin / one-standard-error rule always runs on a loss scale.
inline bool measure_maximized(Measure m) {
  return m == Measure::auc || m == Measure::cindex;
}

/// argmin plus the one-standard-error rule over a decreasing lambda grid.
/// Gain-type measures are passed negated by the cv drivers.
inline LambdaChoice select_lambda(const std::vector<double>& cvm,
                                  const std::vector<double>& cvsd) {
  if (cvm.empty() || cvm.size() != cvsd.size())
    throw std::invalid_argument("select_lambda: bad inputs");
  LambdaChoice ch;
  for (std::size_t k = 1; k < cvm.size(); ++k)
    if (cvm[k] < cvm[ch.min_index]) ch.min_index = static_cast<int>(k);
  const double threshold = cvm[ch.min_index] + cvsd[ch.min_index];
  ch.ose_index = ch.min_index;
  for (std::size_t k = 0; k < cvm.size(); ++k) {
    if (cvm[k] <= threshold) {
      ch.ose_index = static_cast<int>(k);
      break;
    }
  }
  return ch;
}

struct CvOptions {
  int nfolds = 10;
  std::optional<Measure> measure;  // default: deviance
  std::uint64_t seed = 42;
  bool keep = false;
  bool relax = false;
  std::vector<double> gamma_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  int threads = 1;
  PathOptions path;
};

struct CvResult {
  std::vector<double> lambda;
  std::vector<double> gamma_grid;              // empty for plain CV
  std::vector<std::vector<double>> cvm, cvsd;  // [gamma][lambda]; one row when plain
  double lambda_min = 0.0, lambda_1se = 0.0;
  double gamma_min = 1.0, gamma_1se = 1.0;
  std::vector<int> fold_ids;
  std::vector<char> fold_skipped;
  int n_used_folds = 0;
  std::string measure;
  std::vector<std::vector<double>> fit_preval;        // [lambda][n], link scale
  std::vector<std::vector<double>> fit_preval_refit;  // relaxed fits only
  PathFit fit;
  std::optional<RelaxedFit> relaxed;
  std::vector<int> nonzero;  // per lambda of the full fit
};

namespace detail {

inline void run_folds(int nfolds, int threads, const std::function<void(int)>& body) {
  if (threads <= 1) {
    for (int f = 0; f < nfolds; ++f) body(f);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int f = next.fetch_add(1);
      if (f >= nfolds) return;
      body(f);  // bodies handle their own failures by marking the fold skipped
    }
  };
  std::vector<std::thread> pool;
  const int nt = std::min(threads, nfolds);
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

struct FoldPredictions {
  bool skipped = false;
  // [lambda][row-in-fold] link-scale predictions
  std::vector<std::vector<double>> base;
  std::vector<std::vector<double>> refit;
};

inline void aggregate_cv(CvResult& out, const std::vector<FoldPredictions>& folds,
                         const std::vector<std::vector<int>>& fold_rows,
                         const std::function<double(const std::vector<int>&,
                                                    const std::vector<double>&)>& fold_measure,
                         const std::vector<double>& gammas, bool relax, int nlambda, int n,
                         bool maximize) {
  const int nfolds = static_cast<int>(folds.size());
  out.fold_skipped.assign(nfolds, 0);
  int used = 0;
  for (int f = 0; f < nfolds; ++f) {
    out.fold_skipped[f] = folds[f].skipped ? 1 : 0;
    if (!folds[f].skipped) ++used;
  }
  out.n_used_folds = used;
  if (used < 2) throw std::runtime_error("cv: fewer than 2 usable folds");

  const int ngamma = relax ? static_cast<int>(gammas.size()) : 1;
  out.cvm.assign(ngamma, std::vector<double>(nlambda, 0.0));
  out.cvsd.assign(ngamma, std::vector<double>(nlambda, 0.0));
  std::vector<double> blended;
  for (int g = 0; g < ngamma; ++g) {
    const double gamma = relax ? gammas[g] : 1.0;
    for (int k = 0; k < nlambda; ++k) {
      std::vector<double> per_fold;
      for (int f = 0; f < nfolds; ++f) {
        if (folds[f].skipped) continue;
        const auto& base = folds[f].base[k];
        blended = base;
        if (relax && gamma != 1.0) {
          const auto& refit = folds[f].refit[k];
          for (std::size_t t = 0; t < blended.size(); ++t)
            blended[t] = blend_scalar(base[t], refit[t], gamma);
        }
        per_fold.push_back(fold_measure(fold_rows[f], blended));
      }
      double mean = 0.0;
      for (double v : per_fold) mean += v;
      mean /= per_fold.size();
      double var = 0.0;
      for (double v : per_fold) var += (v - mean) * (v - mean);
      var = per_fold.size() > 1 ? var / (per_fold.size() - 1) : 0.0;
      out.cvm[g][k] = mean;
      out.cvsd[g][k] = std::sqrt(var / per_fold.size());
    }
  }

  // lambda_min / lambda_1se (and the gamma pair when relaxed): best mean on
  // the loss scale (gain measures negated), ties and the 1se search
  // preferring larger lambda, then larger gamma
  const double sign = maximize ? -1.0 : 1.0;
  auto loss = [&](int g, int k) { return sign * out.cvm[g][k]; };
  int gmin = 0, kmin = 0;
  for (int g = 0; g < ngamma; ++g)
    for (int k = 0; k < nlambda; ++k)
      if (loss(g, k) < loss(gmin, kmin) ||
          (loss(g, k) == loss(gmin, kmin) && k < kmin))
        gmin = g, kmin = k;
  const double threshold = loss(gmin, kmin) + out.cvsd[gmin][kmin];
  int g1 = gmin, k1 = kmin;
  for (int k = 0; k < nlambda && k <= kmin; ++k) {
    bool found = false;
    for (int g = ngamma - 1; g >= 0; --g) {
      if (loss(g, k) <= threshold) {
        g1 = g;
        k1 = k;
        found = true;
        break;
      }
    }
    if (found) break;
  }
  out.lambda_min = out.lambda[kmin];
  out.lambda_1se = out.lambda[k1];
  if (relax) {
    out.gamma_min = gammas[gmin];
    out.gamma_1se = gammas[g1];
  }

  // assemble pre-validated matrices
  out.fit_preval.assign(nlambda, std::vector<double>(n, std::nan("")));
  if (relax) out.fit_preval_refit.assign(nlambda, std::vector<double>(n, std::nan("")));
  for (int f = 0; f < nfolds; ++f) {
    if (folds[f].skipped) continue;
    for (int k = 0; k < nlambda; ++k) {
      for (std::size_t t = 0; t < fold_rows[f].size(); ++t) {
        out.fit_preval[k][fold_rows[f][t]] = folds[f].base[k][t];
        if (relax) out.fit_preval_refit[k][fold_rows[f][t]] = folds[f].refit[k][t];
      }
    }
  }
}

}  // namespace detail

/**
 * K-fold cross-validation for GLM paths: the full-data fit pins the lambda
 * grid, every fold is fit on its complement over that grid, and per-fold
 * measures of the pre-validated (held-out, link-scale) predictions are
 * averaged. Skipped folds (single-class binomial) are flagged.
 */
inline CvResult cv_fit(const FeatureMatrix& X, const std::vector<double>& y,
                       const Weights& obs_w, const FamilySpec& family,
                       const PenaltySpec& penalty, const CvOptions& opts = {}) {
  const int n = X.rows();
  CvResult out;
  const Measure m = opts.measure.value_or(Measure::deviance);
  {
    const auto valid = valid_measures(family);
    if (std::find(valid.begin(), valid.end(), m) == valid.end())
      throw std::invalid_argument("cv: measure '" + measure_name(m) +
                                  "' invalid for family " + family.name());
  }
  out.measure = measure_name(m);
  if (opts.relax) {
    out.relaxed = fit_relaxed(X, y, obs_w, family, penalty, opts.path);
    out.fit = out.relaxed->base;
    out.gamma_grid = opts.gamma_grid;
    for (double g : out.gamma_grid)
      if (!(g >= 0.0 && g <= 1.0))
        throw std::invalid_argument("cv: gamma grid outside [0,1]");
  } else {
    out.fit = fit_glm_path(X, y, obs_w, family, penalty, opts.path);
  }
  out.lambda = out.fit.lambda;
  for (int k = 0; k < out.fit.n_lambda(); ++k)
    out.nonzero.push_back(out.fit.coefficients[k].nnz());
  const int nlambda = out.fit.n_lambda();

  out.fold_ids = make_folds(n, opts.nfolds, opts.seed);
  std::vector<std::vector<int>> fold_rows(opts.nfolds);
  for (int i = 0; i < n; ++i) fold_rows[out.fold_ids[i]].push_back(i);

  PathOptions fold_opts = opts.path;
  fold_opts.lambda = out.lambda;  // shared grid, no early stopping

  std::vector<detail::FoldPredictions> folds(opts.nfolds);
  detail::run_folds(opts.nfolds, opts.threads, [&](int f) {
    detail::FoldPredictions& fp = folds[f];
    try {
    const auto& test_rows = fold_rows[f];
    if (family.is_binomial_like()) {
      bool pos = false, neg = false;
      for (int i : test_rows) (y[i] > 0.5 ? pos : neg) = true;
      if (!pos || !neg) {
        fp.skipped = true;  // held-out fold lacks a class
        return;
      }
    }
    std::vector<int> train_rows;
    for (int i = 0; i < n; ++i)
      if (out.fold_ids[i] != f) train_rows.push_back(i);
    std::vector<double> ytr, wtr;
    for (int i : train_rows) {
      ytr.push_back(y[i]);
      wtr.push_back(obs_w[i]);
    }
    const FeatureMatrix Xtr = [&] {
      // row subsetting through dense/sparse-preserving reconstruction
      std::vector<int> cp{0}, ri;
      std::vector<double> vv;
      if (X.is_sparse()) {
        std::vector<int> rowmap(n, -1);
        for (std::size_t t = 0; t < train_rows.size(); ++t) rowmap[train_rows[t]] = static_cast<int>(t);
        for (int j = 0; j < X.cols(); ++j) {
          X.for_col(j, [&](int i, double v) {
            if (rowmap[i] >= 0) {
              ri.push_back(rowmap[i]);
              vv.push_back(v);
            }
          });
          cp.push_back(static_cast<int>(ri.size()));
        }
        return FeatureMatrix::sparse(static_cast<int>(train_rows.size()), X.cols(),
                                     std::move(cp), std::move(ri), std::move(vv));
      }
      std::vector<double> vals;
      vals.reserve(train_rows.size() * X.cols());
      for (int j = 0; j < X.cols(); ++j)
        for (int i : train_rows) vals.push_back(X.at(i, j));
      return FeatureMatrix::dense(static_cast<int>(train_rows.size()), X.cols(),
                                  std::move(vals));
    }();
    const FeatureMatrix Xte = [&] {
      std::vector<double> vals;
      vals.reserve(test_rows.size() * X.cols());
      for (int j = 0; j < X.cols(); ++j)
        for (int i : test_rows) vals.push_back(X.at(i, j));
      return FeatureMatrix::dense(static_cast<int>(test_rows.size()), X.cols(),
                                  std::move(vals));
    }();
    try {
      if (opts.relax) {
        const RelaxedFit rf = fit_relaxed(Xtr, ytr, Weights{wtr}, family, penalty, fold_opts);
        fp.base = predict_path(rf.base, Xte, out.lambda, PredictType::link);
        std::vector<std::vector<double>> refit;
        for (double lam : out.lambda) {
          double b0 = 0.0;
          auto beta = relaxed_coefficients_at(rf, lam, 0.0, &b0);
          refit.push_back(predict_linear(Xte, beta, b0));
        }
        fp.refit = std::move(refit);
      } else {
        const PathFit pf = fit_glm_path(Xtr, ytr, Weights{wtr}, family, penalty, fold_opts);
        fp.base = predict_path(pf, Xte, out.lambda, PredictType::link);
      }
    } catch (const std::exception&) {
      fp.skipped = true;
    }
    } catch (...) {
      fp.skipped = true;
    }
  });

  auto fold_measure = [&](const std::vector<int>& rows, const std::vector<double>& pred) {
    std::vector<double> ys, ws;
    for (int i : rows) {
      ys.push_back(y[i]);
      ws.push_back(obs_w[i]);
    }
    return measure_glm(family, pred, ys, ws, m);
  };
  detail::aggregate_cv(out, folds, fold_rows, fold_measure, opts.gamma_grid, opts.relax,
                       nlambda, n, measure_maximized(m));
  if (!opts.keep) {
    out.fit_preval.clear();
    out.fit_preval_refit.clear();
  }
  return out;
}

/// K-fold CV for Cox paths; the held-out measure is the fold's own partial
/// likelihood (deviance per observation) or concordance.
inline CvResult cv_fit_cox(const FeatureMatrix& X, const SurvivalResponse& surv,
                           const Weights& obs_w, const PenaltySpec& penalty,
                           const CvOptions& opts = {}) {
  const int n = X.rows();
  CvResult out;
  const Measure m = opts.measure.value_or(Measure::deviance);
  {
    const auto valid = valid_measures_cox();
    if (std::find(valid.begin(), valid.end(), m) == valid.end())
      throw std::invalid_argument("cv: measure '" + measure_name(m) + "' invalid for Cox");
  }
  out.measure = measure_name(m);
  if (opts.relax) {
    out.relaxed = fit_relaxed_cox(X, surv, obs_w, penalty, opts.path);
    out.fit = out.relaxed->base;
    out.gamma_grid = opts.gamma_grid;
  } else {
    out.fit = fit_cox_path(X, surv, obs_w, penalty, opts.path);
  }
  out.lambda = out.fit.lambda;
  for (int k = 0; k < out.fit.n_lambda(); ++k)
    out.nonzero.push_back(out.fit.coefficients[k].nnz());
  const int nlambda = out.fit.n_lambda();

  out.fold_ids = make_folds(n, opts.nfolds, opts.seed);
  std::vector<std::vector<int>> fold_rows(opts.nfolds);
  for (int i = 0; i < n; ++i) fold_rows[out.fold_ids[i]].push_back(i);

  PathOptions fold_opts = opts.path;
  fold_opts.lambda = out.lambda;

  std::vector<detail::FoldPredictions> folds(opts.nfolds);
  detail::run_folds(opts.nfolds, opts.threads, [&](int f) {
    detail::FoldPredictions& fp = folds[f];
    try {
    const auto& test_rows = fold_rows[f];
    {
      int ho_fail = 0, tr_fail = 0;
      for (int i = 0; i < n; ++i) {
        if (surv.status()[i] == 1) (out.fold_ids[i] == f ? ho_fail : tr_fail)++;
      }
      if (ho_fail == 0 || tr_fail == 0) {
        fp.skipped = true;
        return;
      }
    }
    std::vector<int> train_rows;
    for (int i = 0; i < n; ++i)
      if (out.fold_ids[i] != f) train_rows.push_back(i);
    std::vector<double> wtr;
    for (int i : train_rows) wtr.push_back(obs_w[i]);
    std::vector<double> vals;
    vals.reserve(train_rows.size() * X.cols());
    for (int j = 0; j < X.cols(); ++j)
      for (int i : train_rows) vals.push_back(X.at(i, j));
    const FeatureMatrix Xtr = FeatureMatrix::dense(static_cast<int>(train_rows.size()),
                                                   X.cols(), std::move(vals));
    const SurvivalResponse struh = surv.subset(train_rows);
    std::vector<double> tvals;
    tvals.reserve(test_rows.size() * X.cols());
    for (int j = 0; j < X.cols(); ++j)
      for (int i : test_rows) tvals.push_back(X.at(i, j));
    const FeatureMatrix Xte = FeatureMatrix::dense(static_cast<int>(test_rows.size()),
                                                   X.cols(), std::move(tvals));
    try {
      if (opts.relax) {
        const RelaxedFit rf = fit_relaxed_cox(Xtr, struh, Weights{wtr}, penalty, fold_opts);
        fp.base = predict_path(rf.base, Xte, out.lambda, PredictType::link);
        std::vector<std::vector<double>> refit;
        for (double lam : out.lambda) {
          double b0 = 0.0;
          auto beta = relaxed_coefficients_at(rf, lam, 0.0, &b0);
          refit.push_back(predict_linear(Xte, beta, 0.0));
        }
        fp.refit = std::move(refit);
      } else {
        const PathFit pf = fit_cox_path(Xtr, struh, Weights{wtr}, penalty, fold_opts);
        fp.base = predict_path(pf, Xte, out.lambda, PredictType::link);
      }
    } catch (const std::exception&) {
      fp.skipped = true;
    }
    } catch (...) {
      fp.skipped = true;
    }
  });

  auto fold_measure = [&](const std::vector<int>& rows, const std::vector<double>& pred) {
    const SurvivalResponse sub = surv.subset(rows);
    std::vector<double> ws;
    for (int i : rows) ws.push_back(obs_w[i]);
    return measure_cox(sub, pred, ws, m);
  };
  detail::aggregate_cv(out, folds, fold_rows, fold_measure, opts.gamma_grid, opts.relax,
                       nlambda, n, measure_maximized(m));
  if (!opts.keep) {
    out.fit_preval.clear();
    out.fit_preval_refit.clear();
  }
  return out;
}

}  // namespace enetpath
