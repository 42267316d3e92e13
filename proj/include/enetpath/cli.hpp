#pragma once

#include <charconv>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "enetpath/csv.hpp"
#include "enetpath/eval.hpp"
#include "enetpath/model_io.hpp"

namespace enetpath {
namespace cli {

inline std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct ResponseFlags {
  std::string response;
  std::string time_col, status_col, start_col, strata_col, weights_col;
  bool survival() const { return !time_col.empty() || !status_col.empty(); }
};

struct Dataset {
  std::optional<FeatureMatrix> X;
  std::vector<std::string> feature_names;
  std::vector<double> y;
  std::optional<SurvivalResponse> surv;
  std::optional<Weights> weights;
  std::vector<std::string> strata_labels;  // distinct label strings, by id
};

/// Feature columns are every numeric column not claimed by a response flag,
/// in header order. `--sparse` stores exact zeros as structural zeros.
inline Dataset ingest_csv(const CsvTable& table, const ResponseFlags& spec, bool sparse,
                          const std::vector<std::string>& feature_subset = {},
                          bool require_response = true) {
  Dataset out;
  std::vector<std::string> reserved{spec.response,  spec.time_col,   spec.status_col,
                                    spec.start_col, spec.strata_col, spec.weights_col};
  std::vector<std::string> features;
  if (!feature_subset.empty()) {
    features = feature_subset;
  } else {
    for (const auto& c : table.columns()) {
      bool taken = false;
      for (const auto& r : reserved)
        if (!r.empty() && r == c) taken = true;
      if (!taken) features.push_back(c);
    }
  }
  if (features.empty()) throw std::invalid_argument("ingest: no feature columns left");
  const int n = table.n_rows();
  const int p = static_cast<int>(features.size());

  if (sparse) {
    std::vector<int> cp{0}, ri;
    std::vector<double> vv;
    for (const auto& name : features) {
      const int j = table.column_index(name);
      for (int i = 0; i < n; ++i) {
        const double v = table.numeric_cell(i, j);
        if (v != 0.0) {
          ri.push_back(i);
          vv.push_back(v);
        }
      }
      cp.push_back(static_cast<int>(ri.size()));
    }
    out.X = FeatureMatrix::sparse(n, p, std::move(cp), std::move(ri), std::move(vv));
  } else {
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(n) * p);
    for (const auto& name : features) {
      const int j = table.column_index(name);
      for (int i = 0; i < n; ++i) vals.push_back(table.numeric_cell(i, j));
    }
    out.X = FeatureMatrix::dense(n, p, std::move(vals));
  }
  out.feature_names = features;

  if (!spec.weights_col.empty()) out.weights = Weights(table.numeric_column(spec.weights_col));
  else out.weights = Weights::uniform(n);

  if (spec.survival()) {
    if (spec.time_col.empty() || spec.status_col.empty())
      throw std::invalid_argument("ingest: survival responses need --time and --status");
    std::vector<double> stop = table.numeric_column(spec.time_col);
    std::vector<double> start(n, 0.0);
    if (!spec.start_col.empty()) start = table.numeric_column(spec.start_col);
    std::vector<double> status_raw = table.numeric_column(spec.status_col);
    std::vector<int> status(n);
    for (int i = 0; i < n; ++i) {
      if (status_raw[i] != 0.0 && status_raw[i] != 1.0)
        throw std::invalid_argument("ingest: row " + std::to_string(i + 2) + ", column '" +
                                    spec.status_col + "': status must be 0 or 1");
      status[i] = static_cast<int>(status_raw[i]);
      if (!(start[i] >= 0.0) || !(stop[i] > start[i]))
        throw std::invalid_argument("ingest: row " + std::to_string(i + 2) +
                                    ": need stop > start >= 0 in columns '" +
                                    (spec.start_col.empty() ? "0" : spec.start_col) + "'/'" +
                                    spec.time_col + "'");
    }
    std::vector<int> strata(n, 0);
    if (!spec.strata_col.empty()) {
      const auto labels = table.string_column(spec.strata_col);
      std::map<std::string, int> ids;
      for (const auto& l : labels) ids.emplace(l, 0);
      int next = 0;
      for (auto& kv : ids) kv.second = next++;
      for (int i = 0; i < n; ++i) strata[i] = ids.at(labels[i]);
      out.strata_labels.resize(ids.size());
      for (const auto& kv : ids) out.strata_labels[kv.second] = kv.first;
    } else {
      out.strata_labels = {"0"};
    }
    out.surv = spec.start_col.empty()
                   ? SurvivalResponse::right_censored(stop, status, strata)
                   : SurvivalResponse::start_stop(start, stop, status, strata);
  } else if (!spec.response.empty()) {
    out.y = table.numeric_column(spec.response);
  } else if (require_response) {
    throw std::invalid_argument("ingest: need --response or --time/--status");
  }
  return out;
}

// ---------------------------------------------------------------------------

struct CommonFlags {
  std::string data;
  ResponseFlags resp;
  std::string family = "gaussian";
  double alpha = 1.0;
  int nlambda = 100;
  double lambda_min_ratio = 0.0;
  std::string penalty_factors, lower, upper;
  bool no_standardize = false, no_intercept = false, sparse = false, relax = false;
  std::uint64_t seed = 42;
  int threads = 1;
  std::string out;
};

inline void add_common_flags(CLI::App* cmd, CommonFlags& f, bool with_model_opts = true) {
  cmd->add_option("--data", f.data, "input CSV with a header row")->required();
  cmd->add_option("--response", f.resp.response, "response column (GLM)");
  cmd->add_option("--time,--stop", f.resp.time_col, "observed/stop time column (Cox)");
  cmd->add_option("--status", f.resp.status_col, "event indicator column (Cox)");
  cmd->add_option("--start", f.resp.start_col, "entry time column ((start,stop] Cox)");
  cmd->add_option("--strata", f.resp.strata_col, "strata column (Cox)");
  cmd->add_option("--weights", f.resp.weights_col, "observation weight column");
  cmd->add_flag("--sparse", f.sparse, "ingest features as compressed sparse columns");
  if (with_model_opts) {
    cmd->add_option("--family", f.family,
                    "gaussian|binomial|binomial:probit|quasibinomial|poisson|quasipoisson|"
                    "negative-binomial:theta=V|gamma|inverse-gaussian|tweedie:q=V");
    cmd->add_option("--alpha", f.alpha, "elastic-net mixing parameter in [0,1]");
    cmd->add_option("--nlambda", f.nlambda, "path length");
    cmd->add_option("--lambda-min-ratio", f.lambda_min_ratio,
                    "smallest lambda as a fraction of lambda_max");
    cmd->add_option("--penalty-factors", f.penalty_factors,
                    "comma-separated per-feature penalty factors");
    cmd->add_option("--lower", f.lower, "coefficient lower bound(s): scalar or comma list");
    cmd->add_option("--upper", f.upper, "coefficient upper bound(s): scalar or comma list");
    cmd->add_flag("--no-standardize", f.no_standardize, "skip column standardization");
    cmd->add_flag("--no-intercept", f.no_intercept, "fit without an intercept");
    cmd->add_flag("--relax", f.relax, "add unpenalized refits on each active set");
  }
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--threads", f.threads, "cv fold parallelism");
  cmd->add_option("--out", f.out, "output path");
}

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

inline PenaltySpec make_penalty(const CommonFlags& f, int p) {
  std::vector<double> factors, lower, upper;
  if (!f.penalty_factors.empty()) {
    factors = parse_double_list(f.penalty_factors);
    if (factors.size() != static_cast<std::size_t>(p))
      throw std::invalid_argument("--penalty-factors needs one value per feature");
  }
  auto expand = [&](const std::string& s) {
    std::vector<double> v;
    if (s.empty()) return v;
    v = parse_double_list(s);
    if (v.size() == 1) v.assign(p, v[0]);
    if (v.size() != static_cast<std::size_t>(p))
      throw std::invalid_argument("bounds need 1 value or one per feature");
    return v;
  };
  lower = expand(f.lower);
  upper = expand(f.upper);
  return PenaltySpec::make(p, f.alpha, std::move(factors), std::move(lower), std::move(upper),
                           !f.no_standardize, !f.no_intercept);
}

inline PathOptions make_path_options(const CommonFlags& f) {
  PathOptions opts;
  opts.nlambda = f.nlambda;
  opts.lambda_min_ratio = f.lambda_min_ratio;
  return opts;
}

inline bool is_cox_request(const CommonFlags& f) {
  if (f.resp.survival()) {
    if (!f.resp.response.empty())
      throw std::invalid_argument("give either --response or --time/--status, not both");
    return true;
  }
  return false;
}

/// Numeric value, or one of lambda.min / lambda.1se / lambda.max.
inline double resolve_s(const std::string& s, const LoadedModel& model) {
  if (s == "lambda.max") return model.doc.fit.lambda.front();
  if (s == "lambda.min" || s == "lambda.1se") {
    if (!model.cv)
      throw std::invalid_argument("s='" + s + "' needs a cv model document");
    return s == "lambda.min" ? model.cv->lambda_min : model.cv->lambda_1se;
  }
  return std::stod(s);
}

// ---------------------------------------------------------------------------

inline int cmd_fit(const CommonFlags& f) {
  if (f.out.empty()) throw std::invalid_argument("fit: --out is required");
  const CsvTable table = CsvTable::read(f.data);
  const Dataset data = ingest_csv(table, f.resp, f.sparse);
  const int p = data.X->cols();
  const PenaltySpec penalty = make_penalty(f, p);
  const PathOptions opts = make_path_options(f);

  ModelDocument doc;
  doc.feature_names = data.feature_names;
  if (is_cox_request(f)) {
    if (f.relax) {
      RelaxedFit rf = fit_relaxed_cox(*data.X, *data.surv, *data.weights, penalty, opts);
      if (rf.alpha_warning)
        std::cerr << "warning: relaxation with alpha < 1 is discouraged\n";
      doc.fit = rf.base;
      doc.relaxed = std::move(rf);
    } else {
      doc.fit = fit_cox_path(*data.X, *data.surv, *data.weights, penalty, opts);
    }
    doc.cox = make_cox_block(doc.fit, *data.X, *data.surv, *data.weights);
  } else {
    const FamilySpec family = FamilySpec::parse(f.family);
    if (f.relax) {
      RelaxedFit rf = fit_relaxed(*data.X, data.y, *data.weights, family, penalty, opts);
      if (rf.alpha_warning)
        std::cerr << "warning: relaxation with alpha < 1 is discouraged\n";
      doc.fit = rf.base;
      doc.relaxed = std::move(rf);
    } else {
      doc.fit = fit_glm_path(*data.X, data.y, *data.weights, family, penalty, opts);
    }
  }
  write_file_atomic(f.out, serialize_model(doc));
  std::cout << "wrote " << f.out << ": " << doc.fit.n_lambda() << " lambdas, dev_ratio "
            << fmt(doc.fit.dev_ratio.empty() ? 0.0 : doc.fit.dev_ratio.back()) << "\n";
  return 0;
}

struct CvFlags {
  CommonFlags common;
  int nfolds = 10;
  std::string measure = "default";
  bool keep = false;
  std::string plot_out;
  std::string gamma_grid;
};

inline int cmd_cv(const CvFlags& cf) {
  const CommonFlags& f = cf.common;
  if (f.out.empty()) throw std::invalid_argument("cv: --out is required");
  const CsvTable table = CsvTable::read(f.data);
  const Dataset data = ingest_csv(table, f.resp, f.sparse);
  const int p = data.X->cols();
  const PenaltySpec penalty = make_penalty(f, p);

  CvOptions opts;
  opts.nfolds = cf.nfolds;
  if (cf.measure != "default") opts.measure = parse_measure(cf.measure);
  opts.seed = f.seed;
  opts.keep = cf.keep;
  opts.relax = f.relax;
  opts.threads = f.threads;
  opts.path = make_path_options(f);
  if (!cf.gamma_grid.empty()) opts.gamma_grid = parse_double_list(cf.gamma_grid);

  CvResult cv = is_cox_request(f)
                    ? cv_fit_cox(*data.X, *data.surv, *data.weights, penalty, opts)
                    : cv_fit(*data.X, data.y, *data.weights, FamilySpec::parse(f.family),
                             penalty, opts);

  ModelDocument doc;
  doc.feature_names = data.feature_names;
  doc.fit = cv.fit;
  if (cv.relaxed) doc.relaxed = cv.relaxed;
  if (is_cox_request(f))
    doc.cox = make_cox_block(doc.fit, *data.X, *data.surv, *data.weights);
  write_file_atomic(f.out, cv_to_json(cv, doc).dump(2) + "\n");

  // plot-ready CSV: one line per (gamma, lambda)
  std::ostringstream plot;
  plot << "gamma,log_lambda,cvm,cvm_lo,cvm_hi,nonzero\n";
  const int ngamma = cv.gamma_grid.empty() ? 1 : static_cast<int>(cv.gamma_grid.size());
  for (int g = 0; g < ngamma; ++g) {
    const double gamma = cv.gamma_grid.empty() ? 1.0 : cv.gamma_grid[g];
    for (std::size_t k = 0; k < cv.lambda.size(); ++k) {
      plot << fmt(gamma) << ',' << fmt(std::log(cv.lambda[k])) << ',' << fmt(cv.cvm[g][k])
           << ',' << fmt(cv.cvm[g][k] - cv.cvsd[g][k]) << ','
           << fmt(cv.cvm[g][k] + cv.cvsd[g][k]) << ',' << cv.nonzero[k] << "\n";
    }
  }
  const std::string plot_path = cf.plot_out.empty() ? f.out + ".plot.csv" : cf.plot_out;
  write_file_atomic(plot_path, plot.str());

  std::cout << "wrote " << f.out << " and " << plot_path << ": lambda_min "
            << fmt(cv.lambda_min) << ", lambda_1se " << fmt(cv.lambda_1se) << " ("
            << cv.measure << ")\n";
  return 0;
}

struct PredictFlags {
  std::string model, data, out;
  std::vector<std::string> s;
  std::vector<double> gamma;
  std::string type = "link";
  bool sparse = false;
};

inline int cmd_predict(const PredictFlags& pf) {
  const LoadedModel model = load_model_json(json::parse(read_file(pf.model)));
  const CsvTable table = CsvTable::read(pf.data);
  ResponseFlags none;
  const Dataset data =
      ingest_csv(table, none, pf.sparse, model.doc.feature_names, false);

  std::vector<double> svals;
  std::vector<std::string> snames;
  if (pf.s.empty()) {
    if (model.cv) {
      svals.push_back(model.cv->lambda_1se);
      snames.push_back("lambda.1se");
    } else {
      for (double l : model.doc.fit.lambda) {
        svals.push_back(l);
        snames.push_back("s=" + fmt(l));
      }
    }
  } else {
    for (const auto& s : pf.s) {
      svals.push_back(resolve_s(s, model));
      snames.push_back(s);
    }
  }
  std::vector<double> gammas = pf.gamma;
  if (gammas.empty())
    gammas.push_back(model.cv && model.cv->relaxed ? model.cv->gamma_1se : 1.0);
  if (!model.doc.relaxed)
    for (double g : gammas)
      if (g != 1.0)
        throw std::invalid_argument("predict: gamma != 1 needs a relaxed model document");

  PredictType type = PredictType::link;
  if (pf.type == "response") type = PredictType::response;
  else if (pf.type == "class") type = PredictType::cls;
  else if (pf.type != "link") throw std::invalid_argument("predict: unknown --type");

  std::vector<std::vector<double>> cols;
  std::vector<std::string> headers;
  bool clamped = false;
  for (std::size_t si = 0; si < svals.size(); ++si) {
    for (double g : gammas) {
      std::vector<double> col;
      if (model.doc.relaxed && g != 1.0) {
        col = predict_relaxed(*model.doc.relaxed, *data.X, {svals[si]}, g, type, &clamped)
                  .front();
      } else {
        col = predict_path(model.doc.fit, *data.X, {svals[si]}, type, &clamped).front();
      }
      cols.push_back(std::move(col));
      headers.push_back(gammas.size() > 1 || (model.doc.relaxed && g != 1.0)
                            ? snames[si] + ",g=" + fmt(g)
                            : snames[si]);
    }
  }
  if (clamped) std::cerr << "warning: requested s outside the fitted lambda range; clamped\n";

  std::ostringstream os;
  os << "row";
  for (const auto& h : headers) os << ',' << '"' << h << '"';
  os << "\n";
  for (int i = 0; i < data.X->rows(); ++i) {
    os << i;
    for (const auto& c : cols) os << ',' << fmt(c[i]);
    os << "\n";
  }
  if (pf.out.empty()) std::cout << os.str();
  else {
    write_file_atomic(pf.out, os.str());
    std::cout << "wrote " << pf.out << "\n";
  }
  return 0;
}

struct AssessFlags {
  CommonFlags common;
  std::string model, pred;
  std::string s = "";       // optional single s (alias or numeric)
  double gamma = -1.0;      // optional gamma for relaxed docs
  std::string roc_out, confusion_out;
};

inline int cmd_assess(const AssessFlags& af) {
  const CommonFlags& f = af.common;
  const CsvTable table = CsvTable::read(f.data);
  json result;
  std::vector<double> roc_scores;
  std::vector<int> roc_labels;
  std::vector<int> cls_pred, cls_true;
  bool is_binomial = false;

  if (!af.pred.empty()) {
    // prediction matrix + response; family names the measure set
    const FamilySpec family = FamilySpec::parse(f.family);
    is_binomial = family.is_binomial_like();
    Dataset data;
    if (f.resp.survival()) throw std::invalid_argument("assess: prediction mode is GLM-only");
    data.y = table.numeric_column(f.resp.response);
    const Weights w = f.resp.weights_col.empty()
                          ? Weights::uniform(table.n_rows())
                          : Weights(table.numeric_column(f.resp.weights_col));
    const CsvTable preds = CsvTable::read(af.pred);
    if (preds.n_rows() != table.n_rows())
      throw std::invalid_argument("assess: prediction rows do not match data rows");
    std::vector<std::string> pred_cols;
    for (const auto& c : preds.columns())
      if (c != "row") pred_cols.push_back(c);
    json measures;
    for (Measure m : valid_measures(family)) {
      json vals = json::array();
      for (const auto& c : pred_cols)
        vals.push_back(measure_glm(family, preds.numeric_column(c), data.y, w.values(), m));
      measures[measure_name(m)] = vals;
    }
    result["measures"] = measures;
    result["columns"] = pred_cols;
    result["family"] = family_to_string(family);
    if (is_binomial && pred_cols.size() == 1) {
      roc_scores = preds.numeric_column(pred_cols[0]);
      for (double yv : data.y) roc_labels.push_back(yv > 0.5 ? 1 : 0);
      const auto fam = family;
      for (double sc : roc_scores) cls_pred.push_back(fam.link_inverse(sc) >= 0.5 ? 1 : 0);
      for (double yv : data.y) cls_true.push_back(yv > 0.5 ? 1 : 0);
    }
  } else if (!af.model.empty()) {
    const LoadedModel model = load_model_json(json::parse(read_file(af.model)));
    const Dataset data = ingest_csv(table, f.resp, f.sparse, model.doc.feature_names);
    const Weights& w = *data.weights;

    std::vector<double> svals;
    std::vector<std::string> snames;
    if (!af.s.empty()) {
      svals.push_back(resolve_s(af.s, model));
      snames.push_back(af.s);
    } else if (model.cv) {
      svals.push_back(model.cv->lambda_1se);
      snames.push_back("lambda.1se");
    } else {
      for (double l : model.doc.fit.lambda) {
        svals.push_back(l);
        snames.push_back(fmt(l));
      }
    }
    const double gamma =
        af.gamma >= 0.0 ? af.gamma
                        : (model.cv && model.cv->relaxed ? model.cv->gamma_1se : 1.0);

    auto predictions_at = [&](double s) {
      if (model.doc.relaxed && gamma != 1.0)
        return predict_relaxed(*model.doc.relaxed, *data.X, {s}, gamma).front();
      return predict_path(model.doc.fit, *data.X, {s}).front();
    };

    json measures;
    if (model.doc.fit.is_cox) {
      if (!data.surv) throw std::invalid_argument("assess: Cox model needs --time/--status");
      for (Measure m : valid_measures_cox()) {
        json vals = json::array();
        for (double s : svals)
          vals.push_back(measure_cox(*data.surv, predictions_at(s), w.values(), m));
        measures[measure_name(m)] = vals;
      }
    } else {
      const FamilySpec& family = *model.doc.fit.family;
      is_binomial = family.is_binomial_like();
      if (data.y.empty()) throw std::invalid_argument("assess: GLM model needs --response");
      for (Measure m : valid_measures(family)) {
        json vals = json::array();
        for (double s : svals)
          vals.push_back(measure_glm(family, predictions_at(s), data.y, w.values(), m));
        measures[measure_name(m)] = vals;
      }
      if (is_binomial && svals.size() == 1) {
        roc_scores = predictions_at(svals[0]);
        for (double yv : data.y) roc_labels.push_back(yv > 0.5 ? 1 : 0);
        for (double sc : roc_scores)
          cls_pred.push_back(family.link_inverse(sc) >= 0.5 ? 1 : 0);
        for (double yv : data.y) cls_true.push_back(yv > 0.5 ? 1 : 0);
      }
    }
    result["measures"] = measures;
    result["s"] = snames;
    if (model.doc.relaxed) result["gamma"] = gamma;
  } else {
    throw std::invalid_argument("assess: give --model or --pred");
  }

  if (!af.roc_out.empty()) {
    if (roc_scores.empty())
      throw std::invalid_argument(
          "assess: --roc-out needs a binomial assessment of a single prediction column");
    std::ostringstream os;
    os << "fpr,tpr\n";
    for (const auto& pt : roc_curve(roc_scores, roc_labels))
      os << fmt(pt.fpr) << ',' << fmt(pt.tpr) << "\n";
    write_file_atomic(af.roc_out, os.str());
  }
  if (!af.confusion_out.empty()) {
    if (cls_pred.empty())
      throw std::invalid_argument(
          "assess: --confusion-out needs a binomial assessment of a single prediction column");
    write_file_atomic(af.confusion_out, confusion_matrix(cls_pred, cls_true).format());
  }

  const std::string text = result.dump(2) + "\n";
  if (f.out.empty()) std::cout << text;
  else {
    write_file_atomic(f.out, text);
    std::cout << "wrote " << f.out << "\n";
  }
  return 0;
}

struct SurvcurveFlags {
  CommonFlags common;
  std::string model, newdata, s;
  std::string new_strata_col;
};

inline int cmd_survcurve(const SurvcurveFlags& sf) {
  const CommonFlags& f = sf.common;
  const LoadedModel model = load_model_json(json::parse(read_file(sf.model)));
  if (!model.doc.fit.is_cox) throw std::invalid_argument("survcurve: model is not a Cox fit");
  const CsvTable table = CsvTable::read(f.data);
  const Dataset train = ingest_csv(table, f.resp, f.sparse, model.doc.feature_names);
  if (!train.surv) throw std::invalid_argument("survcurve: training data needs --time/--status");

  double s = 0.0;
  if (!sf.s.empty()) s = resolve_s(sf.s, model);
  else if (model.cv) s = model.cv->lambda_1se;
  else throw std::invalid_argument("survcurve: --s is required for a plain fit document");

  const CsvTable newtab = sf.newdata.empty() ? table : CsvTable::read(sf.newdata);
  ResponseFlags none;
  const Dataset newdata = ingest_csv(newtab, none, false, model.doc.feature_names, false);

  std::vector<int> new_strata;
  if (train.surv->n_strata() > 1) {
    const std::string col = sf.new_strata_col.empty() ? f.resp.strata_col : sf.new_strata_col;
    if (col.empty())
      throw std::invalid_argument("survcurve: stratified fit needs --strata for new rows");
    const auto labels = newtab.string_column(col);
    for (const auto& l : labels) {
      int id = -1;
      for (std::size_t g = 0; g < train.strata_labels.size(); ++g)
        if (train.strata_labels[g] == l) id = train.surv->strata_ids()[g];
      if (id < 0) throw std::invalid_argument("survcurve: unknown stratum label '" + l + "'");
      new_strata.push_back(id);
    }
  }

  const auto curves = survival_curve(model.doc.fit, s, *train.X, *train.surv, *newdata.X,
                                     new_strata, *train.weights);
  auto stratum_label = [&](int id) {
    for (std::size_t g = 0; g < train.surv->strata_ids().size(); ++g)
      if (train.surv->strata_ids()[g] == id && g < train.strata_labels.size())
        return train.strata_labels[g];
    return std::to_string(id);
  };
  std::ostringstream os;
  os << "time,survival,stratum,row\n";
  for (std::size_t r = 0; r < curves.size(); ++r) {
    const std::string label = stratum_label(curves[r].stratum);
    for (std::size_t q = 0; q < curves[r].times.size(); ++q)
      os << fmt(curves[r].times[q]) << ',' << fmt(curves[r].survival[q]) << ',' << label
         << ',' << r << "\n";
  }
  if (f.out.empty()) std::cout << os.str();
  else {
    write_file_atomic(f.out, os.str());
    std::cout << "wrote " << f.out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"elastic-net regularization paths for GLMs and Cox models"};
  app.require_subcommand(1);

  CommonFlags fit_flags;
  auto* fit_cmd = app.add_subcommand("fit", "fit a regularization path");
  add_common_flags(fit_cmd, fit_flags);

  CvFlags cv_flags;
  auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation");
  add_common_flags(cv_cmd, cv_flags.common);
  cv_cmd->add_option("--nfolds", cv_flags.nfolds, "number of folds");
  cv_cmd->add_option("--measure", cv_flags.measure,
                     "deviance|mse|mae|class|auc|C (default: deviance)");
  cv_cmd->add_flag("--keep", cv_flags.keep, "retain pre-validated predictions");
  cv_cmd->add_option("--plot-out", cv_flags.plot_out, "plot CSV path");
  cv_cmd->add_option("--gamma-grid", cv_flags.gamma_grid, "relaxed gamma grid (comma list)");

  PredictFlags pred_flags;
  auto* pred_cmd = app.add_subcommand("predict", "predict from a model document");
  pred_cmd->add_option("--model", pred_flags.model, "model JSON")->required();
  pred_cmd->add_option("--data", pred_flags.data, "CSV with the model's feature columns")
      ->required();
  pred_cmd->add_option("--s", pred_flags.s, "lambda value(s), lambda.min/1se/max aliases");
  pred_cmd->add_option("--gamma", pred_flags.gamma, "relaxed blend value(s) in [0,1]");
  pred_cmd->add_option("--type", pred_flags.type, "link|response|class");
  pred_cmd->add_flag("--sparse", pred_flags.sparse, "sparse ingestion");
  pred_cmd->add_option("--out", pred_flags.out, "output CSV (stdout when absent)");

  AssessFlags assess_flags;
  auto* assess_cmd = app.add_subcommand("assess", "performance measures on data");
  add_common_flags(assess_cmd, assess_flags.common, false);
  assess_cmd->add_option("--family", assess_flags.common.family,
                         "family for --pred mode (default gaussian)");
  assess_cmd->add_option("--model", assess_flags.model, "model JSON");
  assess_cmd->add_option("--pred", assess_flags.pred, "prediction CSV (link scale)");
  assess_cmd->add_option("--s", assess_flags.s, "lambda value or alias");
  assess_cmd->add_option("--gamma", assess_flags.gamma, "relaxed blend value");
  assess_cmd->add_option("--roc-out", assess_flags.roc_out, "ROC curve CSV (binomial)");
  assess_cmd->add_option("--confusion-out", assess_flags.confusion_out,
                         "confusion table text (binomial)");

  SurvcurveFlags surv_flags;
  auto* surv_cmd = app.add_subcommand("survcurve", "Breslow survival curves");
  add_common_flags(surv_cmd, surv_flags.common, false);
  surv_cmd->add_option("--model", surv_flags.model, "Cox model JSON")->required();
  surv_cmd->add_option("--newdata", surv_flags.newdata, "rows to predict (default: --data)");
  surv_cmd->add_option("--s", surv_flags.s, "lambda value or alias");
  surv_cmd->add_option("--new-strata", surv_flags.new_strata_col,
                       "strata column in --newdata");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_flags);
    if (cv_cmd->parsed()) return cmd_cv(cv_flags);
    if (pred_cmd->parsed()) return cmd_predict(pred_flags);
    if (assess_cmd->parsed()) return cmd_assess(assess_flags);
    if (surv_cmd->parsed()) return cmd_survcurve(surv_flags);
  } catch (const std::exception& e) {
    json err;
    err["error"] = {{"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace cli
}  // namespace enetpath
