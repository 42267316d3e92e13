#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "enetpath/cox.hpp"
#include "enetpath/eval.hpp"
#include "enetpath/family.hpp"
#include "enetpath/relaxed.hpp"

namespace enetpath {

using nlohmann::json;

/// CLI string form of a family, parseable by FamilySpec::parse.
inline std::string family_to_string(const FamilySpec& f) {
  if (f.name() == "negative-binomial") {
    json v = f.theta();
    return "negative-binomial:theta=" + v.dump();
  }
  if (f.name() == "tweedie") {
    json v = f.variance_power();
    return "tweedie:q=" + v.dump();
  }
  return f.name();
}

/**
 * Serialized model: the fitted path plus enough metadata to predict without
 * refitting. Bounds use null for infinities; all floats round-trip exactly.
 */
struct ModelDocument {
  PathFit fit;
  std::optional<RelaxedFit> relaxed;
  std::vector<std::string> feature_names;
  // Cox extras: per-stratum failure times and per-lambda baseline increments
  struct CoxBlock {
    std::vector<int> strata_labels;
    std::vector<std::vector<double>> fail_times;                 // [stratum][time]
    std::vector<std::vector<std::vector<double>>> increments;    // [stratum][lambda][time]
  };
  std::optional<CoxBlock> cox;
};

/// Alias targets stored with a cv run.
struct CvSelection {
  double lambda_min = 0.0, lambda_1se = 0.0;
  double gamma_min = 1.0, gamma_1se = 1.0;
  bool relaxed = false;
  std::string measure;
};

namespace io_detail {

inline json bound_to_json(double v) {
  if (std::isinf(v)) return nullptr;
  return v;
}

inline double bound_from_json(const json& j, double sign) {
  if (j.is_null()) return sign * std::numeric_limits<double>::infinity();
  return j.get<double>();
}

inline json triplets(const std::vector<SparseCoefs>& coefs) {
  json arr = json::array();
  for (std::size_t k = 0; k < coefs.size(); ++k)
    for (std::size_t t = 0; t < coefs[k].index.size(); ++t)
      arr.push_back(json::array(
          {static_cast<int>(k), coefs[k].index[t], coefs[k].value[t]}));
  return arr;
}

inline std::vector<SparseCoefs> from_triplets(const json& arr, int nlambda, int p) {
  std::vector<SparseCoefs> out(nlambda);
  for (const auto& t : arr) {
    const int k = t.at(0).get<int>();
    const int j = t.at(1).get<int>();
    if (k < 0 || k >= nlambda || j < 0 || j >= p)
      throw std::invalid_argument("model: coefficient triplet out of range");
    out[k].index.push_back(j);
    out[k].value.push_back(t.at(2).get<double>());
  }
  for (auto& c : out) {
    // indices must come out sorted regardless of triplet order
    std::vector<std::size_t> ord(c.index.size());
    for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = i;
    std::sort(ord.begin(), ord.end(),
              [&](std::size_t a, std::size_t b) { return c.index[a] < c.index[b]; });
    SparseCoefs sorted;
    for (std::size_t i : ord) {
      sorted.index.push_back(c.index[i]);
      sorted.value.push_back(c.value[i]);
    }
    c = std::move(sorted);
  }
  return out;
}

inline json penalty_to_json(const PenaltySpec& pen) {
  json j;
  j["alpha"] = pen.alpha;
  j["factors"] = pen.factors;
  json lo = json::array(), hi = json::array();
  for (double v : pen.lower) lo.push_back(bound_to_json(v));
  for (double v : pen.upper) hi.push_back(bound_to_json(v));
  j["lower"] = lo;
  j["upper"] = hi;
  j["standardize"] = pen.standardize;
  j["intercept"] = pen.intercept;
  return j;
}

inline PenaltySpec penalty_from_json(const json& j) {
  const auto& f = j.at("factors");
  const int p = static_cast<int>(f.size());
  std::vector<double> factors = f.get<std::vector<double>>();
  std::vector<double> lo, hi;
  for (const auto& v : j.at("lower")) lo.push_back(bound_from_json(v, -1.0));
  for (const auto& v : j.at("upper")) hi.push_back(bound_from_json(v, 1.0));
  return PenaltySpec::make(p, j.at("alpha").get<double>(), std::move(factors), std::move(lo),
                           std::move(hi), j.at("standardize").get<bool>(),
                           j.at("intercept").get<bool>(),
                           /*rescale_factors=*/false);
}

}  // namespace io_detail

inline json model_to_json(const ModelDocument& doc) {
  const PathFit& fit = doc.fit;
  json j;
  j["schema_version"] = 1;
  j["kind"] = fit.is_cox ? "cox" : "glm";
  if (!fit.is_cox) j["family"] = family_to_string(*fit.family);
  j["penalty"] = io_detail::penalty_to_json(fit.penalty);
  j["lambda"] = fit.lambda;
  j["lambda_max"] = fit.lambda_max;
  j["intercepts"] = fit.intercepts;
  j["coefficients"] = io_detail::triplets(fit.coefficients);
  j["feature_names"] = doc.feature_names;
  j["column_stats"] = {{"means", fit.stats.means}, {"scales", fit.stats.scales}};
  j["dev_ratio"] = fit.dev_ratio;
  j["null_deviance"] = fit.null_deviance;
  j["n_obs"] = fit.n_obs;
  std::vector<int> conv(fit.converged.begin(), fit.converged.end());
  j["converged"] = conv;
  j["truncated"] = fit.truncated;
  if (doc.relaxed) {
    json r;
    r["coefficients"] = io_detail::triplets(doc.relaxed->refit_coefficients);
    r["intercepts"] = doc.relaxed->refit_intercepts;
    std::vector<int> ok(doc.relaxed->refit_ok.begin(), doc.relaxed->refit_ok.end());
    r["ok"] = ok;
    r["gamma_grid"] = std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0};
    j["relaxed"] = r;
  }
  if (doc.cox) {
    json c;
    c["strata_labels"] = doc.cox->strata_labels;
    c["fail_times"] = doc.cox->fail_times;
    c["baseline_increments"] = doc.cox->increments;
    j["cox"] = c;
  }
  return j;
}

inline ModelDocument model_from_json(const json& j) {
  if (j.at("schema_version").get<int>() != 1)
    throw std::invalid_argument("model: unsupported schema version");
  ModelDocument doc;
  PathFit& fit = doc.fit;
  fit.is_cox = j.at("kind").get<std::string>() == "cox";
  if (!fit.is_cox) fit.family = FamilySpec::parse(j.at("family").get<std::string>());
  fit.penalty = io_detail::penalty_from_json(j.at("penalty"));
  const int p = fit.penalty.n_features();
  fit.lambda = j.at("lambda").get<std::vector<double>>();
  fit.lambda_max = j.at("lambda_max").get<double>();
  fit.intercepts = j.at("intercepts").get<std::vector<double>>();
  fit.coefficients =
      io_detail::from_triplets(j.at("coefficients"), static_cast<int>(fit.lambda.size()), p);
  doc.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  fit.stats.means = j.at("column_stats").at("means").get<std::vector<double>>();
  fit.stats.scales = j.at("column_stats").at("scales").get<std::vector<double>>();
  fit.stats.zero_variance.assign(p, 0);
  for (int t = 0; t < p; ++t) fit.stats.zero_variance[t] = fit.stats.scales[t] == 0.0 ? 1 : 0;
  fit.dev_ratio = j.at("dev_ratio").get<std::vector<double>>();
  fit.null_deviance = j.at("null_deviance").get<double>();
  fit.n_obs = j.at("n_obs").get<int>();
  for (int v : j.at("converged").get<std::vector<int>>())
    fit.converged.push_back(static_cast<char>(v));
  fit.truncated = j.at("truncated").get<bool>();
  if (j.contains("relaxed")) {
    RelaxedFit r;
    r.base = fit;
    const auto& jr = j.at("relaxed");
    r.refit_coefficients = io_detail::from_triplets(
        jr.at("coefficients"), static_cast<int>(fit.lambda.size()), p);
    r.refit_intercepts = jr.at("intercepts").get<std::vector<double>>();
    for (int v : jr.at("ok").get<std::vector<int>>())
      r.refit_ok.push_back(static_cast<char>(v));
    doc.relaxed = std::move(r);
  }
  if (j.contains("cox")) {
    ModelDocument::CoxBlock c;
    c.strata_labels = j.at("cox").at("strata_labels").get<std::vector<int>>();
    c.fail_times = j.at("cox").at("fail_times").get<std::vector<std::vector<double>>>();
    c.increments = j.at("cox")
                       .at("baseline_increments")
                       .get<std::vector<std::vector<std::vector<double>>>>();
    doc.cox = std::move(c);
  }
  return doc;
}

inline std::string serialize_model(const ModelDocument& doc) {
  return model_to_json(doc).dump(2) + "\n";
}

inline ModelDocument parse_model(const std::string& text) {
  return model_from_json(json::parse(text));
}

// ---------------------------------------------------------------------------
// cv result document: selection summary plus the embedded full-data model

inline json cv_to_json(const CvResult& cv, const ModelDocument& doc) {
  json j;
  j["schema_version"] = 1;
  json c;
  c["lambda"] = cv.lambda;
  c["cvm"] = cv.cvm;
  c["cvsd"] = cv.cvsd;
  c["lambda_min"] = cv.lambda_min;
  c["lambda_1se"] = cv.lambda_1se;
  c["measure"] = cv.measure;
  c["nonzero"] = cv.nonzero;
  c["fold_ids"] = cv.fold_ids;
  std::vector<int> skipped(cv.fold_skipped.begin(), cv.fold_skipped.end());
  c["fold_skipped"] = skipped;
  c["n_used_folds"] = cv.n_used_folds;
  if (!cv.gamma_grid.empty()) {
    c["gamma_grid"] = cv.gamma_grid;
    c["gamma_min"] = cv.gamma_min;
    c["gamma_1se"] = cv.gamma_1se;
  }
  if (!cv.fit_preval.empty()) c["fit_preval"] = cv.fit_preval;
  if (!cv.fit_preval_refit.empty()) c["fit_preval_refit"] = cv.fit_preval_refit;
  j["cv"] = c;
  j["model"] = model_to_json(doc);
  return j;
}

/// A model file is either a bare model document or a cv document embedding one.
struct LoadedModel {
  ModelDocument doc;
  std::optional<CvSelection> cv;
};

inline LoadedModel load_model_json(const json& j) {
  LoadedModel out;
  if (j.contains("model")) {
    out.doc = model_from_json(j.at("model"));
    CvSelection sel;
    const auto& c = j.at("cv");
    sel.lambda_min = c.at("lambda_min").get<double>();
    sel.lambda_1se = c.at("lambda_1se").get<double>();
    if (c.contains("gamma_min")) {
      sel.gamma_min = c.at("gamma_min").get<double>();
      sel.gamma_1se = c.at("gamma_1se").get<double>();
      sel.relaxed = true;
    }
    sel.measure = c.at("measure").get<std::string>();
    out.cv = sel;
  } else {
    out.doc = model_from_json(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// atomic file write: full content to a temp file, then rename

inline void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os << content;
    if (!os.good()) {
      os.close();
      fs::remove(tmp);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  fs::rename(tmp, target);
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Cox block for a fitted path: baseline increments at every stored lambda.
inline ModelDocument::CoxBlock make_cox_block(const PathFit& fit, const FeatureMatrix& X,
                                              const SurvivalResponse& surv,
                                              const Weights& obs_w) {
  ModelDocument::CoxBlock block;
  block.strata_labels = surv.strata_ids();
  block.fail_times.resize(surv.n_strata());
  block.increments.assign(surv.n_strata(), {});
  for (int g = 0; g < surv.n_strata(); ++g)
    block.fail_times[g] = surv.strata_cache()[g].fail_times;
  for (int k = 0; k < fit.n_lambda(); ++k) {
    const auto curves = baseline_hazard(fit, fit.lambda[k], X, surv, obs_w);
    for (int g = 0; g < surv.n_strata(); ++g)
      block.increments[g].push_back(curves[g].increments);
  }
  return block;
}

}  // namespace enetpath
