#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "enetpath/cli.hpp"
#include "oracles.hpp"

using namespace enetpath;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() /
          ("enetpath_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"enetpath"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
}

std::string make_gaussian_csv(const TempDir& tmp, int n = 40, unsigned seed = 700) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::ostringstream os;
  os << "a,b,c,y\n";
  for (int i = 0; i < n; ++i) {
    const double a = N(rng), b = N(rng), c = N(rng);
    const double y = 2.0 * a - b + 0.3 * N(rng);
    os << a << ',' << b << ',' << c << ',' << y << "\n";
  }
  const std::string p = tmp.path("data.csv");
  write_text(p, os.str());
  return p;
}

std::string make_survival_csv(const TempDir& tmp, int n = 50, unsigned seed = 701) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::ostringstream os;
  os << "a,b,time,status,grp\n";
  for (int i = 0; i < n; ++i) {
    const double a = N(rng), b = N(rng);
    const double t = -std::log(U(rng)) / std::exp(0.7 * a);
    os << a << ',' << b << ',' << t << ',' << (U(rng) < 0.8 ? 1 : 0) << ','
       << (i % 2 ? "m" : "f") << "\n";
  }
  const std::string p = tmp.path("surv.csv");
  write_text(p, os.str());
  return p;
}

}  // namespace

TEST_CASE("csv ingestion: shapes, sparse zeros, and error coordinates") {
  TempDir tmp;
  const std::string p = tmp.path("small.csv");
  write_text(p, "a,b,y\n1,0,2\n0,0,3\n4,5,6\n");
  auto table = CsvTable::read(p);
  cli::ResponseFlags spec;
  spec.response = "y";
  auto dense = cli::ingest_csv(table, spec, false);
  REQUIRE(dense.X->rows() == 3);
  REQUIRE(dense.X->cols() == 2);
  REQUIRE(dense.y == std::vector<double>{2.0, 3.0, 6.0});

  auto sparse = cli::ingest_csv(table, spec, true);
  REQUIRE(sparse.X->is_sparse());
  REQUIRE(sparse.X->col_nnz(0) == 2);
  REQUIRE(sparse.X->col_nnz(1) == 1);

  // non-numeric cell with coordinates
  write_text(p, "a,y\n1,2\nNA,3\n");
  auto bad = CsvTable::read(p);
  try {
    cli::ingest_csv(bad, spec, false);
    FAIL("expected an ingest error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("row 3") != std::string::npos);
    REQUIRE(msg.find("'a'") != std::string::npos);
  }

  // inconsistent row lengths
  write_text(p, "a,y\n1,2\n3\n");
  REQUIRE_THROWS_WITH(CsvTable::read(p), Catch::Matchers::ContainsSubstring("row 3"));

  // missing column
  write_text(p, "a,b\n1,2\n");
  auto nores = CsvTable::read(p);
  REQUIRE_THROWS_WITH(cli::ingest_csv(nores, spec, false),
                      Catch::Matchers::ContainsSubstring("missing column 'y'"));

  // survival invariant violations carry coordinates
  write_text(p, "a,start,stop,status\n1,2,2,1\n");
  auto badsurv = CsvTable::read(p);
  cli::ResponseFlags sspec;
  sspec.time_col = "stop";
  sspec.status_col = "status";
  sspec.start_col = "start";
  REQUIRE_THROWS_WITH(cli::ingest_csv(badsurv, sspec, false),
                      Catch::Matchers::ContainsSubstring("row 2"));
}

TEST_CASE("fit then predict at lambda.max yields the null-model predictions") {
  TempDir tmp;
  const std::string data = make_gaussian_csv(tmp);
  const std::string model = tmp.path("model.json");
  REQUIRE(run({"fit", "--data", data, "--response", "y", "--out", model}) == 0);

  const std::string pred = tmp.path("pred.csv");
  REQUIRE(run({"predict", "--model", model, "--data", data, "--s", "lambda.max", "--out",
               pred}) == 0);
  auto table = CsvTable::read(pred);
  const auto col = table.numeric_column(table.columns()[1]);
  for (double v : col) REQUIRE(v == Approx(col[0]));  // constant null prediction

  // the constant is the response mean
  auto dtab = CsvTable::read(data);
  auto y = dtab.numeric_column("y");
  double mean = 0.0;
  for (double v : y) mean += v / y.size();
  REQUIRE(col[0] == Approx(mean).margin(1e-8));
}

TEST_CASE("cv predict honors the lambda.1se default and explicit equivalents") {
  TempDir tmp;
  const std::string data = make_gaussian_csv(tmp);
  const std::string cvout = tmp.path("cv.json");
  REQUIRE(run({"cv", "--data", data, "--response", "y", "--nfolds", "5", "--seed", "9",
               "--out", cvout}) == 0);
  const json doc = json::parse(read_file(cvout));
  const double l1se = doc.at("cv").at("lambda_1se").get<double>();

  const std::string p1 = tmp.path("p1.csv"), p2 = tmp.path("p2.csv"),
                    p3 = tmp.path("p3.csv");
  REQUIRE(run({"predict", "--model", cvout, "--data", data, "--out", p1}) == 0);
  REQUIRE(run({"predict", "--model", cvout, "--data", data, "--s", "lambda.1se", "--out",
               p2}) == 0);
  REQUIRE(run({"predict", "--model", cvout, "--data", data, "--s", cli::fmt(l1se), "--out",
               p3}) == 0);
  auto c1 = CsvTable::read(p1), c2 = CsvTable::read(p2), c3 = CsvTable::read(p3);
  for (int i = 0; i < c1.n_rows(); ++i) {
    REQUIRE(c1.numeric_cell(i, 1) == c2.numeric_cell(i, 1));
    REQUIRE(c1.numeric_cell(i, 1) == c3.numeric_cell(i, 1));
  }

  // plot csv exists with the advertised columns
  auto plot = CsvTable::read(cvout + ".plot.csv");
  REQUIRE(plot.columns() ==
          std::vector<std::string>{"gamma", "log_lambda", "cvm", "cvm_lo", "cvm_hi",
                                   "nonzero"});
}

TEST_CASE("fit -> serialize -> predict equals in-memory predictions bit for bit") {
  TempDir tmp;
  const std::string data = make_gaussian_csv(tmp);
  const std::string model = tmp.path("model.json");
  REQUIRE(run({"fit", "--data", data, "--response", "y", "--relax", "--out", model}) == 0);

  // in-memory reference
  auto table = CsvTable::read(data);
  cli::ResponseFlags spec;
  spec.response = "y";
  auto ds = cli::ingest_csv(table, spec, false);
  PathOptions opts;  // CLI defaults
  auto rf = fit_relaxed(*ds.X, ds.y, *ds.weights, FamilySpec::gaussian(),
                        PenaltySpec::make(3), opts);

  auto loaded = load_model_json(json::parse(read_file(model)));
  REQUIRE(loaded.doc.fit.lambda == rf.base.lambda);
  for (int k : {0, 5, rf.base.n_lambda() - 1}) {
    auto a = predict_path(rf.base, *ds.X, {rf.base.lambda[k]}).front();
    auto b = predict_path(loaded.doc.fit, *ds.X, {rf.base.lambda[k]}).front();
    REQUIRE(a == b);
    auto ra = predict_relaxed(rf, *ds.X, {rf.base.lambda[k]}, 0.25).front();
    auto rb = predict_relaxed(*loaded.doc.relaxed, *ds.X, {rf.base.lambda[k]}, 0.25).front();
    REQUIRE(ra == rb);
  }
}

TEST_CASE("assess over a prediction file defaults to gaussian measures") {
  TempDir tmp;
  const std::string data = make_gaussian_csv(tmp);
  const std::string model = tmp.path("model.json");
  REQUIRE(run({"fit", "--data", data, "--response", "y", "--out", model}) == 0);
  const std::string pred = tmp.path("pred.csv");
  REQUIRE(run({"predict", "--model", model, "--data", data, "--s", "0.05", "--out", pred}) ==
          0);
  const std::string out = tmp.path("assess.json");
  REQUIRE(run({"assess", "--pred", pred, "--data", data, "--response", "y", "--out", out}) ==
          0);
  const json j = json::parse(read_file(out));
  REQUIRE(j.at("family") == "gaussian");
  REQUIRE(j.at("measures").contains("deviance"));
  REQUIRE(j.at("measures").contains("mse"));
  REQUIRE(j.at("measures").contains("mae"));
  REQUIRE_FALSE(j.at("measures").contains("auc"));
  // gaussian deviance and mse agree
  REQUIRE(j.at("measures").at("deviance").at(0).get<double>() ==
          Approx(j.at("measures").at("mse").at(0).get<double>()).margin(1e-12));
}

TEST_CASE("binomial assess writes roc and confusion artifacts") {
  TempDir tmp;
  std::mt19937 rng(702);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::ostringstream os;
  os << "a,b,y\n";
  for (int i = 0; i < 60; ++i) {
    const double a = N(rng), b = N(rng);
    const double pr = 1.0 / (1.0 + std::exp(-(1.5 * a - b)));
    os << a << ',' << b << ',' << (U(rng) < pr ? 1 : 0) << "\n";
  }
  const std::string data = tmp.path("bin.csv");
  write_text(data, os.str());
  const std::string cvout = tmp.path("cv.json");
  REQUIRE(run({"cv", "--data", data, "--response", "y", "--family", "binomial", "--nfolds",
               "5", "--measure", "auc", "--out", cvout}) == 0);
  const std::string out = tmp.path("assess.json");
  const std::string roc = tmp.path("roc.csv");
  const std::string conf = tmp.path("confusion.txt");
  REQUIRE(run({"assess", "--model", cvout, "--data", data, "--response", "y", "--roc-out",
               roc, "--confusion-out", conf, "--out", out}) == 0);
  const json j = json::parse(read_file(out));
  REQUIRE(j.at("measures").contains("auc"));
  REQUIRE(j.at("measures").contains("class"));
  auto roctab = CsvTable::read(roc);
  REQUIRE(roctab.columns() == std::vector<std::string>{"fpr", "tpr"});
  REQUIRE(roctab.numeric_cell(roctab.n_rows() - 1, 0) == 1.0);
  REQUIRE(roctab.numeric_cell(roctab.n_rows() - 1, 1) == 1.0);
  const std::string conftext = read_file(conf);
  REQUIRE(conftext.find("Predicted") != std::string::npos);
  REQUIRE(conftext.find("Percent Correct:") != std::string::npos);
}

TEST_CASE("survcurve emits per-row step functions with strata labels") {
  TempDir tmp;
  const std::string data = make_survival_csv(tmp);
  const std::string model = tmp.path("cox.json");
  REQUIRE(run({"fit", "--data", data, "--time", "time", "--status", "status", "--strata",
               "grp", "--out", model}) == 0);
  const std::string out = tmp.path("curves.csv");
  REQUIRE(run({"survcurve", "--model", model, "--data", data, "--time", "time", "--status",
               "status", "--strata", "grp", "--s", "0.1", "--out", out}) == 0);
  auto tab = CsvTable::read(out);
  REQUIRE(tab.columns() == std::vector<std::string>{"time", "survival", "stratum", "row"});
  // survival values lie in (0, 1] and strata labels are the original strings
  bool saw_m = false, saw_f = false;
  for (int i = 0; i < tab.n_rows(); ++i) {
    const double s = tab.numeric_cell(i, 1);
    REQUIRE(s > 0.0);
    REQUIRE(s <= 1.0);
    if (tab.cell(i, 2) == "m") saw_m = true;
    if (tab.cell(i, 2) == "f") saw_f = true;
  }
  REQUIRE(saw_m);
  REQUIRE(saw_f);
}

TEST_CASE("cox assess reports deviance and concordance") {
  TempDir tmp;
  const std::string data = make_survival_csv(tmp);
  const std::string model = tmp.path("cox.json");
  REQUIRE(run({"fit", "--data", data, "--time", "time", "--status", "status", "--strata",
               "grp", "--out", model}) == 0);
  const std::string out = tmp.path("assess.json");
  REQUIRE(run({"assess", "--model", model, "--data", data, "--time", "time", "--status",
               "status", "--strata", "grp", "--s", "0.1", "--out", out}) == 0);
  const json j = json::parse(read_file(out));
  REQUIRE(j.at("measures").contains("deviance"));
  REQUIRE(j.at("measures").contains("C"));
  const double c = j.at("measures").at("C").at(0).get<double>();
  REQUIRE(c >= 0.0);
  REQUIRE(c <= 1.0);
}

TEST_CASE("identical seeds give byte-identical cv outputs") {
  TempDir tmp;
  const std::string data = make_gaussian_csv(tmp);
  const std::string o1 = tmp.path("cv1.json"), o2 = tmp.path("cv2.json");
  REQUIRE(run({"cv", "--data", data, "--response", "y", "--seed", "5", "--nfolds", "4",
               "--threads", "1", "--out", o1}) == 0);
  REQUIRE(run({"cv", "--data", data, "--response", "y", "--seed", "5", "--nfolds", "4",
               "--threads", "3", "--out", o2}) == 0);
  REQUIRE(read_file(o1) == read_file(o2));
}

TEST_CASE("errors exit nonzero with machine-readable json on stderr") {
  TempDir tmp;
  const std::string data = make_gaussian_csv(tmp);
  const std::string err = tmp.path("err.txt");
  const std::string cmd = std::string(ENETPATH_CLI_BINARY) + " fit --data " + data +
                          " --response nosuch --out " + tmp.path("x.json") + " 2>" + err;
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != 0);
  const json j = json::parse(read_file(err));
  REQUIRE(j.contains("error"));
  REQUIRE(j.at("error").at("message").get<std::string>().find("nosuch") !=
          std::string::npos);
  // the failed command must not leave an output file behind
  REQUIRE_FALSE(fs::exists(tmp.path("x.json")));
}

TEST_CASE("sparse and dense ingestion produce identical models") {
  TempDir tmp;
  std::mt19937 rng(703);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::ostringstream os;
  os << "a,b,c,d,y\n";
  for (int i = 0; i < 30; ++i) {
    double v[4];
    for (double& x : v) x = U(rng) < 0.5 ? 0.0 : N(rng);
    os << v[0] << ',' << v[1] << ',' << v[2] << ',' << v[3] << ','
       << (v[0] - v[1] + 0.2 * N(rng)) << "\n";
  }
  const std::string data = tmp.path("sp.csv");
  write_text(data, os.str());
  const std::string m1 = tmp.path("dense.json"), m2 = tmp.path("sparse.json");
  REQUIRE(run({"fit", "--data", data, "--response", "y", "--out", m1}) == 0);
  REQUIRE(run({"fit", "--data", data, "--response", "y", "--sparse", "--out", m2}) == 0);
  const json a = json::parse(read_file(m1));
  const json b = json::parse(read_file(m2));
  REQUIRE(a.at("coefficients") == b.at("coefficients"));
  REQUIRE(a.at("lambda") == b.at("lambda"));
  REQUIRE(a.at("intercepts") == b.at("intercepts"));
}
