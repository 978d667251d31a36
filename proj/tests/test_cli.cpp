#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "helpers.hpp"

using testing::slurp;
using testing::TempDir;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "eblr");
  std::ostringstream out, err;
  const int code = eblr::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string f;
  while (std::getline(in, f, ',')) out.push_back(f);
  return out;
}

// Synthetic data plus a trained OLS model in a scratch directory.
struct Workspace {
  TempDir dir{"cli"};
  std::string data = (dir / "synth.csv").string();
  std::string model = (dir / "model.json").string();

  Workspace() {
    REQUIRE(run({"synth", "-o", data}).code == 0);
    REQUIRE(run({"train", "-i", data, "--f-max", "5", "--base", "ols", "-o", model}).code == 0);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("synth") {
  TempDir dir("synth");
  const auto a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
  const Result r = run({"synth", "--length", "2048", "--seed", "7", "-o", a});
  CHECK(r.code == 0);
  CHECK(r.out.find("2048 rows") != std::string::npos);
  CHECK(lines(slurp(a)).size() == 2049);
  CHECK(run({"synth", "--seed", "7", "-o", b}).code == 0);
  CHECK(slurp(a) == slurp(b));

  SUBCASE("validation happens before any file is touched") {
    const auto c = (dir / "c.csv").string();
    const Result bad = run({"synth", "--noise-std", "-1", "-o", c});
    CHECK(bad.code == 1);
    CHECK_FALSE(std::filesystem::exists(c));
    CHECK(bad.err.find("error:") == 0);
    CHECK(lines(bad.err).size() == 1);
  }
  SUBCASE("existing outputs need --force") {
    const std::string before = slurp(a);
    const Result refused = run({"synth", "--seed", "8", "-o", a});
    CHECK(refused.code == 1);
    CHECK(refused.err.find("--force") != std::string::npos);
    CHECK(slurp(a) == before);
    CHECK(run({"synth", "--seed", "8", "-o", a, "--force"}).code == 0);
    CHECK(slurp(a) != before);
  }
}

TEST_CASE("train") {
  Workspace ws;
  const auto doc = nlohmann::json::parse(slurp(ws.model));
  CHECK(doc["rules"].size() <= 5);
  CHECK(doc["rules"][0]["rule"] == "isPromotion=1 & isWeekend=1");
  const auto curve = lines(slurp(ws.path("model.curve.csv")));
  CHECK(curve[0] == "iteration,train_nrmse,rule");
  CHECK(curve.size() == doc["iteration_log"].size() + 1);

  SUBCASE("deterministic") {
    const auto again = ws.path("again.json");
    CHECK(run({"train", "-i", ws.data, "--f-max", "5", "--base", "ols", "-o", again}).code == 0);
    CHECK(slurp(again) == slurp(ws.model));
  }
  SUBCASE("input files are not modified") {
    const std::string before = slurp(ws.data);
    CHECK(run({"train", "-i", ws.data, "-o", ws.path("m2.json")}).code == 0);
    CHECK(slurp(ws.data) == before);
  }
  SUBCASE("validation errors exit 1") {
    CHECK(run({"train", "-i", ws.data, "--f-max", "0", "-o", ws.path("x.json")}).code == 1);
    CHECK(run({"train", "-i", ws.data, "--base", "ridge", "-o", ws.path("x.json")}).code == 1);
    CHECK(run({"train", "-i", ws.data, "--eta", "-1", "-o", ws.path("x.json")}).code == 1);
    CHECK(run({"train", "-i", ws.data, "--f-max", "two", "-o", ws.path("x.json")}).code == 1);
    CHECK_FALSE(std::filesystem::exists(ws.path("x.json")));
  }
  SUBCASE("data errors exit 2") {
    const Result missing = run({"train", "-i", ws.path("nope.csv"), "-o", ws.path("x.json")});
    CHECK(missing.code == 2);
    const Result cal = run({"train", "-i", ws.data, "--time-col", "isWeekend", "--calendar", "-o", ws.path("x.json")});
    CHECK(cal.code == 2);
  }
  SUBCASE("schema flags") {
    std::ofstream(ws.path("renamed.csv")) << "day,sales,w\n2020-01-01,1,0\n2020-01-02,5,1\n2020-01-03,1,0\n"
                                             "2020-01-04,5,1\n2020-01-05,1,0\n2020-01-06,5,1\n";
    const Result r = run({"train", "-i", ws.path("renamed.csv"), "--time-col", "day", "--target-col", "sales",
                          "--covariates", "w:binary", "--base", "ols", "-o", ws.path("r.json")});
    CHECK(r.code == 0);
  }
}

TEST_CASE("forecast") {
  Workspace ws;
  std::ofstream(ws.path("future.csv")) << "timestamp,isWeekend,isPromotion\n"
                                          "2021-02-12,0,0\n2021-02-13,1,1\n2021-02-14,1,0\n";
  const Result r = run({"forecast", "-m", ws.model, "-i", ws.path("future.csv"), "-o", ws.path("f.csv")});
  REQUIRE(r.code == 0);
  const auto out = lines(slurp(ws.path("f.csv")));
  REQUIRE(out.size() == 4);
  CHECK(out[0] == "series_id,timestamp,point,q05,q25,q50,q75,q95");
  for (std::size_t i = 1; i < out.size(); ++i) {
    const auto f = fields(out[i]);
    REQUIRE(f.size() == 8);
    for (std::size_t k = 4; k < 8; ++k) CHECK(std::stod(f[k]) >= std::stod(f[k - 1]));
  }
  CHECK(fields(out[2])[1] == "2021-02-13");
  CHECK(std::stod(fields(out[2])[2]) > std::stod(fields(out[1])[2]));

  SUBCASE("single quantile") {
    CHECK(run({"forecast", "-m", ws.model, "-i", ws.path("future.csv"), "-o", ws.path("g.csv"), "--quantiles",
               "0.5"})
              .code == 0);
    CHECK(lines(slurp(ws.path("g.csv")))[0] == "series_id,timestamp,point,q50");
  }
  SUBCASE("empty future file") {
    std::ofstream(ws.path("empty.csv")) << "timestamp,isWeekend,isPromotion\n";
    CHECK(run({"forecast", "-m", ws.model, "-i", ws.path("empty.csv"), "-o", ws.path("e.csv")}).code == 0);
    CHECK(slurp(ws.path("e.csv")) == "series_id,timestamp,point,q05,q25,q50,q75,q95\n");
  }
  SUBCASE("covariate mismatch names the column") {
    std::ofstream(ws.path("partial.csv")) << "timestamp,isWeekend\n2021-02-08,0\n";
    const Result bad = run({"forecast", "-m", ws.model, "-i", ws.path("partial.csv"), "-o", ws.path("p.csv")});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("isPromotion") != std::string::npos);
  }
  SUBCASE("bad quantiles") {
    CHECK(run({"forecast", "-m", ws.model, "-i", ws.path("future.csv"), "-o", ws.path("q.csv"), "--quantiles",
               "0.5,1.5"})
              .code == 1);
  }
  SUBCASE("model path from the environment") {
    ::setenv("EBLR_MODEL", ws.model.c_str(), 1);
    const Result env = run({"forecast", "-i", ws.path("future.csv"), "-o", ws.path("env.csv")});
    ::unsetenv("EBLR_MODEL");
    CHECK(env.code == 0);
    CHECK(slurp(ws.path("env.csv")) == slurp(ws.path("f.csv")));
  }
}

TEST_CASE("evaluate") {
  Workspace ws;
  const Result r = run({"evaluate", "-i", ws.data, "--base", "ols", "--n-windows", "1", "--horizon", "14", "-o",
                        ws.path("rep.json"), "--threads", "2"});
  REQUIRE(r.code == 0);
  const auto rows = lines(slurp(ws.path("rep.csv")));
  CHECK(rows[0] == "window,horizon,metric,value");
  const auto doc = nlohmann::json::parse(slurp(ws.path("rep.json")));
  CHECK(doc["windows"].size() == 1);
  CHECK(doc["aggregate"]["nrmse"] == doc["windows"][0]["nrmse"]);

  SUBCASE("insufficient data") {
    const Result bad = run({"evaluate", "-i", ws.data, "--n-windows", "200", "-o", ws.path("big.json")});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("at least 2801") != std::string::npos);
  }
  SUBCASE("unknown model") {
    CHECK(run({"evaluate", "-i", ws.data, "--model", "arima", "-o", ws.path("a.json")}).code == 1);
  }
}

TEST_CASE("explain") {
  Workspace ws;
  const Result r = run({"explain", "-m", ws.model, "-o", ws.path("imp.csv")});
  REQUIRE(r.code == 0);
  CHECK(slurp(ws.path("imp.csv")) == "name,score\nisPromotion,0.5\nisWeekend,0.5\n");
  CHECK(r.out.find("isPromotion=1 & isWeekend=1") != std::string::npos);
  const auto rules = nlohmann::json::parse(slurp(ws.path("imp.rules.json")));
  CHECK(rules["rules"][0]["effect"] == "positive");

  SUBCASE("top-k") {
    CHECK(run({"explain", "-m", ws.model, "-o", ws.path("top.csv"), "--top", "1"}).code == 0);
    CHECK(lines(slurp(ws.path("top.csv"))).size() == 2);
  }
  SUBCASE("zero-rule model") {
    CHECK(run({"train", "-i", ws.data, "--f-max", "1", "--min-improvement", "0.99", "-o", ws.path("flat.json")})
              .code == 0);
    const Result z = run({"explain", "-m", ws.path("flat.json"), "-o", ws.path("z.csv")});
    CHECK(z.code == 0);
    CHECK(z.err.find("warning") != std::string::npos);
    CHECK(slurp(ws.path("z.csv")) == "name,score\n");
  }
  SUBCASE("unreadable model") {
    CHECK(run({"explain", "-m", ws.path("none.json"), "-o", ws.path("n.csv")}).code == 2);
  }
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"--help"}).code == 0);
}
