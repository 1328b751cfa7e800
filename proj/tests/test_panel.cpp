#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "crossalpha/errors.hpp"
#include "crossalpha/panel.hpp"
#include "crossalpha/synth.hpp"
#include "oracles.hpp"

using namespace crossalpha;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& body) {
  const std::string path = "/tmp/crossalpha_" + name;
  std::ofstream out(path);
  out << body;
  return path;
}

constexpr const char* kHeader =
    "date,security_id,open,high,low,close,volume,market_cap,industry\n";

}  // namespace

TEST_CASE("load_panel accepts a minimal well-formed file") {
  const auto path = write_temp_csv("min.csv",
      std::string(kHeader) +
      "2020-01-01,X,10,10,10,10,100,1000,0\n"
      "2020-01-02,X,11,11,11,11,100,1100,0\n"
      "2020-01-03,X,12,12,12,12,100,1200,0\n");
  const PricePanel p = load_panel(path, {.min_history = 1});
  CHECK(p.rows() == 3);
  CHECK(p.cols() == 1);
  CHECK(p.mask.all());
  CHECK(p.close(0, 0) == 10.0);
  CHECK(p.close(2, 0) == 12.0);
}

TEST_CASE("non-positive close masks the row") {
  const auto path = write_temp_csv("badclose.csv",
      std::string(kHeader) +
      "2020-01-01,X,10,10,10,10,100,1000,0\n"
      "2020-01-02,X,11,11,11,-5,100,1100,0\n"
      "2020-01-03,X,12,12,12,12,100,1200,0\n");
  const PricePanel p = load_panel(path, {.min_history = 1});
  CHECK(p.mask(0, 0));
  CHECK_FALSE(p.mask(1, 0));
  CHECK(p.mask(2, 0));
}

TEST_CASE("missing fields mask the row instead of failing") {
  const auto path = write_temp_csv("missing.csv",
      std::string(kHeader) +
      "2020-01-01,X,10,10,10,10,100,1000,0\n"
      "2020-01-02,X,11,11,11,,100,1100,0\n"
      "2020-01-03,X,12,12,12,12,100,1200,0\n");
  const PricePanel p = load_panel(path, {.min_history = 1});
  CHECK_FALSE(p.mask(1, 0));
}

TEST_CASE("malformed rows raise ParseError naming the line") {
  const auto path = write_temp_csv("short.csv",
      std::string(kHeader) + "2020-01-01,X,10,10\n");
  CHECK_THROWS_AS(load_panel(path, {.min_history = 1}), ParseError);
  const auto path2 = write_temp_csv("notnum.csv",
      std::string(kHeader) + "2020-01-01,X,10,10,10,oops,100,1000,0\n");
  try {
    load_panel(path2, {.min_history = 1});
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("empty universe raises after the history filter") {
  const auto path = write_temp_csv("thin.csv",
      std::string(kHeader) + "2020-01-01,X,10,10,10,10,100,1000,0\n");
  CHECK_THROWS_AS(load_panel(path, {.min_history = 250}), DomainError);
}

TEST_CASE("mini panel fixture loads with hand-counted shape") {
  const PricePanel p =
      load_panel(std::string(FIXTURES_DIR) + "/mini_panel.csv",
                 {.min_history = 1});
  CHECK(p.rows() == 20);
  CHECK(p.cols() == 5);
  REQUIRE(p.industry.size() == 5);
  CHECK(p.industry[0] == 0);  // A
  CHECK(p.industry[1] == 0);  // B
  CHECK(p.industry[2] == 1);  // C
  CHECK(p.industry[3] == 1);  // D
  CHECK(p.industry[4] == 2);  // E
  CHECK(p.industries() == 3);
  CHECK(p.mask.all());
}

TEST_CASE("write_panel round-trips numerical content bit-exactly") {
  const PricePanel p =
      load_panel(std::string(FIXTURES_DIR) + "/mini_panel.csv",
                 {.min_history = 1});
  const std::string out = "/tmp/crossalpha_roundtrip.csv";
  write_panel(p, out);
  const PricePanel q = load_panel(out, {.min_history = 1});
  REQUIRE(q.rows() == p.rows());
  REQUIRE(q.cols() == p.cols());
  for (int t = 0; t < p.rows(); ++t) {
    for (int i = 0; i < p.cols(); ++i) {
      REQUIRE(q.mask(t, i) == p.mask(t, i));
      if (p.mask(t, i)) {
        REQUIRE(q.close(t, i) == p.close(t, i));
        REQUIRE(q.volume(t, i) == p.volume(t, i));
        REQUIRE(q.market_cap(t, i) == p.market_cap(t, i));
      }
    }
  }
}

TEST_CASE("forward returns") {
  PricePanel p;
  p.dates = {"2020-01-01", "2020-01-02", "2020-01-03"};
  p.securities = {"X"};
  p.close = Matrix(3, 1);
  p.close << 100, 120, 90;
  p.open = p.high = p.low = p.close;
  p.volume = Matrix::Ones(3, 1);
  p.market_cap = Matrix::Ones(3, 1);
  p.industry = Eigen::VectorXi::Zero(1);
  p.mask = Mask::Constant(3, 1, true);

  SUBCASE("one-day horizon") {
    const ReturnPanel r = forward_returns(p, 1);
    CHECK(r.returns(0, 0) == doctest::Approx(0.20).epsilon(1e-12));
    CHECK(r.mask(0, 0));
    CHECK_FALSE(r.mask(2, 0));  // last row missing
  }
  SUBCASE("two-day horizon") {
    const ReturnPanel r = forward_returns(p, 2);
    CHECK(r.returns(0, 0) == doctest::Approx(-0.10).epsilon(1e-12));
    CHECK_FALSE(r.mask(1, 0));
    CHECK_FALSE(r.mask(2, 0));
  }
  SUBCASE("constant closes give zero returns") {
    p.close.setConstant(50.0);
    const ReturnPanel r = forward_returns(p, 1);
    CHECK(r.returns(0, 0) == 0.0);
    CHECK(r.returns(1, 0) == 0.0);
  }
  SUBCASE("invalid horizon") {
    CHECK_THROWS_AS(forward_returns(p, 3), ConfigError);
    CHECK_THROWS_AS(forward_returns(p, 0), ConfigError);
  }
}

TEST_CASE("universe mask filters extreme daily moves") {
  PricePanel p;
  p.dates = {"2020-01-01", "2020-01-02"};
  p.securities = {"X", "Y", "Z"};
  p.close = Matrix(2, 3);
  p.close << 100, 100, 100, 130, 110, 100;
  p.open = p.high = p.low = p.close;
  p.volume = Matrix::Ones(2, 3);
  p.market_cap = Matrix::Ones(2, 3);
  p.industry = Eigen::VectorXi::Zero(3);
  p.mask = Mask::Constant(2, 3, true);
  p.mask.col(2).setConstant(false);  // all-missing security

  const Mask m = universe_mask(p, 0.20);
  CHECK(m(0, 0));
  CHECK_FALSE(m(1, 0));  // +30% move
  CHECK(m(0, 1));
  CHECK(m(1, 1));  // +10% kept
  CHECK_FALSE(m(0, 2));
  CHECK_FALSE(m(1, 2));
}

TEST_CASE("forward return composes daily returns") {
  SynthMarketConfig cfg;
  cfg.n_securities = 6;
  cfg.n_days = 120;
  cfg.signal.horizon = 5;
  auto [panel, factor] = generate_market(cfg, 11);
  const int h = 7;
  const ReturnPanel fwd = forward_returns(panel, h);
  const ReturnPanel daily = daily_returns(panel);
  for (int t = 0; t + h < panel.rows(); ++t) {
    for (int i = 0; i < panel.cols(); ++i) {
      double acc = 1.0;
      bool all_valid = true;
      for (int s = t + 1; s <= t + h; ++s) {
        if (!daily.mask(s, i)) { all_valid = false; break; }
        acc *= 1.0 + daily.returns(s, i);
      }
      if (all_valid && fwd.mask(t, i)) {
        REQUIRE(fwd.returns(t, i) == doctest::Approx(acc - 1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("dropping a masked security leaves other columns untouched") {
  // Same data with and without a short-history security.
  std::string with_c = kHeader;
  std::string without_c = kHeader;
  for (int t = 0; t < 10; ++t) {
    char date[16];
    std::snprintf(date, sizeof(date), "2020-01-%02d", t + 1);
    const std::string a = std::string(date) + ",A,1,1,1," +
                          std::to_string(10.0 + t) + ",5,100,0\n";
    const std::string b = std::string(date) + ",B,1,1,1," +
                          std::to_string(20.0 + t) + ",5,100,1\n";
    with_c += a + b;
    without_c += a + b;
    if (t < 3) {
      with_c += std::string(date) + ",C,1,1,1,30,5,100,0\n";
    }
  }
  const PricePanel full =
      load_panel(write_temp_csv("withc.csv", with_c), {.min_history = 5});
  const PricePanel clean =
      load_panel(write_temp_csv("noc.csv", without_c), {.min_history = 5});
  REQUIRE(full.cols() == 2);  // C dropped
  REQUIRE(clean.cols() == 2);
  CHECK(full.close == clean.close);
  const ReturnPanel r1 = forward_returns(full, 2);
  const ReturnPanel r2 = forward_returns(clean, 2);
  CHECK(r1.returns == r2.returns);
}
