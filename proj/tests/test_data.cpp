#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "evarport/data_io.hpp"
#include "evarport/json_io.hpp"

using namespace evarport;

namespace {

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& name, const std::string& content) {
        path = std::filesystem::temp_directory_path() / name;
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::error_code ec; std::filesystem::remove(path, ec); }
    std::string str() const { return path.string(); }
};

std::string weekly_date(int week) {
    // Mondays from 2010-09-20 onward, ISO-8601.
    int day = 20 + 7 * week;
    int month = 9, year = 2010;
    static const int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    while (true) {
        int len = lengths[month - 1];
        if (month == 2 && year % 4 == 0) len = 29;
        if (day <= len) break;
        day -= len;
        if (++month > 12) {
            month = 1;
            ++year;
        }
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

} // namespace

TEST_SUITE("data") {

TEST_CASE("well-formed three-asset file loads and aligns") {
    TempFile file("evarport_prices.csv",
                  "date,apple,intel,pfe\n"
                  "2020-01-08,300.1,58.2,39.1\n"
                  "2020-01-01,296.2,59.0,39.4\n" // out of order on purpose
                  "2020-01-15,310.5,57.9,38.8\n");
    PriceSeries series = load_prices(file.str());
    REQUIRE(series.asset_names.size() == 3);
    CHECK(series.asset_names[0] == "apple");
    CHECK(series.dates.front() == "2020-01-01");
    CHECK(series.dates.back() == "2020-01-15");
    CHECK(series.closes(0, 0) == doctest::Approx(296.2));
    CHECK(series.dropped_rows == 0);
}

TEST_CASE("rows with missing cells are dropped with a count") {
    TempFile file("evarport_missing.csv",
                  "date,a,b\n"
                  "2020-01-01,1.0,2.0\n"
                  "2020-01-08,1.1,\n"
                  "2020-01-15,1.2,2.2\n");
    PriceSeries series = load_prices(file.str());
    CHECK(series.dropped_rows == 1);
    CHECK(series.dates.size() == 2);
}

TEST_CASE("a 154-week panel produces 153 return rows") {
    std::string csv = "date,a,b,c\n";
    double p = 100.0;
    for (int w = 0; w < 154; ++w) {
        p *= 1.001;
        csv += weekly_date(w) + "," + std::to_string(p) + "," + std::to_string(p * 0.5) + "," +
               std::to_string(p * 2.0) + "\n";
    }
    TempFile file("evarport_weekly.csv", csv);
    PriceSeries series = load_prices(file.str());
    CHECK(series.dates.size() == 154);
    ReturnSample returns = to_log_returns(series);
    CHECK(returns.returns.rows() == 153);
    CHECK(returns.returns.cols() == 3);
}

TEST_CASE("log-return construction") {
    PriceSeries constant;
    constant.asset_names = {"a"};
    constant.dates = {"2020-01-01", "2020-01-08", "2020-01-15"};
    constant.closes = Matrix::Constant(3, 1, 42.0);
    ReturnSample flat = to_log_returns(constant);
    CHECK(flat.returns.cwiseAbs().maxCoeff() == 0.0);

    PriceSeries doubling;
    doubling.asset_names = {"a"};
    doubling.dates = {"d1", "d2", "d3"};
    doubling.closes = Matrix{{1.0}, {2.0}, {4.0}};
    ReturnSample doubled = to_log_returns(doubling);
    CHECK(doubled.returns(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(doubled.returns(1, 0) == doctest::Approx(0.693147).epsilon(1e-6));
}

TEST_CASE("prices reconstruct from cumulative returns") {
    TempFile file("evarport_roundtrip.csv",
                  "date,x,y\n"
                  "2021-01-01,10.0,250.0\n"
                  "2021-01-08,10.7,243.2\n"
                  "2021-01-15,11.1,260.9\n"
                  "2021-01-22,10.2,255.5\n");
    PriceSeries series = load_prices(file.str());
    ReturnSample returns = to_log_returns(series);
    for (Eigen::Index c = 0; c < 2; ++c) {
        double level = series.closes(0, c);
        for (Eigen::Index r = 0; r < returns.returns.rows(); ++r) {
            level *= std::exp(returns.returns(r, c));
            CHECK(level == doctest::Approx(series.closes(r + 1, c)).epsilon(1e-12));
        }
    }
}

TEST_CASE("parser errors carry location and code") {
    TempFile bad_number("evarport_badnum.csv",
                        "date,a\n2020-01-01,1.0\n2020-01-08,oops\n");
    CHECK_THROWS_WITH_AS(load_prices(bad_number.str()), doctest::Contains("line 3"), Error);

    TempFile bad_fields("evarport_badfields.csv", "date,a,b\n2020-01-01,1.0\n");
    CHECK_THROWS_WITH_AS(load_prices(bad_fields.str()), doctest::Contains("PARSE_ERROR"), Error);

    TempFile bad_header("evarport_badheader.csv", "time,a\n2020-01-01,1.0\n");
    CHECK_THROWS_AS(load_prices(bad_header.str()), Error);

    TempFile negative("evarport_negative.csv", "date,a\n2020-01-01,-3.0\n");
    CHECK_THROWS_WITH_AS(load_prices(negative.str()), doctest::Contains("NON_POSITIVE_PRICE"),
                         Error);

    CHECK_THROWS_AS(load_prices("/nonexistent/evarport.csv"), Error);
}

TEST_CASE("merging files with disjoint dates is an error") {
    TempFile left("evarport_left.csv", "date,a\n2020-01-01,1.0\n2020-01-08,1.1\n");
    TempFile right("evarport_right.csv", "date,b\n2021-01-01,2.0\n2021-01-08,2.1\n");
    CHECK_THROWS_WITH_AS(load_prices({left.str(), right.str()}),
                         doctest::Contains("EMPTY_INTERSECTION"), Error);

    TempFile overlap("evarport_overlap.csv", "date,b\n2020-01-08,2.0\n2020-01-15,2.1\n");
    PriceSeries merged = load_prices({left.str(), overlap.str()});
    CHECK(merged.asset_names.size() == 2);
    CHECK(merged.dates.size() == 1);
    CHECK(merged.dates[0] == "2020-01-08");
}

TEST_CASE("too few rows for returns") {
    PriceSeries one;
    one.asset_names = {"a"};
    one.dates = {"2020-01-01"};
    one.closes = Matrix::Constant(1, 1, 5.0);
    CHECK_THROWS_WITH_AS(to_log_returns(one), doctest::Contains("TOO_FEW_ROWS"), Error);
}

TEST_CASE("ingestion is order independent") {
    TempFile forward("evarport_fwd.csv",
                     "date,a\n2020-01-01,1.0\n2020-01-08,1.5\n2020-01-15,2.0\n");
    TempFile reversed("evarport_rev.csv",
                      "date,a\n2020-01-15,2.0\n2020-01-08,1.5\n2020-01-01,1.0\n");
    PriceSeries f = load_prices(forward.str());
    PriceSeries r = load_prices(reversed.str());
    CHECK(f.dates == r.dates);
    CHECK((f.closes - r.closes).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("returns CSV export layout") {
    ReturnSample sample;
    sample.asset_names = {"apple", "intel"};
    sample.returns = Matrix{{0.01, -0.02}, {0.005, 0.0}};
    std::string csv = returns_to_csv(sample, {"2020-01-08", "2020-01-15"});
    CHECK(csv == "date,r_apple,r_intel\n2020-01-08,0.01,-0.02\n2020-01-15,0.005,0\n");
    std::string indexed = returns_to_csv(sample);
    CHECK(indexed.substr(0, 30) == "date,r_apple,r_intel\n1,0.01,-0");
}

TEST_CASE("parameter JSON round-trips with the exact field names") {
    Model1Params p;
    p.n = 2;
    p.mu_tilde = Vector{{0.002, -0.001}};
    p.sigma = 0.02;
    p.lambda = Vector{{0.5, 0.7}};
    p.theta = Vector{{0.01, -0.02}};
    p.sigma_jump = Vector{{0.03, 0.04}};
    p.gamma = 0.4;
    p.mu = Vector{{-0.01, 0.02}};
    p.A = Matrix{{3e-4, 1e-4}, {1e-4, 2e-4}};
    std::string text = model1_to_json(p);
    for (const char* field : {"\"mu_tilde\"", "\"sigma\"", "\"lambda\"", "\"theta\"",
                              "\"sigma_jump\"", "\"gamma\"", "\"mu\"", "\"A\""})
        CHECK(text.find(field) != std::string::npos);
    Model1Params back = model1_from_json(text);
    CHECK((back.mu_tilde - p.mu_tilde).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((back.A - p.A).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(back.sigma == p.sigma);

    Model2Params q;
    q.n = 2;
    q.mu_tilde = Vector{{0.001, 0.002}};
    q.Q = Matrix{{4e-4, 1e-4}, {1e-4, 3e-4}};
    q.lambda = 0.9;
    q.mu = Vector{{0.005, -0.005}};
    q.A = Matrix{{1e-4, 2e-5}, {2e-5, 8e-5}};
    FittedParams as_variant = params_from_json(model2_to_json(q));
    CHECK(std::holds_alternative<Model2Params>(as_variant));
    CHECK((std::get<Model2Params>(as_variant).Q - q.Q).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("parameter JSON validation failures") {
    CHECK_THROWS_WITH_AS(model1_from_json("{not json"), doctest::Contains("PARSE_ERROR"), Error);
    CHECK_THROWS_WITH_AS(model1_from_json("{\"mu_tilde\": [0.1]}"),
                         doctest::Contains("missing field"), Error);
    // invariant violation: negative intensity
    std::string bad = R"({"model":2,"mu_tilde":[0.0],"Q":[[1e-4]],"lambda":-1.0,)"
                      R"("mu":[0.0],"A":[[1e-4]]})";
    CHECK_THROWS_WITH_AS(params_from_json(bad), doctest::Contains("INVALID_ARGUMENT"), Error);
}

} // TEST_SUITE
