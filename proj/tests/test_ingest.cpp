#include "support.hpp"

#include "slmort/benchmark_models.hpp"
#include "slmort/ingest.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

using namespace slmort;

namespace {

const std::string header = "France, Death rates (period 1x1)\n\n  Year  Age  Female  Male  Total\n";

MortalitySurface parse(const std::string &text, HmdColumn column, AgeRange ages, YearRange years) {
    std::istringstream in(text);
    return parse_hmd(in, column, Quantity::central_rate, ages, years);
}

std::string data_error(const std::string &text, AgeRange ages, YearRange years) {
    try {
        (void)parse(text, HmdColumn::total, ages, years);
    } catch (const DataError &e) {
        return e.what();
    }
    return "no error";
}

bool contains(const std::string &haystack, const std::string &needle) {
    return haystack.find(needle) != std::string::npos;
}

} // namespace

TEST_SUITE("ingest") {

TEST_CASE("parse_hmd picks the requested column") {
    const std::string text = header + "  1960   60  0.010  0.020  0.015\n  1961   60  0.011  0.021  0.016\n";
    const auto male = parse(text, HmdColumn::male, AgeRange(60, 60), YearRange(1960, 1961));
    CHECK(male.values()(0, 0) == 0.02);
    CHECK(male.values()(0, 1) == 0.021);
    const auto female = parse(text, HmdColumn::female, AgeRange(60, 60), YearRange(1961, 1961));
    CHECK(female.values()(0, 0) == 0.011);
    CHECK(parse_hmd_column("M") == HmdColumn::male);
    CHECK(parse_hmd_column("Total") == HmdColumn::total);
    CHECK_THROWS_AS((void)parse_hmd_column("both"), std::invalid_argument);
}

TEST_CASE("parse_hmd reports malformed tables") {
    const AgeRange ages(60, 61);
    const YearRange years(1960, 1960);

    SUBCASE("missing value inside the window names the line") {
        const auto msg = data_error(header + "1960 60 0.01 0.02 0.015\n1960 61 0.01 0.02 .\n", ages, years);
        CHECK(contains(msg, "line 5"));
        CHECK(contains(msg, "age 61"));
    }
    SUBCASE("missing value outside the window is ignored") {
        const auto s = parse(header + "1960 60 1 2 3\n1960 61 1 2 3\n1960 62 . . .\n1959 60 . . .\n",
                             HmdColumn::total, ages, years);
        CHECK(s.values() == Eigen::Vector2d(3, 3));
    }
    SUBCASE("bad header") {
        CHECK(contains(data_error("title\n\nYear Age Female Male\n", ages, years), "line 3"));
        CHECK(contains(data_error("Year Age Female Male Total\n1960 60 1 2 3\n", ages, years), "line 1"));
        CHECK(contains(data_error("title\nYear Age Female Male Total\n", ages, years), "line 2"));
        CHECK_THROWS_AS((void)parse("", HmdColumn::total, ages, years), DataError);
        CHECK_THROWS_AS((void)parse("title\n\n", HmdColumn::total, ages, years), DataError);
    }
    SUBCASE("wrong field count") {
        CHECK(contains(data_error(header + "1960 60 1 2\n", ages, years), "line 4: expected 5 fields"));
    }
    SUBCASE("unparseable value") {
        CHECK(contains(data_error(header + "1960 60 1 2 x3\n", ages, years), "line 4: unparseable"));
        CHECK(contains(data_error(header + "1960 60 1 2 3.0abc\n", ages, years), "line 4"));
        CHECK(contains(data_error(header + "19x0 60 1 2 3\n", ages, years), "invalid year"));
        CHECK(contains(data_error(header + "1960 -1 1 2 3\n", ages, years), "invalid age"));
    }
    SUBCASE("incomplete coverage") {
        CHECK(contains(data_error(header + "1960 60 1 2 3\n", ages, years), "age 61, year 1960"));
    }
    SUBCASE("duplicate rows") {
        CHECK(contains(data_error(header + "1960 60 1 2 3\n1960 60 1 2 3\n1960 61 1 2 3\n", ages, years),
                       "line 5: duplicate"));
    }
    SUBCASE("open age group") {
        const std::string text = header + "1960 109 1 2 3\n1960 110+ 4 5 6\n";
        CHECK(parse(text, HmdColumn::total, AgeRange(109, 109), years).values()(0, 0) == 3.0);
        CHECK(contains(data_error(text, AgeRange(109, 110), years), "110+"));
    }
}

TEST_CASE("CRLF line endings are accepted") {
    const std::string text = "title\r\n\r\nYear Age Female Male Total\r\n1960 60 1 2 3\r\n";
    CHECK(parse(text, HmdColumn::male, AgeRange(60, 60), YearRange(1960, 1960)).values()(0, 0) == 2.0);
}

TEST_CASE("read_hmd_file names the path") {
    try {
        (void)read_hmd_file("/nonexistent/Mx_1x1.txt", HmdColumn::total, Quantity::central_rate,
                            AgeRange(60, 60), YearRange(1960, 1960));
        FAIL("expected a data error");
    } catch (const DataError &e) {
        CHECK(contains(e.what(), "/nonexistent/Mx_1x1.txt"));
    }
}

TEST_CASE("write_hmd and parse_hmd round trip") {
    testing::Rng rng(31);
    Eigen::MatrixXd m = rng.uniform_vector(20, 1e-4, 0.5).reshaped(4, 5);
    const MortalitySurface surface(AgeRange(70, 73), YearRange(1990, 1994), Quantity::central_rate, m);
    std::stringstream io;
    write_hmd(io, surface, "Synthetic, Death rates");
    for (auto column : {HmdColumn::female, HmdColumn::male, HmdColumn::total}) {
        io.clear();
        io.seekg(0);
        const auto back = parse_hmd(io, column, Quantity::central_rate, surface.ages(), surface.years());
        CHECK(back.values() == m);
    }
}

TEST_CASE("estimate_m") {
    Eigen::Matrix2d d;
    d << 5, 8, 12, 20;
    Eigen::Matrix2d e;
    e << 400, 420, 380, 390;
    const MortalitySurface deaths(AgeRange(60, 61), YearRange(2000, 2001), Quantity::deaths, d);
    const MortalitySurface exposures(AgeRange(60, 61), YearRange(2000, 2001), Quantity::exposures, e);
    const auto m = estimate_m(deaths, exposures);
    CHECK(m.kind() == Quantity::central_rate);
    CHECK(m.at(60, 2000) == 5.0 / 400.0);

    SUBCASE("m to q to survival pipeline against 30-digit values") {
        const auto q = surface_m_to_q(m);
        const auto s = surface_q_to_survival(q);
        CHECK(std::abs(q.at(60, 2000) - 0.0124221995061185719327289663543) <= 1e-15);
        CHECK(std::abs(q.at(61, 2000) - 0.0310855398126669406175164712747) <= 1e-15);
        CHECK(std::abs(q.at(60, 2001) - 0.0188673594715368619072985938629) <= 1e-15);
        CHECK(std::abs(q.at(61, 2001) - 0.0499893189897319610660041837355) <= 1e-15);
        CHECK(std::abs(s.at(60, 2000) - 0.987577800493881428067271033646) <= 1e-15);
        CHECK(std::abs(s.at(61, 2000) - 0.956878411458522827924571517965) <= 1e-15);
        CHECK(std::abs(s.at(60, 2001) - 0.981132640528463138092701406137) <= 1e-15);
        CHECK(std::abs(s.at(61, 2001) - 0.932086487989847773855204685012) <= 1e-15);
    }
    SUBCASE("zero exposure names the cell") {
        Eigen::Matrix2d bad = e;
        bad(1, 1) = 0.0;
        try {
            (void)estimate_m(deaths, MortalitySurface(AgeRange(60, 61), YearRange(2000, 2001),
                                                      Quantity::exposures, bad));
            FAIL("expected a domain error");
        } catch (const DomainError &err) {
            CHECK(err.cell()->age == 61);
            CHECK(err.cell()->year == 2001);
        }
    }
    SUBCASE("argument kinds and grids") {
        CHECK_THROWS_AS((void)estimate_m(exposures, deaths), std::invalid_argument);
        const MortalitySurface other(AgeRange(61, 62), YearRange(2000, 2001), Quantity::exposures, e);
        CHECK_THROWS_AS((void)estimate_m(deaths, other), std::invalid_argument);
    }
}

TEST_CASE("generate_synthetic") {
    SUBCASE("default grid and origin value") {
        const auto m = generate_synthetic(SynthConfig{});
        CHECK(m.ages().min() == 60);
        CHECK(m.ages().max() == 94);
        CHECK(m.years().min() == 1959);
        CHECK(m.years().max() == 2009);
        CHECK(m.at(60, 1959) == 0.008);
    }
    SUBCASE("no improvement gives a surface constant over time") {
        SynthConfig c;
        c.improvement = 0.0;
        const auto m = generate_synthetic(c);
        for (Eigen::Index t = 1; t < m.values().cols(); ++t) {
            CHECK(m.values().col(t) == m.values().col(0));
        }
    }
    SUBCASE("log rates fall by the improvement each year") {
        const auto m = generate_synthetic(SynthConfig{});
        const Eigen::MatrixXd log_m = m.values().array().log();
        const Eigen::MatrixXd step = log_m.rightCols(50) - log_m.leftCols(50);
        CHECK((step.array() + 0.015).abs().maxCoeff() <= 1e-12);
    }
    SUBCASE("noise is seed deterministic") {
        SynthConfig c;
        c.noise_sd = 0.1;
        c.seed = 5;
        const auto a = generate_synthetic(c);
        const auto b = generate_synthetic(c);
        CHECK(a.values() == b.values());
        c.seed = 6;
        CHECK(generate_synthetic(c).values() != a.values());
    }
    SUBCASE("invalid configurations") {
        SynthConfig c;
        c.gompertz_a = 0.0;
        CHECK_THROWS_AS((void)generate_synthetic(c), std::invalid_argument);
        c = SynthConfig{};
        c.noise_sd = -1.0;
        CHECK_THROWS_AS((void)generate_synthetic(c), std::invalid_argument);
        c = SynthConfig{};
        c.gompertz_b = 30.0;
        CHECK_THROWS_AS((void)generate_synthetic(c), std::invalid_argument);
    }
    SUBCASE("manifold names") {
        CHECK(parse_manifold("CBD") == Manifold::cbd);
        CHECK(parse_manifold("sl") == Manifold::sl);
        CHECK(parse_manifold("ls") == Manifold::sl);
        CHECK(to_string(Manifold::lc) == "lc");
        CHECK_THROWS_AS((void)parse_manifold("rh"), std::invalid_argument);
    }
}

TEST_CASE("synthetic manifolds are exact for their own model") {
    SynthConfig c;

    SUBCASE("lc") {
        c.manifold = Manifold::lc;
        const auto m = generate_synthetic(c);
        const auto p = fit_lc(m);
        const Eigen::MatrixXd log_m = m.values().array().log();
        CHECK(testing::max_abs(p.fitted_log_m(), log_m) <= 1e-10);
    }
    SUBCASE("cbd") {
        c.manifold = Manifold::cbd;
        const auto q = surface_m_to_q(generate_synthetic(c));
        CHECK(testing::max_abs(fit_cbd(q).fitted_q(), q.values()) <= 1e-13);
    }
    SUBCASE("sl") {
        c.manifold = Manifold::sl;
        const auto survival = surface_q_to_survival(surface_m_to_q(generate_synthetic(c)));
        const auto delta = build_l_diff(survival, YearRange(1960, 2009));
        // Every column is a multiple of the first: alpha1 and alpha2 are both linear in t.
        for (Eigen::Index t = 0; t < delta.values.cols(); ++t) {
            const Eigen::VectorXd expected = static_cast<double>(t + 1) * delta.values.col(0);
            CHECK(testing::max_abs(delta.values.col(t), expected) <= 1e-9);
        }
    }
}

TEST_CASE("surface CSV") {
    SUBCASE("1x1 surface writes a header and one row") {
        std::ostringstream out;
        export_csv(out, MortalitySurface(AgeRange(60, 60), YearRange(2000, 2000), Quantity::death_prob,
                                         Eigen::MatrixXd::Constant(1, 1, 0.1)));
        CHECK(out.str() == "age,year,value\n60,2000,0.10000000000000001\n");
    }
    SUBCASE("rows are sorted by age then year") {
        Eigen::Matrix2d v;
        v << 1, 2, 3, 4;
        std::ostringstream out;
        export_csv(out, MortalitySurface(AgeRange(5, 6), YearRange(2000, 2001), Quantity::central_rate, v));
        CHECK(out.str() == "age,year,value\n5,2000,1\n5,2001,2\n6,2000,3\n6,2001,4\n");
    }
    SUBCASE("round trip is lossless and skips comments") {
        testing::Rng rng(32);
        const Eigen::MatrixXd q = testing::random_q_surface(rng, 7, 9);
        const MortalitySurface s(AgeRange(60, 66), YearRange(1950, 1958), Quantity::death_prob, q);
        std::stringstream io;
        const std::vector<std::string> lines{"slmort test", "seed = 32"};
        write_comment_header(io, lines);
        export_csv(io, s);
        const auto back = import_csv(io, Quantity::death_prob);
        CHECK(back.values() == q);
        CHECK(back.ages().min() == 60);
        CHECK(back.years().max() == 1958);
    }
    SUBCASE("import rejects malformed files") {
        std::istringstream no_header("60,2000,1\n");
        CHECK_THROWS_AS((void)import_csv(no_header, Quantity::death_prob), DataError);
        std::istringstream empty("# only a comment\n");
        CHECK_THROWS_AS((void)import_csv(empty, Quantity::death_prob), DataError);
        std::istringstream gap("age,year,value\n60,2000,1\n61,2001,1\n");
        CHECK_THROWS_AS((void)import_csv(gap, Quantity::death_prob), DataError);
        std::istringstream junk("age,year,value\n60,2000,abc\n");
        CHECK_THROWS_AS((void)import_csv(junk, Quantity::death_prob), DataError);
    }
}

TEST_CASE("surface_from_cells") {
    const std::vector<SurfaceCell> shuffled{{61, 2001, 4}, {60, 2000, 1}, {61, 2000, 3}, {60, 2001, 2}};
    const auto s = surface_from_cells(Quantity::central_rate, shuffled);
    Eigen::Matrix2d expected;
    expected << 1, 2, 3, 4;
    CHECK(s.values() == expected);

    const std::vector<SurfaceCell> dup{{60, 2000, 1}, {60, 2000, 1}};
    CHECK_THROWS_AS((void)surface_from_cells(Quantity::central_rate, dup), DataError);
    CHECK_THROWS_AS((void)surface_from_cells(Quantity::central_rate, {}), DataError);
}

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("report CSV layout") {
    BacktestConfig c;
    c.models = {Model::lc, Model::cbd};
    auto report = run_backtest(generate_synthetic(SynthConfig{}), c);
    report.country = "FRA";
    report.sex = "female";

    std::ostringstream out;
    export_csv(out, report);
    std::istringstream lines(out.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "country,sex,model,period,mse,mse_star,mape");
    std::getline(lines, line);
    CHECK(line.rfind("FRA,female,LC,fit,", 0) == 0);
    std::getline(lines, line);
    CHECK(line.rfind("FRA,female,LC,forecast,", 0) == 0);
    std::getline(lines, line);
    CHECK(line.rfind("FRA,female,CBD,fit,", 0) == 0);
    int rows = 4;
    while (std::getline(lines, line)) {
        ++rows;
    }
    CHECK(rows == 5);

    std::ostringstream mi;
    export_mi_csv(mi, report);
    const auto text = mi.str();
    CHECK(text.rfind("model,age,year,observed,projected\nLC,65,1990,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 20);
}

} // TEST_SUITE
