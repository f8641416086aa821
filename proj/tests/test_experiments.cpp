#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "bri2d/experiments.hpp"
#include "bri2d/svg.hpp"

using namespace bri2d;

namespace
{
std::filesystem::path temp_dir(std::string const& name)
{
    auto d = std::filesystem::temp_directory_path() / ("bri2d_test_" + name);
    std::filesystem::remove_all(d);
    return d;
}

std::string slurp(std::filesystem::path const& p)
{
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

EstimateReport row(Verdict v)
{
    EstimateReport r;
    r.verdict = v;
    return r;
}
}  // namespace

TEST(Decide, TruthTable)
{
    double nan = std::numeric_limits<double>::quiet_NaN();
    double inf = std::numeric_limits<double>::infinity();
    EXPECT_EQ(decide(Rule::within, 1.0, 1.2, 0.25), Verdict::pass);
    EXPECT_EQ(decide(Rule::within, 1.0, 1.3, 0.25), Verdict::fail);
    EXPECT_EQ(decide(Rule::at_most, 1.2, 1.0, 0.25), Verdict::pass);
    EXPECT_EQ(decide(Rule::at_most, 1.3, 1.0, 0.25), Verdict::fail);
    EXPECT_EQ(decide(Rule::at_least, 0.8, 1.0, 0.25), Verdict::pass);
    EXPECT_EQ(decide(Rule::at_least, 0.7, 1.0, 0.25), Verdict::fail);
    EXPECT_EQ(decide(Rule::within, nan, 1, 1), Verdict::indeterminate);
    EXPECT_EQ(decide(Rule::at_most, 1, inf, 1), Verdict::indeterminate);
    EXPECT_EQ(decide(Rule::report, nan, nan, nan), Verdict::pass);
    EXPECT_STREQ(to_string(Verdict::indeterminate), "indeterminate");
}

TEST(Decide, WorstVerdict)
{
    EXPECT_EQ(worst({}), Verdict::pass);
    EXPECT_EQ(worst({row(Verdict::pass), row(Verdict::indeterminate)}),
              Verdict::indeterminate);
    EXPECT_EQ(worst({row(Verdict::indeterminate), row(Verdict::fail), row(Verdict::pass)}),
              Verdict::fail);
}

TEST(ScenarioConfig, ReservedKeysLifted)
{
    auto kv = KeyValues::parse_string(
        "scenario = vacancy_check\nreplicas = 300\nseed = 17\nout = /tmp/x\nsvg = true\n"
        "workers = 2\nalpha = 0.5\n");
    auto c = ScenarioConfig::from(kv);
    EXPECT_EQ(c.scenario, "vacancy_check");
    EXPECT_EQ(c.replicas, 300u);
    EXPECT_EQ(c.seed, 17u);
    EXPECT_EQ(c.out_dir, "/tmp/x");
    EXPECT_TRUE(c.emit_svg);
    EXPECT_EQ(c.workers, 2u);
    EXPECT_EQ(c.params.number("alpha"), 0.5);
}

TEST(RunScenario, Validation)
{
    ScenarioConfig c;
    c.scenario = "no_such_scenario";
    EXPECT_THROW(run_scenario(c), std::invalid_argument);
    c.scenario = "vacancy_check";
    c.replicas = 50;
    EXPECT_THROW(run_scenario(c), std::invalid_argument);
    c.replicas = 100;
    c.params.set("r", "3");
    EXPECT_THROW(run_scenario(c), std::invalid_argument);
}

TEST(RunScenario, RegistryDefaults)
{
    auto const& reg = scenario_registry();
    EXPECT_EQ(reg.size(), 15u);
    for (auto const& [name, info] : reg)
    {
        if (info.statistical)
        {
            EXPECT_GE(info.default_replicas, 100u) << name;
        }
    }
}

TEST(RunScenario, GeometryOracleWritesReports)
{
    auto dir = temp_dir("geometry");
    ScenarioConfig c;
    c.scenario = "geometry_oracle";
    c.replicas = 5;
    c.out_dir = dir.string();
    auto rows = run_scenario(c);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].verdict, Verdict::pass);
    EXPECT_LE(rows[0].estimate, 1e-12);

    auto csv = slurp(dir / "report.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), report_csv_header);
    auto j = nlohmann::json::parse(slurp(dir / "report.json"));
    EXPECT_EQ(j["scenario"], "geometry_oracle");
    EXPECT_EQ(j["replicas"], 5);
    EXPECT_EQ(j["verdict"], "pass");
    ASSERT_EQ(j["rows"].size(), 1u);
    EXPECT_EQ(j["rows"][0]["verdict"]["value"], "pass");
    EXPECT_TRUE(j["rows"][0]["ci"].contains("kind"));
    std::filesystem::remove_all(dir);
}

TEST(RunScenario, YtildeLimitPanelDecreases)
{
    ScenarioConfig c;
    c.scenario = "ytilde_limit_panel";
    auto rows = run_scenario(c);
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(worst(rows), Verdict::pass);
    for (std::size_t k = 1; k < 4; ++k)
    {
        EXPECT_LT(rows[k].estimate, rows[k - 1].estimate);
    }
}

TEST(RunScenario, VacancyReproducibleWithSvg)
{
    auto dir = temp_dir("vacancy");
    ScenarioConfig c;
    c.scenario = "vacancy_check";
    c.replicas = 150;
    c.out_dir = dir.string();
    c.emit_svg = true;
    c.params.set("caphat_oracle", "0.282718840379458");
    auto a = run_scenario(c);
    c.workers = 2;
    auto b = run_scenario(c);
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0].estimate, b[0].estimate);
    EXPECT_NEAR(a[0].comparator, 0.4114007692346906, 1e-15);
    EXPECT_NE(a[0].verdict, Verdict::indeterminate);
    EXPECT_TRUE(std::filesystem::exists(dir / "vacancy_check_0.svg"));
    c.seed += 1;
    auto d = run_scenario(c);
    EXPECT_NE(a[0].estimate, d[0].estimate);
    std::filesystem::remove_all(dir);
}

TEST(Reports, CsvQuotesAndNonFinite)
{
    EstimateReport r;
    r.scenario = "s";
    r.point = "a=1, b=2";
    r.quantity = "q \"x\"";
    r.estimate = std::numeric_limits<double>::quiet_NaN();
    auto csv = reports_csv({r});
    EXPECT_NE(csv.find("\"a=1, b=2\""), std::string::npos);
    EXPECT_NE(csv.find("\"q \"\"x\"\"\""), std::string::npos);
    EXPECT_NE(csv.find(",nan,"), std::string::npos);
    ScenarioConfig c;
    auto j = reports_json(c, {r});
    EXPECT_EQ(j["rows"][0]["estimate"], "nan");
}

TEST(Svg, DeterministicAndRejectsEmptyScene)
{
    auto f = assemble_field(1, 1, 3, RngStream(3, 1));
    SvgScene s;
    s.field = &f;
    auto a = render_svg(s);
    auto b = render_svg(s);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.rfind("<?xml", 0), 0u);
    EXPECT_NE(a.find("</svg>"), std::string::npos);
    EXPECT_THROW(render_svg(SvgScene{}), std::invalid_argument);
    SvgStyle bad;
    bad.pixels = 0;
    EXPECT_THROW(render_svg(s, bad), std::invalid_argument);
}
