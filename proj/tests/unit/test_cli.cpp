#include <doctest.h>

#include "cli.hpp"
#include "polyprop/errors.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace polyprop;
using namespace polyprop::cli;
using nlohmann::json;

namespace {

int run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "polyprop");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return dispatch(static_cast<int>(argv.size()), argv.data());
}

std::filesystem::path scratch(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("polyprop_cli_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("run config round trips and rejects unknown fields")
{
    RunConfig c;
    c.command = "propagate";
    c.m = 3;
    c.k = 2;
    c.potential = {{"form", "gauss_well"}, {"eps", -0.1}};
    c.grid_L = 640.0;
    c.lambda_max = 5.0;
    c.tol["h"] = 0.1;
    c.points = {0.0, 1.5};
    c.oracle = false;
    CHECK(config_from_json(json::parse(to_json(c).dump())) == c);
    CHECK(config_from_json(to_json(RunConfig{})) == RunConfig{});

    json j = to_json(c);
    j["grid_l"] = 3;
    CHECK_THROWS_AS(config_from_json(j), Error);
    json w = to_json(c);
    w["m"] = "two";
    CHECK_THROWS_AS(config_from_json(w), Error);
}

TEST_CASE("potential specs")
{
    auto p = make_params(2, 1);
    CHECK(parse_potential_spec("gauss_well:0.5") == json{{"form", "gauss_well"}, {"eps", 0.5}});
    CHECK(parse_potential_spec("paper_resonant") == json{{"form", "resonant_bump"}});
    CHECK(parse_potential_spec(R"({"form":"zero"})") == json{{"form", "zero"}});
    CHECK_THROWS_AS(parse_potential_spec("square_well"), Error);
    CHECK_THROWS_AS(parse_potential_spec("gauss_well"), Error);
    CHECK_THROWS_AS(parse_potential_spec("{not json"), Error);

    CHECK(make_potential({{"form", "gauss_well"}, {"eps", 0.5}}, p).V(0.0) == doctest::Approx(-0.5));
    auto s = make_potential({{"form", "samples"}, {"x", {-1.0, 0.0, 1.0}}, {"V", {0.0, 2.0, 0.0}}}, p);
    CHECK(s.V(0.5) == doctest::Approx(1.0));
    CHECK(s.V(3.0) == 0.0);
    CHECK_THROWS_AS(make_potential({{"form", "gauss_well"}, {"eps", 0.5}, {"width", 1}}, p), Error);
    CHECK_THROWS_AS(make_potential({{"form", "samples"}, {"x", {0.0}}, {"V", {1.0}}}, p), Error);
}

TEST_CASE("csv quoting")
{
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    Table t{{"a", "b"}, {{"1", "x,y"}}};
    CHECK(t.str() == "a,b\r\n1,\"x,y\"\r\n");
    CHECK(std::stod(csv_number(0.1)) == 0.1);
}

TEST_CASE("coeffs writes csv and manifest")
{
    auto dir = scratch("coeffs");
    REQUIRE(run_cli({"coeffs", "--m", "2", "--n", "1", "--out", dir.string(), "--svg"}) == 0);
    auto rows = read_csv(dir / "coeffs.csv");
    REQUIRE(rows.size() > 2);
    CHECK(rows[0] == std::vector<std::string>{"j", "re_a_plus", "im_a_plus", "re_a", "im_a", "residual"});
    // a_0+ = (i - 1)/4 for (m, n) = (2, 1)
    CHECK(std::stod(rows[1][1]) == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(std::stod(rows[1][2]) == doctest::Approx(0.25).epsilon(1e-12));
    auto m = json::parse(slurp(dir / "manifest.json"));
    CHECK(m["status"] == "ok");
    CHECK(m["config"]["m"] == 2);
    CHECK(!m["invariants"].empty());
    for (const auto& inv : m["invariants"]) CHECK(inv["pass"] == true);
    CHECK(std::filesystem::exists(dir / "coeffs.svg"));
    CHECK(slurp(dir / "coeffs.svg").find("<polyline") != std::string::npos);

    // a config file reproduces the run
    auto again = scratch("coeffs_again");
    std::filesystem::create_directories(again);
    auto cfg = m["config"];
    cfg["out"] = (again / "out").string();
    std::ofstream(again / "run.json") << cfg.dump();
    REQUIRE(run_cli({"coeffs", "--config", (again / "run.json").string()}) == 0);
    CHECK(slurp(again / "out" / "coeffs.csv") == slurp(dir / "coeffs.csv"));
}

TEST_CASE("classify detects the resonance of the bump")
{
    auto dir = scratch("classify");
    REQUIRE(run_cli({"classify", "--potential", "paper_resonant", "--m", "2", "--n", "1", "--out", dir.string()}) == 0);
    auto r = json::parse(slurp(dir / "resonance.json"));
    CHECK(r["k"].get<int>() >= 1);
    CHECK(r["oracle_agreement"] == true);
    CHECK(read_csv(dir / "singular_values.csv")[0] == std::vector<std::string>{"table", "index", "singular_value"});
}

TEST_CASE("exit codes")
{
    auto dir = scratch("codes");
    CHECK(run_cli({"coeffs", "--m", "2", "--n", "2", "--out", dir.string()}) == 2);
    CHECK(json::parse(slurp(dir / "manifest.json"))["status"] == "error");
    CHECK(run_cli({"coeffs", "--tol", "bogus=1"}) == 2);
    CHECK(run_cli({"coeffs", "--tol", "theta"}) == 2);
    CHECK(run_cli({"coeffs", "--frobnicate"}) == 2);
    CHECK(run_cli({"classify", "--potential", "square_well"}) == 2);
    CHECK(run_cli({}) == 2);
    // a singular value the coarse radial grid cannot place on either side of the threshold
    CHECK(run_cli({"classify", "--m", "1", "--n", "3", "--grid-N", "400", "--potential",
                   R"({"form":"gauss_well","eps":2.68400465092409153827})"}) == 3);
    // five half-dyadic times are too few for a decay fit
    CHECK(run_cli({"decay-fit", "--potential", "zero", "--t-max", "4", "--tol", "h=0.25", "--lambda-max", "4"}) == 4);
}

TEST_CASE("propagate csv columns")
{
    auto dir = scratch("propagate");
    REQUIRE(run_cli({"propagate", "--potential", "zero", "--t-max", "2", "--points", "0", "2", "--tol", "h=0.25",
                     "--lambda-max", "4", "--grid-L", "640", "--out", dir.string()}) == 0);
    auto rows = read_csv(dir / "propagate.csv");
    CHECK(rows[0] == std::vector<std::string>{"t", "x", "y", "re", "im", "envelope_ratio", "oracle_re", "oracle_im",
                                              "abs_err"});
    REQUIRE(rows.size() == 1 + 3 * 4);
    double err = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) err = std::max(err, std::stod(rows[i][8]));
    CHECK(err < 1e-8);
}

TEST_CASE("selftest passes")
{
    CHECK(run_cli({"selftest", "--out", scratch("selftest").string()}) == 0);
}
