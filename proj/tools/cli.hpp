#ifndef POLYPROP_TOOLS_CLI_HPP
#define POLYPROP_TOOLS_CLI_HPP

#include "polyprop/model.hpp"
#include "polyprop/spectral.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace polyprop::cli {

/// Everything a run depends on. Serializes to JSON losslessly; unknown keys are rejected.
struct RunConfig {
    std::string command;
    int m = 2;
    int n = 1;
    std::optional<int> k;
    /// {"form": "zero" | "gauss_well" | "resonant_bump" | "samples", ...}
    nlohmann::json potential = {{"form", "zero"}};
    std::optional<double> grid_L;
    std::optional<int> grid_N;
    std::optional<double> lambda_min, lambda_max, t_max;
    std::string out;
    bool svg = false;
    std::map<std::string, double> tol;
    /// kernel: sample the free propagator instead of the resolvent
    bool free = false;
    double r_max = 10.0;
    int r_count = 41;
    /// lemma-check symbol orders
    std::vector<double> b = {0.0};
    /// propagate / decay-fit spatial sample points
    std::vector<double> points = {-2.0, 0.0, 2.0};
    bool oracle = true;

    bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& c);
/// Throws InvalidConfig on unknown keys or wrong types.
RunConfig config_from_json(const nlohmann::json& j);

/// Accepts a JSON object, a path to a JSON file, or a short form: "zero", "resonant_bump"
/// (also spelled "paper_resonant"), "gauss_well:EPS".
nlohmann::json parse_potential_spec(const std::string& text);
/// Throws InvalidConfig for unknown forms or fields.
Potential make_potential(const nlohmann::json& spec, const ModelParams& p);

/// Tolerance override or a default; throws InvalidConfig for names the command does not know.
double tol_value(const RunConfig& c, const std::string& name, double fallback);
void check_tol_names(const RunConfig& c, const std::vector<std::string>& known);

/// RFC 4180 field quoting.
std::string csv_field(const std::string& s);
std::string csv_number(double v);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string str() const;
};

struct Series {
    std::string name;
    std::vector<double> x, y;
};

/// Line plot of the series; axes are logarithmic when requested (non-positive values dropped).
std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                     const std::vector<Series>& series, bool logx, bool logy);

/// Runs a subcommand from argv and returns the exit code: 0 success, 1 selftest failure or
/// internal error, 2 validation error, 3 numerical-threshold ambiguity, 4 fit failure.
int dispatch(int argc, char** argv);

}  // namespace polyprop::cli

#endif
