#include "cli.hpp"

#include "polyprop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace polyprop::cli {

using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys = {"command", "m",    "n",       "k",       "potential", "grid_L", "grid_N",
                                           "lambda_min", "lambda_max", "t_max", "out", "svg", "tol", "free",
                                           "r_max", "r_count", "b", "points", "oracle"};

[[noreturn]] void invalid(const std::string& what)
{
    throw Error(ErrorCode::InvalidConfig, what);
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where)
{
    if (!j.is_object()) invalid(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) invalid("unknown field '" + it.key() + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        invalid(std::string("field '") + key + "' has the wrong type");
    }
}

template <class T>
void read(const json& j, const char* key, std::optional<T>& out)
{
    if (!j.contains(key) || j.at(key).is_null()) return;
    T v{};
    read(j, key, v);
    out = v;
}

template <class T>
json opt(const std::optional<T>& v)
{
    return v ? json(*v) : json(nullptr);
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

json to_json(const RunConfig& c)
{
    return json{{"command", c.command},       {"m", c.m},
                {"n", c.n},                   {"k", opt(c.k)},
                {"potential", c.potential},   {"grid_L", opt(c.grid_L)},
                {"grid_N", opt(c.grid_N)},    {"lambda_min", opt(c.lambda_min)},
                {"lambda_max", opt(c.lambda_max)}, {"t_max", opt(c.t_max)},
                {"out", c.out},               {"svg", c.svg},
                {"tol", c.tol},               {"free", c.free},
                {"r_max", c.r_max},           {"r_count", c.r_count},
                {"b", c.b},                   {"points", c.points},
                {"oracle", c.oracle}};
}

RunConfig config_from_json(const json& j)
{
    reject_unknown(j, kConfigKeys, "run config");
    RunConfig c;
    read(j, "command", c.command);
    read(j, "m", c.m);
    read(j, "n", c.n);
    read(j, "k", c.k);
    if (j.contains("potential")) c.potential = j.at("potential");
    read(j, "grid_L", c.grid_L);
    read(j, "grid_N", c.grid_N);
    read(j, "lambda_min", c.lambda_min);
    read(j, "lambda_max", c.lambda_max);
    read(j, "t_max", c.t_max);
    read(j, "out", c.out);
    read(j, "svg", c.svg);
    read(j, "tol", c.tol);
    read(j, "free", c.free);
    read(j, "r_max", c.r_max);
    read(j, "r_count", c.r_count);
    read(j, "b", c.b);
    read(j, "points", c.points);
    read(j, "oracle", c.oracle);
    return c;
}

json parse_potential_spec(const std::string& text)
{
    if (!text.empty() && text.front() == '{') {
        try {
            return json::parse(text);
        } catch (const json::exception& e) {
            invalid(std::string("potential spec is not valid JSON: ") + e.what());
        }
    }
    if (std::filesystem::is_regular_file(text)) {
        std::ifstream in(text);
        try {
            return json::parse(in);
        } catch (const json::exception& e) {
            invalid("potential file " + text + " is not valid JSON: " + e.what());
        }
    }
    const auto colon = text.find(':');
    const std::string form = lower(text.substr(0, colon));
    if (form == "gauss_well") {
        if (colon == std::string::npos) invalid("gauss_well needs a depth, e.g. gauss_well:0.5");
        try {
            return json{{"form", "gauss_well"}, {"eps", std::stod(text.substr(colon + 1))}};
        } catch (const std::exception&) {
            invalid("bad gauss_well depth '" + text.substr(colon + 1) + "'");
        }
    }
    if (colon != std::string::npos) invalid("potential '" + text + "' takes no parameter");
    if (form == "paper_resonant") return json{{"form", "resonant_bump"}};
    if (form == "zero" || form == "resonant_bump") return json{{"form", form}};
    invalid("unknown potential '" + text + "'");
}

Potential make_potential(const json& spec, const ModelParams& p)
{
    if (!spec.is_object() || !spec.contains("form") || !spec.at("form").is_string())
        invalid("potential spec needs a string field 'form'");
    const std::string form = spec.at("form").get<std::string>();
    if (form == "zero") {
        reject_unknown(spec, {"form"}, "potential");
        return Potential{"zero", [](double) { return 0.0; }};
    }
    if (form == "gauss_well") {
        reject_unknown(spec, {"form", "eps"}, "potential");
        double eps = 0.0;
        if (!spec.contains("eps")) invalid("gauss_well needs 'eps'");
        read(spec, "eps", eps);
        return gauss_well(eps);
    }
    if (form == "paper_resonant" || form == "resonant_bump") {
        reject_unknown(spec, {"form"}, "potential");
        return resonant_bump(p);
    }
    if (form == "samples") {
        reject_unknown(spec, {"form", "x", "V"}, "potential");
        std::vector<double> x, V;
        read(spec, "x", x);
        read(spec, "V", V);
        if (x.size() < 2 || x.size() != V.size()) invalid("samples need matching 'x' and 'V' arrays of length >= 2");
        if (!std::is_sorted(x.begin(), x.end())) invalid("sample abscissae must be increasing");
        return sampled_potential(std::move(x), std::move(V));
    }
    invalid("unknown potential form '" + form + "'");
}

double tol_value(const RunConfig& c, const std::string& name, double fallback)
{
    auto it = c.tol.find(name);
    return it == c.tol.end() ? fallback : it->second;
}

void check_tol_names(const RunConfig& c, const std::vector<std::string>& known)
{
    for (const auto& [name, value] : c.tol) {
        if (std::find(known.begin(), known.end(), name) == known.end()) {
            std::string list;
            for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
            invalid("unknown tolerance '" + name + "' for " + c.command + " (known: " + (list.empty() ? "none" : list) +
                    ")");
        }
        if (!std::isfinite(value)) invalid("tolerance '" + name + "' is not finite");
    }
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string csv_number(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << (v == 0.0 ? 0.0 : v);
    return os.str();
}

std::string Table::str() const
{
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
        out += "\r\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

}  // namespace polyprop::cli
