#include "fraclab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "fraclab/acceptance.hpp"
#include "fraclab/fields.hpp"

namespace fraclab::cli {

namespace {

struct Value {
    enum class Kind { Number, Bool, String, Array } kind = Kind::Number;
    double number = 0.0;
    bool boolean = false;
    std::string text;
    std::vector<Value> items;
};

struct Entry {
    int line = 0;
    std::string raw;
    Value value;
};

// Problem with a single value; becomes a ConfigIssue once the key and line are known.
struct Bad {
    std::string message;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Drops a trailing comment, leaving '#' inside strings alone.
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '\\' && in_string) {
            ++i;
        } else if (c == '"') {
            in_string = !in_string;
        } else if (c == '#' && !in_string) {
            return line.substr(0, i);
        }
    }
    return line;
}

int bracket_balance(const std::string& s) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '\\' && in_string) {
            ++i;
        } else if (c == '"') {
            in_string = !in_string;
        } else if (!in_string && c == '[') {
            ++depth;
        } else if (!in_string && c == ']') {
            --depth;
        }
    }
    return depth;
}

class ValueParser {
public:
    explicit ValueParser(const std::string& s) : s_(s) {}

    Value parse_all() {
        Value v = parse_value();
        skip_ws();
        if (pos_ != s_.size()) {
            throw Bad{"unexpected text after value: '" + s_.substr(pos_) + "'"};
        }
        return v;
    }

private:
    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) {
            ++pos_;
        }
    }

    Value parse_value() {
        skip_ws();
        if (pos_ >= s_.size()) {
            throw Bad{"missing value"};
        }
        const char c = s_[pos_];
        if (c == '"') {
            return parse_string();
        }
        if (c == '[') {
            return parse_array();
        }
        return parse_scalar();
    }

    Value parse_string() {
        Value v;
        v.kind = Value::Kind::String;
        ++pos_;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) {
                    break;
                }
                const char e = s_[pos_++];
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: throw Bad{std::string("unsupported escape '\\") + e + "'"};
                }
            }
            v.text.push_back(c);
        }
        if (pos_ >= s_.size()) {
            throw Bad{"unterminated string"};
        }
        ++pos_;
        return v;
    }

    Value parse_array() {
        Value v;
        v.kind = Value::Kind::Array;
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
            ++pos_;
            return v;
        }
        while (true) {
            v.items.push_back(parse_value());
            skip_ws();
            if (pos_ >= s_.size()) {
                throw Bad{"unterminated array"};
            }
            if (s_[pos_] == ',') {
                ++pos_;
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ']') {
                    ++pos_;
                    return v;
                }
                continue;
            }
            if (s_[pos_] == ']') {
                ++pos_;
                return v;
            }
            throw Bad{"expected ',' or ']' in array"};
        }
    }

    Value parse_scalar() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' && s_[pos_] != '\t') {
            ++pos_;
        }
        const std::string tok = s_.substr(start, pos_ - start);
        Value v;
        if (tok == "true" || tok == "false") {
            v.kind = Value::Kind::Bool;
            v.boolean = tok == "true";
            return v;
        }
        v.kind = Value::Kind::Number;
        v.number = parse_number(tok);
        return v;
    }

    static double parse_number(const std::string& tok) {
        if (tok == "inf" || tok == "+inf") {
            return std::numeric_limits<double>::infinity();
        }
        if (tok == "-inf") {
            return -std::numeric_limits<double>::infinity();
        }
        std::string digits;
        for (std::size_t i = 0; i < tok.size(); ++i) {
            if (tok[i] == '_') {
                if (i == 0 || i + 1 == tok.size() || !std::isdigit(static_cast<unsigned char>(tok[i - 1])) ||
                    !std::isdigit(static_cast<unsigned char>(tok[i + 1]))) {
                    throw Bad{"malformed number '" + tok + "'"};
                }
                continue;
            }
            digits.push_back(tok[i]);
        }
        const char* first = digits.data();
        const char* last = digits.data() + digits.size();
        if (first != last && *first == '+') {
            ++first;
        }
        double out = 0.0;
        const auto [ptr, ec] = std::from_chars(first, last, out);
        if (ec != std::errc() || ptr != last || first == last) {
            throw Bad{"expected a number, boolean, string or array, got '" + tok + "'"};
        }
        return out;
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

double as_number(const Value& v) {
    if (v.kind != Value::Kind::Number) {
        throw Bad{"expected a number"};
    }
    return v.number;
}

double as_finite(const Value& v) {
    const double x = as_number(v);
    if (!std::isfinite(x)) {
        throw Bad{"expected a finite number"};
    }
    return x;
}

int as_int(const Value& v) {
    const double x = as_finite(v);
    if (x != std::floor(x) || std::abs(x) > 1e9) {
        throw Bad{"expected an integer"};
    }
    return static_cast<int>(x);
}

bool as_bool(const Value& v) {
    if (v.kind != Value::Kind::Bool) {
        throw Bad{"expected true or false"};
    }
    return v.boolean;
}

std::string as_string(const Value& v) {
    if (v.kind != Value::Kind::String) {
        throw Bad{"expected a double-quoted string"};
    }
    return v.text;
}

std::vector<double> as_numbers(const Value& v) {
    if (v.kind != Value::Kind::Array) {
        throw Bad{"expected an array of numbers"};
    }
    std::vector<double> out;
    for (const Value& item : v.items) {
        out.push_back(as_finite(item));
    }
    return out;
}

std::vector<std::string> as_strings(const Value& v) {
    if (v.kind != Value::Kind::Array) {
        throw Bad{"expected an array of strings"};
    }
    std::vector<std::string> out;
    for (const Value& item : v.items) {
        out.push_back(as_string(item));
    }
    return out;
}

// [x1, x2, ...] or [[x1, y1], [x2, y2], ...]; dimension checked later.
std::vector<Point> as_points(const Value& v, int& dim) {
    if (v.kind != Value::Kind::Array) {
        throw Bad{"expected an array of points"};
    }
    std::vector<Point> out;
    dim = 1;
    for (const Value& item : v.items) {
        if (item.kind == Value::Kind::Array) {
            const std::vector<double> xy = as_numbers(item);
            if (xy.size() != 2) {
                throw Bad{"two-dimensional points need exactly two coordinates"};
            }
            out.push_back(Point{xy[0], xy[1]});
            dim = 2;
        } else {
            out.push_back(Point{as_finite(item), 0.0});
        }
    }
    const bool mixed = std::any_of(v.items.begin(), v.items.end(), [&](const Value& i) {
        return (i.kind == Value::Kind::Array) != (dim == 2);
    });
    if (mixed) {
        throw Bad{"points mix scalars and coordinate pairs"};
    }
    return out;
}

struct RawPoints {
    std::vector<Point> points;
    int dim = 1;
};

struct Raw {
    std::optional<double> p, s, a, b, radius;
    std::optional<std::string> domain;
    RawPoints points, centers;
};

using Handler = std::function<void(const Value&, ExperimentConfig&, Raw&)>;

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> h = {
        {"p", [](const Value& v, ExperimentConfig&, Raw& r) { r.p = as_number(v); }},
        {"s", [](const Value& v, ExperimentConfig&, Raw& r) { r.s = as_number(v); }},
        {"domain", [](const Value& v, ExperimentConfig&, Raw& r) {
             const std::string d = as_string(v);
             if (d != "interval" && d != "disc") {
                 throw Bad{"domain must be \"interval\" or \"disc\" (got \"" + d + "\")"};
             }
             r.domain = d;
         }},
        {"a", [](const Value& v, ExperimentConfig&, Raw& r) { r.a = as_finite(v); }},
        {"b", [](const Value& v, ExperimentConfig&, Raw& r) { r.b = as_finite(v); }},
        {"radius", [](const Value& v, ExperimentConfig&, Raw& r) { r.radius = as_finite(v); }},
        {"n", [](const Value& v, ExperimentConfig& c, Raw&) { c.n = as_int(v); }},
        {"source", [](const Value& v, ExperimentConfig& c, Raw&) { c.source = as_string(v); }},
        {"K", [](const Value& v, ExperimentConfig& c, Raw&) { c.K = as_finite(v); }},
        {"field", [](const Value& v, ExperimentConfig& c, Raw&) { c.field = as_string(v); }},
        {"amplitude", [](const Value& v, ExperimentConfig& c, Raw&) { c.amplitude = as_finite(v); }},
        {"points", [](const Value& v, ExperimentConfig&, Raw& r) { r.points.points = as_points(v, r.points.dim); }},
        {"far_cutoff", [](const Value& v, ExperimentConfig& c, Raw&) {
             c.far_cutoff = as_number(v);
             if (!(c.far_cutoff > 0.0)) {
                 throw Bad{"far_cutoff must be positive (inf integrates to infinity)"};
             }
         }},
        {"depth", [](const Value& v, ExperimentConfig& c, Raw&) {
             c.depth = as_int(v);
             if (c.depth < 4 || c.depth > 60) {
                 throw Bad{"depth must lie in [4, 60]"};
             }
         }},
        {"expect", [](const Value& v, ExperimentConfig& c, Raw&) { c.expect = as_finite(v); }},
        {"expect_tol", [](const Value& v, ExperimentConfig& c, Raw&) {
             c.expect_tol = as_finite(v);
             if (!(c.expect_tol >= 0.0)) {
                 throw Bad{"expect_tol must be nonnegative"};
             }
         }},
        {"check", [](const Value& v, ExperimentConfig& c, Raw&) { c.check = as_string(v); }},
        {"K_list", [](const Value& v, ExperimentConfig& c, Raw&) { c.K_list = as_numbers(v); }},
        {"radii", [](const Value& v, ExperimentConfig& c, Raw&) {
             c.radii = as_numbers(v);
             for (double r : c.radii) {
                 if (!(r > 0.0)) {
                     throw Bad{"radii must be positive"};
                 }
             }
         }},
        {"centers", [](const Value& v, ExperimentConfig&, Raw& r) { r.centers.points = as_points(v, r.centers.dim); }},
        {"rho", [](const Value& v, ExperimentConfig& c, Raw&) {
             c.rho = as_finite(v);
             if (!(c.rho > 0.0)) {
                 throw Bad{"rho must be positive"};
             }
         }},
        {"R", [](const Value& v, ExperimentConfig& c, Raw&) {
             c.R = as_finite(v);
             if (!(c.R > 0.0)) {
                 throw Bad{"R must be positive"};
             }
         }},
        {"harnack_C", [](const Value& v, ExperimentConfig& c, Raw&) { c.harnack_C = as_finite(v); }},
        {"harnack_C_eps", [](const Value& v, ExperimentConfig& c, Raw&) { c.harnack_C_eps = as_finite(v); }},
        {"harnack_eps", [](const Value& v, ExperimentConfig& c, Raw&) { c.harnack_eps = as_finite(v); }},
        {"pairs", [](const Value& v, ExperimentConfig& c, Raw&) {
             c.pairs = as_int(v);
             if (c.pairs < 1) {
                 throw Bad{"pairs must be at least 1"};
             }
         }},
        {"seed", [](const Value& v, ExperimentConfig& c, Raw&) {
             const int s = as_int(v);
             if (s < 0) {
                 throw Bad{"seed must be nonnegative"};
             }
             c.seed = static_cast<std::uint64_t>(s);
         }},
        {"tol", [](const Value& v, ExperimentConfig& c, Raw&) {
             c.tol = as_finite(v);
             if (!(c.tol > 0.0)) {
                 throw Bad{"tol must be positive"};
             }
         }},
        {"max_iter", [](const Value& v, ExperimentConfig& c, Raw&) {
             c.max_iter = as_int(v);
             if (c.max_iter < 1) {
                 throw Bad{"max_iter must be at least 1"};
             }
         }},
        {"override_singular_check",
         [](const Value& v, ExperimentConfig& c, Raw&) { c.override_singular_check = as_bool(v); }},
        {"criteria", [](const Value& v, ExperimentConfig& c, Raw&) {
             c.criteria = as_strings(v);
             const auto ids = acceptance::criterion_ids();
             for (const std::string& id : c.criteria) {
                 if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
                     throw Bad{"unknown criterion '" + id + "'"};
                 }
             }
         }},
        {"out", [](const Value& v, ExperimentConfig& c, Raw&) { c.out = as_string(v); }},
    };
    return h;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const std::string& s : v) {
        out += (out.empty() ? "" : ", ") + s;
    }
    return out;
}

}  // namespace

Subcommand parse_subcommand(const std::string& name) {
    if (name == "solve") {
        return Subcommand::Solve;
    }
    if (name == "eval-op") {
        return Subcommand::EvalOp;
    }
    if (name == "verify") {
        return Subcommand::Verify;
    }
    if (name == "suite") {
        return Subcommand::Suite;
    }
    throw ConfigError("unknown subcommand '" + name + "' (expected solve, eval-op, verify or suite)");
}

std::string to_string(Subcommand sub) {
    switch (sub) {
        case Subcommand::Solve: return "solve";
        case Subcommand::EvalOp: return "eval-op";
        case Subcommand::Verify: return "verify";
        case Subcommand::Suite: return "suite";
    }
    return "?";
}

namespace {

std::string describe(const std::vector<ConfigIssue>& issues) {
    std::ostringstream os;
    os << "invalid configuration:";
    for (const ConfigIssue& i : issues) {
        os << "\n  ";
        if (i.line > 0) {
            os << "line " << i.line << ", ";
        }
        if (!i.key.empty()) {
            os << "key '" << i.key << "': ";
        }
        os << i.message;
    }
    return os.str();
}

}  // namespace

ConfigFileError::ConfigFileError(std::vector<ConfigIssue> issues)
    : ConfigError(describe(issues)), issues_(std::move(issues)) {}

std::vector<std::string> checker_names() {
    return {"comparison", "apriori", "boundary", "oscillation", "holder", "harnack", "delta_s"};
}

QuadratureOptions ExperimentConfig::quadrature() const {
    QuadratureOptions o;
    o.far_cutoff = far_cutoff;
    o.schedule.levels = depth;
    o.override_singular = override_singular_check;
    return o;
}

ExperimentConfig parse_config(const std::string& text, Subcommand sub, bool override_singular_check) {
    std::vector<ConfigIssue> issues;
    std::map<std::string, Entry> entries;
    std::vector<std::string> order;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string body = trim(strip_comment(line));
        if (body.empty()) {
            continue;
        }
        if (body.front() == '[') {
            issues.push_back({line_no, "", "tables are not supported; every key lives at the top level"});
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            issues.push_back({line_no, "", "expected 'key = value'"});
            continue;
        }
        std::string key = trim(body.substr(0, eq));
        if (key.size() >= 2 && key.front() == '"' && key.back() == '"') {
            key = key.substr(1, key.size() - 2);
        }
        std::string raw = trim(body.substr(eq + 1));
        const int start_line = line_no;
        // Arrays may continue over several lines.
        while (bracket_balance(raw) > 0 && std::getline(in, line)) {
            ++line_no;
            raw += " " + trim(strip_comment(line));
        }
        if (key.empty() || !std::all_of(key.begin(), key.end(), [](char c) {
                return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
            })) {
            issues.push_back({start_line, key, "malformed key"});
            continue;
        }
        if (auto it = entries.find(key); it != entries.end()) {
            issues.push_back({start_line, key, "duplicate key (first set on line " + std::to_string(it->second.line) + ")"});
            continue;
        }
        Entry e;
        e.line = start_line;
        e.raw = raw;
        try {
            e.value = ValueParser(raw).parse_all();
        } catch (const Bad& b) {
            issues.push_back({start_line, key, "syntax error: " + b.message});
            continue;
        }
        entries.emplace(key, std::move(e));
        order.push_back(key);
    }

    ExperimentConfig cfg;
    cfg.subcommand = sub;
    Raw raw;
    for (const std::string& key : order) {
        const Entry& e = entries.at(key);
        const auto h = handlers().find(key);
        if (h == handlers().end()) {
            issues.push_back({e.line, key, "unknown key"});
            continue;
        }
        try {
            h->second(e.value, cfg, raw);
            cfg.echo.emplace_back(key, e.raw);
        } catch (const Bad& b) {
            issues.push_back({e.line, key, b.message});
        }
    }
    cfg.override_singular_check = cfg.override_singular_check || override_singular_check;

    auto line_of = [&](const std::string& key) {
        const auto it = entries.find(key);
        return it == entries.end() ? 0 : it->second.line;
    };
    auto fail = [&](const std::string& key, const std::string& msg) { issues.push_back({line_of(key), key, msg}); };

    bool params_ok = false;
    if (!raw.p) {
        fail("p", "required key missing");
    }
    if (!raw.s) {
        fail("s", "required key missing");
    }
    if (raw.p && raw.s) {
        try {
            cfg.params = OperatorParams::make(*raw.p, *raw.s);
            params_ok = true;
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            fail(msg.rfind("p ", 0) == 0 ? "p" : "s", msg);
        }
    } else if (raw.p && !(*raw.p > 1.0)) {
        fail("p", "p must exceed 1 (got " + entries.at("p").raw + ")");
    }

    const std::string domain = raw.domain.value_or("interval");
    try {
        if (domain == "interval") {
            if (raw.radius) {
                fail("radius", "radius applies to the disc only");
            }
            cfg.domain = DomainSpec::interval(raw.a.value_or(-1.0), raw.b.value_or(1.0));
        } else {
            if (raw.a || raw.b) {
                fail(raw.a ? "a" : "b", "a and b apply to the interval only");
            }
            cfg.domain = DomainSpec::disc(raw.radius.value_or(1.0));
        }
    } catch (const ConfigError& e) {
        fail(domain == "interval" ? "a" : "radius", e.what());
    }
    const int dim = cfg.domain.dim();
    const int n_max = dim == 1 ? 8192 : 100;
    if (cfg.n < 8 || cfg.n > n_max) {
        fail("n", "n must lie in [8, " + std::to_string(n_max) + "] for the " + domain + " (got " +
                      std::to_string(cfg.n) + ")");
    }

    const auto names = fields::names();
    auto known_field = [&](const std::string& f) { return std::find(names.begin(), names.end(), f) != names.end(); };
    if (cfg.source != "constant" && !known_field(cfg.source)) {
        fail("source", "unknown source '" + cfg.source + "' (expected constant, " + join(names) + ")");
    }

    cfg.points = raw.points.points;
    cfg.centers = raw.centers.points;
    if (!cfg.points.empty() && raw.points.dim != dim) {
        fail("points", "points must have " + std::to_string(dim) + " coordinate(s) for the " + domain);
    }
    if (!cfg.centers.empty() && raw.centers.dim != dim) {
        fail("centers", "centers must have " + std::to_string(dim) + " coordinate(s) for the " + domain);
    }

    auto singular_guard = [&](const std::string& what) {
        if (params_ok && !cfg.params.pointwise_valid() && !cfg.override_singular_check) {
            std::ostringstream os;
            os << what << " needs s < 2(p-1)/p = " << cfg.params.singular_threshold() << " when p < 2 (got p = "
               << cfg.params.p << ", s = " << cfg.params.s
               << "); the operator of a smooth function need not exist pointwise in this singular case."
               << " Set override_singular_check = true or pass --override-singular-check to proceed";
            fail("s", os.str());
        }
    };

    switch (sub) {
        case Subcommand::Solve:
            break;
        case Subcommand::EvalOp:
            if (!known_field(cfg.field)) {
                fail("field", "unknown field '" + cfg.field + "' (expected " + join(names) + ")");
            }
            if (cfg.points.empty()) {
                fail("points", "eval-op needs at least one evaluation point");
            }
            singular_guard("pointwise evaluation");
            break;
        case Subcommand::Verify: {
            const auto checks = checker_names();
            if (cfg.check.empty()) {
                fail("check", "verify needs check = one of " + join(checks));
            } else if (std::find(checks.begin(), checks.end(), cfg.check) == checks.end()) {
                fail("check", "unknown checker '" + cfg.check + "' (expected " + join(checks) + ")");
            }
            if (cfg.check == "apriori") {
                const auto [lo, hi] = std::minmax_element(cfg.K_list.begin(), cfg.K_list.end());
                if (cfg.K_list.size() < 3) {
                    fail("K_list", "apriori needs at least 3 values of K");
                } else if (!(*lo > 0.0)) {
                    fail("K_list", "K values must be positive");
                } else if (*hi / *lo < 100.0 * (1.0 - 1e-12)) {
                    fail("K_list", "K values must span at least two decades");
                }
            }
            if (cfg.check == "oscillation" && cfg.radii.empty()) {
                fail("radii", "oscillation needs a list of radii");
            }
            if (cfg.check == "harnack" && !(cfg.R > 0.0)) {
                fail("R", "harnack needs the ball radius R");
            }
            if (cfg.check == "delta_s") {
                if (cfg.points.empty()) {
                    fail("points", "delta_s needs probe points in the collar");
                }
                singular_guard("delta_s");
            }
            break;
        }
        case Subcommand::Suite:
            break;
    }

    if (!issues.empty()) {
        throw ConfigFileError(std::move(issues));
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path, Subcommand sub, bool override_singular_check) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot read config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), sub, override_singular_check);
}

}  // namespace fraclab::cli
