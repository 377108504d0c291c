#ifndef POINCARE_CLI_HPP
#define POINCARE_CLI_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "analytic.hpp"
#include "equiv.hpp"
#include "errors.hpp"
#include "formula.hpp"
#include "localfield.hpp"
#include "motivic.hpp"
#include "multibox.hpp"
#include "series.hpp"

namespace poincare::cli
{

inline const std::string version = "0.1.0";
inline const std::string csv_header = "prime,case,n,a_n,stable";

inline const std::vector<std::string> commands = {"parse-check", "count",    "series",    "fit",           "shape",
                                                  "uniform",     "multibox", "classmass", "compare-fields"};

enum Exit : int { clean = 0, verdict_failure = 1, operational = 2 };

// --help and --version short-circuit the run with this text.
struct EarlyExit {
    std::string text;
};

struct JobConfig {
    std::string command;
    std::string formula;
    std::string symbols;
    std::string table;
    std::vector<std::uint64_t> primes{3};
    std::vector<CharCase> cases{CharCase::mixed};
    std::vector<long long> ns{0, 1, 2, 3, 4};
    std::optional<int> precision;
    std::optional<int> vg_bound;
    std::uint64_t seed = default_seed;
    std::string out;
    std::vector<int> permutation;
    std::optional<std::uint64_t> validate_prime;
    std::optional<int> degree_cap;
    bool extra_class = false;

    nlohmann::json to_json() const
    {
        nlohmann::json cs = nlohmann::json::array();
        for (auto c : cases) {
            cs.push_back(to_string(c));
        }
        nlohmann::json j = {{"command", command},
                            {"formula", formula},
                            {"symbols", symbols},
                            {"table", table},
                            {"primes", primes},
                            {"case", cs},
                            {"n", ns},
                            {"precision", precision ? nlohmann::json(*precision) : nlohmann::json("auto")},
                            {"vg_bound", vg_bound ? nlohmann::json(*vg_bound) : nlohmann::json("precision")},
                            {"seed", seed},
                            {"out", out},
                            {"permutation", permutation},
                            {"extra_class", extra_class}};
        if (validate_prime) {
            j["validate"] = *validate_prime;
        }
        if (degree_cap) {
            j["degree_cap"] = *degree_cap;
        }
        return j;
    }
};

namespace detail
{

inline std::vector<std::string> split(const std::string &s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        out.push_back(cur);
    }
    if (!s.empty() && s.back() == sep) {
        out.emplace_back();
    }
    return out;
}

inline std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline long long parse_integer(const std::string &field, const std::string &text)
{
    const std::string t = trim(text);
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(t, &used);
    } catch (const std::exception &) {
        throw ConfigError(field + ": '" + text + "' is not an integer");
    }
    if (used != t.size()) {
        throw ConfigError(field + ": '" + text + "' is not an integer");
    }
    return v;
}

inline bool is_prime(std::uint64_t p)
{
    if (p < 2) {
        return false;
    }
    for (std::uint64_t d = 2; d * d <= p; ++d) {
        if (p % d == 0) {
            return false;
        }
    }
    return true;
}

inline std::uint64_t parse_prime(const std::string &field, const std::string &text)
{
    const long long v = parse_integer(field, text);
    if (v < 2 || !is_prime(static_cast<std::uint64_t>(v))) {
        throw ConfigError(field + ": " + trim(text) + " is not a prime");
    }
    return static_cast<std::uint64_t>(v);
}

inline std::vector<std::uint64_t> parse_primes(const std::string &text)
{
    std::vector<std::uint64_t> out;
    for (const auto &part : split(text, ',')) {
        const auto p = parse_prime("primes", part);
        if (std::find(out.begin(), out.end(), p) != out.end()) {
            throw ConfigError("primes: " + std::to_string(p) + " is listed twice");
        }
        out.push_back(p);
    }
    if (out.empty()) {
        throw ConfigError("primes: the list is empty");
    }
    return out;
}

inline std::vector<CharCase> parse_cases(const std::string &text)
{
    std::vector<CharCase> out;
    for (const auto &raw : split(text, ',')) {
        const auto part = trim(raw);
        CharCase c;
        if (part == "mixed") {
            c = CharCase::mixed;
        } else if (part == "equal") {
            c = CharCase::equal;
        } else {
            throw ConfigError("case: '" + part + "' is neither mixed nor equal");
        }
        if (std::find(out.begin(), out.end(), c) == out.end()) {
            out.push_back(c);
        }
    }
    if (out.empty()) {
        throw ConfigError("case: the list is empty");
    }
    return out;
}

// "0..6" or "0,2,4".
inline std::vector<long long> parse_range(const std::string &text)
{
    std::vector<long long> out;
    if (const auto dots = text.find(".."); dots != std::string::npos) {
        const long long lo = parse_integer("n", text.substr(0, dots));
        const long long hi = parse_integer("n", text.substr(dots + 2));
        if (hi < lo) {
            throw ConfigError("n: range " + text + " is empty");
        }
        if (lo < 0) {
            throw ConfigError("n: negative parameters are not supported");
        }
        for (long long n = lo; n <= hi; ++n) {
            out.push_back(n);
        }
        return out;
    }
    for (const auto &part : split(text, ',')) {
        const long long n = parse_integer("n", part);
        if (n < 0) {
            throw ConfigError("n: negative parameters are not supported");
        }
        out.push_back(n);
    }
    if (out.empty()) {
        throw ConfigError("n: the list is empty");
    }
    return out;
}

inline std::string read_file(const std::string &field, const std::string &path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(field + ": cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TableRow {
    std::uint64_t prime;
    CharCase cc;
    long long n;
    std::string a_n;
    bool stable;
};

inline std::vector<TableRow> read_table(const std::string &path)
{
    std::istringstream in(read_file("table", path));
    std::string line;
    if (!std::getline(in, line) || trim(line) != csv_header) {
        throw ConfigError("table: '" + path + "' does not start with the header " + csv_header);
    }
    std::vector<TableRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split(trim(line), ',');
        const std::string where = "table:" + std::to_string(lineno);
        if (cells.size() != 5) {
            throw ConfigError(where + ": expected 5 columns");
        }
        TableRow r;
        r.prime = parse_prime(where + ".prime", cells[0]);
        r.cc = parse_cases(cells[1]).front();
        r.n = parse_integer(where + ".n", cells[2]);
        r.a_n = trim(cells[3]);
        const auto st = trim(cells[4]);
        if (st != "true" && st != "false") {
            throw ConfigError(where + ".stable: expected true or false");
        }
        r.stable = st == "true";
        rows.push_back(std::move(r));
    }
    return rows;
}

using Key = std::pair<std::uint64_t, CharCase>;

// Stable coefficient rows per (prime, case), in increasing n.
inline std::map<Key, std::map<long long, Rational>> group_table(const std::vector<TableRow> &rows)
{
    std::map<Key, std::map<long long, Rational>> out;
    for (const auto &r : rows) {
        if (!r.stable) {
            throw ConfigError("table: a_" + std::to_string(r.n) + " at p = " + std::to_string(r.prime)
                              + " is not stable (" + r.a_n + ")");
        }
        Rational v;
        try {
            v = parse_rational(r.a_n);
        } catch (const Error &) {
            throw ConfigError("table: a_n entry '" + r.a_n + "' is not a rational");
        }
        if (!out[{r.prime, r.cc}].emplace(r.n, v).second) {
            throw ConfigError("table: n = " + std::to_string(r.n) + " repeated at p = " + std::to_string(r.prime));
        }
    }
    if (out.empty()) {
        throw ConfigError("table: no rows");
    }
    return out;
}

inline nlohmann::json poly_json(const Poly &p)
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto &c : p.coeffs()) {
        out.push_back(poincare::to_string(c));
    }
    return out;
}

} // namespace detail

// Output of one run: the report, optionally a CSV table, and the exit code.
struct Outcome {
    int exit = clean;
    nlohmann::json report = nlohmann::json::object();
    std::optional<std::string> csv;
};

class Runner
{
public:
    explicit Runner(JobConfig cfg) : cfg_(std::move(cfg)) {}

    Outcome run()
    {
        const auto &c = cfg_.command;
        if (c == "parse-check") {
            return parse_check();
        }
        if (c == "count") {
            return count();
        }
        if (c == "series") {
            return series();
        }
        if (c == "fit") {
            return fit();
        }
        if (c == "shape") {
            return shape();
        }
        if (c == "uniform") {
            return uniform();
        }
        if (c == "multibox") {
            return multibox_cmd();
        }
        if (c == "classmass") {
            return classmass();
        }
        if (c == "compare-fields") {
            return compare_fields();
        }
        throw ConfigError("command: unknown subcommand '" + c + "'");
    }

private:
    SymbolTable symbols() const
    {
        if (cfg_.symbols.empty()) {
            return {};
        }
        try {
            return load_symbols(cfg_.symbols);
        } catch (const InvalidArgument &e) {
            throw ConfigError(std::string("symbols: ") + e.what());
        }
    }

    RelationSpec relation() const
    {
        if (cfg_.formula.empty()) {
            throw ConfigError("formula: required for " + cfg_.command);
        }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(detail::read_file("formula", cfg_.formula));
        } catch (const nlohmann::json::parse_error &e) {
            throw ConfigError("formula: '" + cfg_.formula + "' is not a relation document: " + e.what());
        }
        RelationSpec rel = RelationSpec::from_json(doc, symbols());
        rel.vg_bound = cfg_.vg_bound;
        return rel;
    }

    SeriesOptions series_options() const
    {
        SeriesOptions opt;
        opt.fixed_precision = cfg_.precision;
        opt.extra_class = cfg_.extra_class;
        opt.seed = cfg_.seed;
        return opt;
    }

    // prime -> case -> coefficients, from --table or by counting.
    std::map<detail::Key, std::map<long long, Rational>> coefficients() const
    {
        if (!cfg_.table.empty()) {
            return detail::group_table(detail::read_table(cfg_.table));
        }
        std::vector<detail::TableRow> rows;
        const RelationSpec rel = relation();
        for (auto p : cfg_.primes) {
            for (auto cc : cfg_.cases) {
                for (const auto &e : series_coeffs(rel, cc, p, cfg_.ns, series_options())) {
                    rows.push_back({p, cc, e.z, e.error.value_or(std::to_string(e.count)), e.stable});
                }
            }
        }
        return detail::group_table(rows);
    }

    Outcome parse_check() const
    {
        if (cfg_.formula.empty()) {
            throw ConfigError("formula: required for parse-check");
        }
        const std::string text = detail::read_file("formula", cfg_.formula);
        const SymbolTable table = symbols();
        Outcome out;
        auto &r = out.report;
        const auto describe = [](const Formula &f) {
            nlohmann::json vars = nlohmann::json::array();
            for (const auto &v : free_vars(f)) {
                vars.push_back(v.name + ":" + to_string(v.sort));
            }
            return nlohmann::json{{"printed", f.to_string()}, {"free", vars}};
        };
        try {
            if (detail::trim(text).starts_with("{")) {
                const RelationSpec rel = RelationSpec::from_json(nlohmann::json::parse(text), table);
                r["phi"] = describe(rel.phi);
                r["domain"] = describe(rel.domain);
                r["arity"] = rel.arity();
            } else {
                const Formula f = parse(text, table);
                sort_check(f, table);
                r["formula"] = describe(f);
            }
            r["verdict"] = "PASS";
        } catch (const ParseError &e) {
            r["verdict"] = "ParseError";
            r["position"] = e.position();
            r["expected"] = e.expected();
            r["message"] = e.what();
            out.exit = verdict_failure;
        } catch (const SortError &e) {
            r["verdict"] = "SortError";
            r["message"] = e.what();
            out.exit = verdict_failure;
        } catch (const nlohmann::json::parse_error &e) {
            throw ConfigError(std::string("formula: not valid JSON: ") + e.what());
        }
        return out;
    }

    Outcome count() const
    {
        const RelationSpec rel = relation();
        Outcome out;
        nlohmann::json rows = nlohmann::json::array();
        bool all_stable = true;
        for (auto p : cfg_.primes) {
            for (auto cc : cfg_.cases) {
                for (const auto &e : series_coeffs(rel, cc, p, cfg_.ns, series_options())) {
                    nlohmann::json row = {{"prime", p},         {"case", to_string(cc)},    {"n", e.z},
                                          {"a_n", e.count},     {"stable", e.stable},       {"precision", e.precision_used},
                                          {"path", e.path},     {"invariance_level", e.invariance_level}};
                    if (e.error) {
                        row["error"] = *e.error;
                    }
                    all_stable = all_stable && e.stable;
                    rows.push_back(row);
                }
            }
        }
        out.report["rows"] = rows;
        out.report["verdict"] = all_stable ? "PASS" : "Unstable";
        out.exit = all_stable ? clean : verdict_failure;
        return out;
    }

    Outcome series() const
    {
        const RelationSpec rel = relation();
        Outcome out;
        std::ostringstream csv;
        csv << csv_header << '\n';
        bool all_stable = true;
        nlohmann::json markers = nlohmann::json::array();
        for (auto p : cfg_.primes) {
            for (auto cc : cfg_.cases) {
                for (const auto &e : series_coeffs(rel, cc, p, cfg_.ns, series_options())) {
                    csv << p << ',' << to_string(cc) << ',' << e.z << ',' << e.error.value_or(std::to_string(e.count))
                        << ',' << (e.stable ? "true" : "false") << '\n';
                    if (!e.stable) {
                        all_stable = false;
                        markers.push_back({{"prime", p}, {"case", to_string(cc)}, {"n", e.z},
                                           {"error", e.error.value_or("Unstable")}});
                    }
                }
            }
        }
        out.csv = csv.str();
        out.report["markers"] = markers;
        out.report["verdict"] = all_stable ? "PASS" : "Unstable";
        out.exit = all_stable ? clean : verdict_failure;
        return out;
    }

    static std::vector<Rational> values(const std::map<long long, Rational> &row, const std::string &where)
    {
        std::vector<Rational> out;
        long long expect = row.begin()->first;
        for (const auto &[n, v] : row) {
            if (n != expect++) {
                throw ConfigError("table: coefficients for " + where + " are not consecutive in n");
            }
            out.push_back(v);
        }
        return out;
    }

    static std::string where(const detail::Key &k)
    {
        return "p = " + std::to_string(k.first) + " (" + to_string(k.second) + ")";
    }

    Outcome fit() const
    {
        Outcome out;
        nlohmann::json fits = nlohmann::json::array();
        bool ok = true;
        for (const auto &[key, row] : coefficients()) {
            nlohmann::json item = {{"prime", key.first}, {"case", to_string(key.second)}, {"first_n", row.begin()->first}};
            try {
                const auto f = min_recurrence(values(row, where(key)));
                item["num"] = detail::poly_json(f.num());
                item["den"] = detail::poly_json(f.den());
                item["text"] = f.to_string();
            } catch (const ReconstructionAmbiguous &e) {
                ok = false;
                item["verdict"] = "ReconstructionAmbiguous";
                item["extra_terms"] = e.extra_terms();
            }
            fits.push_back(item);
        }
        out.report["fits"] = fits;
        out.report["verdict"] = ok ? "PASS" : "ReconstructionAmbiguous";
        out.exit = ok ? clean : verdict_failure;
        return out;
    }

    Outcome shape() const
    {
        Outcome out;
        nlohmann::json shapes = nlohmann::json::array();
        std::string verdict = "PASS";
        for (const auto &[key, row] : coefficients()) {
            nlohmann::json item = {{"prime", key.first}, {"case", to_string(key.second)}};
            try {
                const auto f = min_recurrence(values(row, where(key)));
                item["fit"] = f.to_json();
                const auto s = denominator_shape(f, static_cast<long long>(key.first));
                item["shape"] = s.to_json();
                if (!s.complete()) {
                    verdict = "ShapeNotFound";
                }
            } catch (const ReconstructionAmbiguous &e) {
                item["verdict"] = "ReconstructionAmbiguous";
                item["extra_terms"] = e.extra_terms();
                verdict = "ReconstructionAmbiguous";
            }
            shapes.push_back(item);
        }
        out.report["shapes"] = shapes;
        out.report["verdict"] = verdict;
        out.exit = verdict == "PASS" ? clean : verdict_failure;
        return out;
    }

    Outcome uniform() const
    {
        JobConfig cfg = cfg_;
        std::vector<std::uint64_t> training = cfg.primes;
        std::sort(training.begin(), training.end());
        if (cfg.validate_prime) {
            if (*cfg.validate_prime <= training.back()) {
                throw ConfigError("validate: the held-out prime must exceed every training prime");
            }
            cfg.primes.push_back(*cfg.validate_prime);
        } else {
            training.pop_back();
        }
        if (training.empty()) {
            throw ConfigError("primes: uniform needs at least one training prime besides the held-out one");
        }
        const auto coeffs = Runner(cfg).coefficients();
        Outcome out;
        nlohmann::json per_case = nlohmann::json::array();
        bool ok = true;
        for (auto cc : cfg.cases) {
            std::map<std::uint64_t, std::vector<Rational>> table;
            std::vector<long long> ns;
            for (const auto &[key, row] : coeffs) {
                if (key.second != cc) {
                    continue;
                }
                std::vector<long long> these;
                std::vector<Rational> vals;
                for (const auto &[n, v] : row) {
                    these.push_back(n);
                    vals.push_back(v);
                }
                if (!ns.empty() && these != ns) {
                    throw ConfigError("table: primes cover different n");
                }
                ns = these;
                table[key.first] = vals;
            }
            if (table.empty()) {
                continue;
            }
            const int cap = cfg.degree_cap.value_or(static_cast<int>(table.size()) - 2);
            nlohmann::json item = {{"case", to_string(cc)}, {"degree_cap", cap}};
            try {
                item["fit"] = uniformity_fit(table, ns, cap).to_json();
                item["verdict"] = "PASS";
            } catch (const UniformityRejected &e) {
                ok = false;
                item["verdict"] = "UniformityRejected";
                item["prime"] = e.prime();
                item["n"] = e.n();
                item["message"] = e.what();
            }
            per_case.push_back(item);
        }
        out.report["uniformity"] = per_case;
        out.report["verdict"] = ok ? "PASS" : "UniformityRejected";
        out.exit = ok ? clean : verdict_failure;
        return out;
    }

    RelationSpec permuted(RelationSpec rel) const
    {
        if (cfg_.permutation.empty()) {
            return rel;
        }
        const auto m = static_cast<std::size_t>(rel.arity());
        std::vector<int> seen(m, 0);
        if (cfg_.permutation.size() != m) {
            throw ConfigError("permutation: expected " + std::to_string(m) + " entries");
        }
        for (int k : cfg_.permutation) {
            if (k < 1 || static_cast<std::size_t>(k) > m || seen[static_cast<std::size_t>(k - 1)]++ != 0) {
                throw ConfigError("permutation: not a permutation of 1.." + std::to_string(m));
            }
        }
        // New coordinate i is old coordinate permutation[i].
        RelationSpec out = rel;
        for (std::size_t i = 0; i < m; ++i) {
            out.x[i] = rel.x[static_cast<std::size_t>(cfg_.permutation[i] - 1)];
            out.y[i] = rel.y[static_cast<std::size_t>(cfg_.permutation[i] - 1)];
        }
        return out;
    }

    Outcome multibox_cmd() const
    {
        const RelationSpec rel = permuted(relation());
        Outcome out;
        nlohmann::json rows = nlohmann::json::array();
        for (auto p : cfg_.primes) {
            for (auto cc : cfg_.cases) {
                for (long long n : cfg_.ns) {
                    const FieldSpec spec(cc, p, cfg_.precision.value_or(static_cast<int>(n) + 1));
                    const auto eq = check_equivalence(rel, spec, n, cfg_.seed);
                    if (!eq.ok()) {
                        throw InvalidArgument("relation is not an equivalence at p = " + std::to_string(p)
                                              + ", n = " + std::to_string(n) + ": " + eq.counterexample->axiom);
                    }
                    nlohmann::json classes = nlohmann::json::array();
                    const PointSpace space(spec, rel.arity());
                    for (const auto &cls : partition_classes(rel, spec, n)) {
                        const auto x = FiniteSubset::from_indices(spec, rel.arity(), spec.precision(), cls);
                        const auto rep = multibox(x);
                        const auto pt = rep.mb.points().front();
                        nlohmann::json c = {{"representative", space.decode(cls.front())},
                                            {"points", cls.size()},
                                            {"multivolume", rep.multivol.to_json()},
                                            {"multibox_cells", rep.mb.size()}};
                        try {
                            c["multinumber_product"] = multinumber_product(rep, pt);
                        } catch (const PrecisionInconclusive &) {
                            c["multinumber_product"] = "PrecisionInconclusive";
                        }
                        classes.push_back(c);
                    }
                    rows.push_back({{"prime", p}, {"case", to_string(cc)}, {"n", n}, {"precision", spec.precision()},
                                    {"classes", classes}});
                }
            }
        }
        out.report["classes"] = rows;
        bool constant = true;
        nlohmann::json scans = nlohmann::json::array();
        for (auto cc : cfg_.cases) {
            const auto scan = bound_scan(rel, cc, cfg_.primes, cfg_.ns);
            constant = constant && scan.constant_in_p();
            auto j = scan.to_json();
            j["case"] = to_string(cc);
            scans.push_back(j);
        }
        out.report["bound_scan"] = scans;
        out.report["verdict"] = constant ? "PASS" : "BoundVariesWithP";
        out.exit = constant ? clean : verdict_failure;
        return out;
    }

    Outcome classmass() const
    {
        const RelationSpec rel = relation();
        Outcome out;
        nlohmann::json rows = nlohmann::json::array();
        bool ok = true;
        for (auto p : cfg_.primes) {
            for (auto cc : cfg_.cases) {
                for (long long n : cfg_.ns) {
                    const FieldSpec spec(cc, p, cfg_.precision.value_or(static_cast<int>(n) + 1));
                    const auto masses = class_mass_check(rel, spec, n);
                    const auto count = count_classes(rel, spec.with_precision(masses.precision), n);
                    nlohmann::json integrals = nlohmann::json::array();
                    for (const auto &c : masses.classes) {
                        integrals.push_back(poincare::to_string(c.integral));
                    }
                    const bool match = masses.total() == Rational(count.count);
                    ok = ok && masses.all_one() && match;
                    rows.push_back({{"prime", p},
                                    {"case", to_string(cc)},
                                    {"n", n},
                                    {"precision", masses.precision},
                                    {"integrals", integrals},
                                    {"all_one", masses.all_one()},
                                    {"count_via_integral", poincare::to_string(masses.total())},
                                    {"count_classes", count.count},
                                    {"match", match}});
                }
            }
        }
        out.report["rows"] = rows;
        out.report["verdict"] = ok ? "PASS" : "MassMismatch";
        out.exit = ok ? clean : verdict_failure;
        return out;
    }

    Outcome compare_fields() const
    {
        const RelationSpec rel = relation();
        Outcome out;
        nlohmann::json rows = nlohmann::json::array(), diffs = nlohmann::json::array();
        for (auto p : cfg_.primes) {
            const auto a = series_coeffs(rel, CharCase::mixed, p, cfg_.ns, series_options());
            const auto b = series_coeffs(rel, CharCase::equal, p, cfg_.ns, series_options());
            for (std::size_t i = 0; i < a.size(); ++i) {
                const auto show = [](const ClassCount &c) {
                    return c.error.value_or(std::to_string(c.count));
                };
                nlohmann::json row = {{"prime", p},           {"n", a[i].z},
                                      {"mixed", show(a[i])},  {"equal", show(b[i])},
                                      {"mixed_stable", a[i].stable}, {"equal_stable", b[i].stable}};
                if (!a[i].stable || !b[i].stable || a[i].count != b[i].count) {
                    diffs.push_back(row);
                }
                rows.push_back(row);
            }
        }
        out.report["rows"] = rows;
        out.report["differences"] = diffs;
        out.report["verdict"] = diffs.empty() ? "PASS" : "FieldsDiffer";
        out.exit = diffs.empty() ? clean : verdict_failure;
        return out;
    }

    JobConfig cfg_;
};

// Parses argv into a JobConfig; CLI11 handles the flag syntax, field checks raise ConfigError.
inline JobConfig parse_args(int argc, const char *const *argv)
{
    CLI::App app{"Poincare series of definable equivalence relations over truncated local fields"};
    app.set_version_flag("--version", version);
    JobConfig cfg;
    std::string primes = "3", cases = "mixed", ns = "0..4", precision = "auto", permutation, seed, vg_bound;
    std::string validate, degree_cap;
    app.add_option("command", cfg.command, "subcommand")->required()->check(CLI::IsMember(commands));
    app.add_option("--formula", cfg.formula, "relation JSON or formula text");
    app.add_option("--symbols", cfg.symbols, "analytic symbol sidecar JSON");
    app.add_option("--table", cfg.table, "coefficient CSV for fit, shape and uniform");
    app.add_option("--primes", primes, "comma-separated primes");
    app.add_option("--case", cases, "comma list of mixed and equal");
    app.add_option("--n", ns, "range a..b or comma list");
    app.add_option("--precision", precision, "auto or a fixed truncation level");
    app.add_option("--vg-bound", vg_bound, "range of value-group quantifiers");
    app.add_option("--seed", seed, "PRNG seed for sampled checks");
    app.add_option("--out", cfg.out, "output path (default stdout)");
    app.add_option("--permutation", permutation, "coordinate order for multibox, e.g. 2,1");
    app.add_option("--validate", validate, "held-out prime for uniform");
    app.add_option("--degree-cap", degree_cap, "degree cap for uniform");
    app.add_flag("--extra-class", cfg.extra_class, "count the complement of the domain as one more class");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        throw EarlyExit{app.help()};
    } catch (const CLI::CallForVersion &) {
        throw EarlyExit{version + "\n"};
    } catch (const CLI::ParseError &e) {
        throw ConfigError(std::string("arguments: ") + e.what());
    }
    cfg.primes = detail::parse_primes(primes);
    cfg.cases = detail::parse_cases(cases);
    cfg.ns = detail::parse_range(ns);
    if (precision != "auto") {
        const long long k = detail::parse_integer("precision", precision);
        if (k < 1 || k > 60) {
            throw ConfigError("precision: " + precision + " is outside 1..60");
        }
        cfg.precision = static_cast<int>(k);
    }
    if (!vg_bound.empty()) {
        const long long b = detail::parse_integer("vg-bound", vg_bound);
        if (b < 1) {
            throw ConfigError("vg-bound: must be positive");
        }
        cfg.vg_bound = static_cast<int>(b);
    }
    if (!seed.empty()) {
        const long long s = detail::parse_integer("seed", seed);
        if (s < 0) {
            throw ConfigError("seed: must be nonnegative");
        }
        cfg.seed = static_cast<std::uint64_t>(s);
    }
    if (!permutation.empty()) {
        for (const auto &part : detail::split(permutation, ',')) {
            cfg.permutation.push_back(static_cast<int>(detail::parse_integer("permutation", part)));
        }
    }
    if (!validate.empty()) {
        cfg.validate_prime = detail::parse_prime("validate", validate);
    }
    if (!degree_cap.empty()) {
        const long long d = detail::parse_integer("degree-cap", degree_cap);
        if (d < 0) {
            throw ConfigError("degree-cap: must be nonnegative");
        }
        cfg.degree_cap = static_cast<int>(d);
    }
    return cfg;
}

// Full run: parse, dispatch, write. Returns the exit status.
inline int main(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
    const auto started = std::chrono::steady_clock::now();
    std::vector<std::string> echo(argv, argv + argc);
    nlohmann::json report = {{"tool", "poincare"}, {"version", version}, {"argv", echo}};
    int code = clean;
    std::optional<std::string> csv;
    JobConfig cfg;
    try {
        cfg = parse_args(argc, argv);
        report["config"] = cfg.to_json();
        report["seed"] = cfg.seed;
        report["command"] = cfg.command;
        Outcome o = Runner(cfg).run();
        for (auto &[k, v] : o.report.items()) {
            report[k] = v;
        }
        code = o.exit;
        csv = std::move(o.csv);
    } catch (const EarlyExit &e) {
        out << e.text;
        return clean;
    } catch (const Error &e) {
        report["verdict"] = "ERROR";
        report["error"] = {{"kind", e.kind()}, {"message", e.what()}};
        code = operational;
    } catch (const std::exception &e) {
        report["verdict"] = "ERROR";
        report["error"] = {{"kind", "InternalError"}, {"message", e.what()}};
        code = operational;
    }
    report["wall_clock"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const std::string json_text = report.dump(2) + "\n";
    if (code == operational) {
        err << json_text;
        return code;
    }
    // The CSV goes to --out (or stdout); the JSON report goes beside it, or to
    // stdout/--out for JSON-only commands.
    const auto write = [&](const std::string &path, const std::string &text) {
        std::ofstream f(path);
        if (!f) {
            err << nlohmann::json{{"verdict", "ERROR"}, {"error", {{"kind", "ConfigError"}, {"message", "out: cannot write '" + path + "'"}}}}.dump(2) << '\n';
            return false;
        }
        f << text;
        return true;
    };
    if (csv) {
        if (cfg.out.empty()) {
            out << *csv;
        } else if (!write(cfg.out, *csv) || !write(cfg.out + ".report.json", json_text)) {
            return operational;
        }
    } else if (cfg.out.empty()) {
        out << json_text;
    } else if (!write(cfg.out, json_text)) {
        return operational;
    }
    return code;
}

} // namespace poincare::cli

#endif
