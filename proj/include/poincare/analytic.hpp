#ifndef POINCARE_ANALYTIC_HPP
#define POINCARE_ANALYTIC_HPP

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include <poincare/errors.hpp>
#include <poincare/localfield.hpp>

namespace poincare
{

// A monomial c * xi_1^e_1 * ... * xi_m^e_m with integer coefficient.
struct Monomial {
    std::vector<int> exponents;
    long long coefficient = 0;

    friend bool operator==(const Monomial &, const Monomial &) = default;
};

// Truncation at t^M of a power series  sum_i a_i(xi) t^i  in Z[xi_1..xi_m][[t]].
// At a local field the symbol is interpreted with t sent to the uniformizer
// and xi_j to the j-th argument, so every omitted term has ord >= M.
struct AnalyticSymbol {
    std::string name;
    int arity = 0;
    int t_precision = 0;
    // coefficients[i] is the polynomial a_i.
    std::vector<std::vector<Monomial>> coefficients;

    void validate() const
    {
        if (name.empty()) {
            throw InvalidArgument("analytic symbol without a name");
        }
        if (arity < 0 || t_precision < 0) {
            throw InvalidArgument("analytic symbol '" + name + "': negative arity or t_precision");
        }
        if (coefficients.size() > static_cast<std::size_t>(t_precision)) {
            throw InvalidArgument("analytic symbol '" + name + "': more t-coefficients than t_precision");
        }
        for (const auto &poly : coefficients) {
            for (const auto &mono : poly) {
                if (mono.exponents.size() != static_cast<std::size_t>(arity)) {
                    throw InvalidArgument("analytic symbol '" + name + "': monomial exponent length != arity");
                }
                for (int e : mono.exponents) {
                    if (e < 0) {
                        throw InvalidArgument("analytic symbol '" + name + "': negative exponent");
                    }
                }
            }
        }
    }

    // The same series viewed as a function of one more (ignored) trailing variable.
    AnalyticSymbol cylinder(std::string new_name) const
    {
        AnalyticSymbol out = *this;
        out.name = std::move(new_name);
        ++out.arity;
        for (auto &poly : out.coefficients) {
            for (auto &mono : poly) {
                mono.exponents.push_back(0);
            }
        }
        return out;
    }
};

using SymbolTable = std::map<std::string, AnalyticSymbol>;

inline TruncElem eval_monomial(const Monomial &mono, std::span<const TruncElem> args, const FieldSpec &spec)
{
    TruncElem v = TruncElem::from_integer(spec, mono.coefficient);
    for (std::size_t j = 0; j < args.size(); ++j) {
        for (int e = 0; e < mono.exponents[j]; ++e) {
            v *= args[j];
        }
    }
    return v;
}

// sum_{i<N} a_i(args) * uniformizer^i, exact in O/m^N.
inline TruncElem eval_analytic(const AnalyticSymbol &sym, std::span<const TruncElem> args, const FieldSpec &spec)
{
    if (sym.t_precision < spec.precision()) {
        throw InsufficientTSeriesPrecision("symbol '" + sym.name + "' is known to t^" + std::to_string(sym.t_precision)
                                           + " but precision " + std::to_string(spec.precision()) + " was requested");
    }
    if (args.size() != static_cast<std::size_t>(sym.arity)) {
        throw SortError("symbol '" + sym.name + "' expects " + std::to_string(sym.arity) + " arguments, got "
                        + std::to_string(args.size()));
    }
    for (const auto &a : args) {
        if (!(a.spec() == spec)) {
            throw SpecMismatch("analytic argument from a different truncation");
        }
    }
    const TruncElem pi = TruncElem::uniformizer(spec);
    TruncElem acc = TruncElem::zero(spec);
    TruncElem power = TruncElem::from_integer(spec, 1);
    const auto terms = std::min(sym.coefficients.size(), static_cast<std::size_t>(spec.precision()));
    for (std::size_t i = 0; i < terms; ++i) {
        for (const auto &mono : sym.coefficients[i]) {
            acc += power * eval_monomial(mono, args, spec);
        }
        power *= pi;
    }
    return acc;
}

// Sidecar document: either one symbol object, an array of them, or
// {"symbols": [...]}. Each symbol is
//   {"name": "F", "arity": 1, "t_precision": 8,
//    "coefficients": [ [[[e1,...,em], c], ...],   <- a_0
//                      [[[e1,...,em], c], ...],   <- a_1
//                      ... ]}
inline AnalyticSymbol symbol_from_json(const nlohmann::json &j)
{
    AnalyticSymbol s;
    try {
        s.name = j.at("name").get<std::string>();
        s.arity = j.at("arity").get<int>();
        s.t_precision = j.at("t_precision").get<int>();
        for (const auto &poly : j.at("coefficients")) {
            std::vector<Monomial> monos;
            for (const auto &entry : poly) {
                if (!entry.is_array() || entry.size() != 2) {
                    throw InvalidArgument("monomial entry must be [exponents, integer]");
                }
                monos.push_back(Monomial{entry[0].get<std::vector<int>>(), entry[1].get<long long>()});
            }
            s.coefficients.push_back(std::move(monos));
        }
    } catch (const nlohmann::json::exception &e) {
        throw InvalidArgument(std::string("malformed analytic symbol: ") + e.what());
    }
    s.validate();
    return s;
}

inline nlohmann::json symbol_to_json(const AnalyticSymbol &s)
{
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto &poly : s.coefficients) {
        nlohmann::json monos = nlohmann::json::array();
        for (const auto &m : poly) {
            monos.push_back(nlohmann::json::array({m.exponents, m.coefficient}));
        }
        coeffs.push_back(std::move(monos));
    }
    return {{"name", s.name}, {"arity", s.arity}, {"t_precision", s.t_precision}, {"coefficients", coeffs}};
}

inline SymbolTable symbols_from_json(const nlohmann::json &doc)
{
    SymbolTable table;
    auto add = [&](const nlohmann::json &j) {
        auto s = symbol_from_json(j);
        if (table.count(s.name) != 0) {
            throw InvalidArgument("duplicate analytic symbol '" + s.name + "'");
        }
        table.emplace(s.name, std::move(s));
    };
    if (doc.is_array()) {
        for (const auto &j : doc) {
            add(j);
        }
    } else if (doc.is_object() && doc.contains("symbols")) {
        for (const auto &j : doc.at("symbols")) {
            add(j);
        }
    } else if (doc.is_object()) {
        add(doc);
    } else {
        throw InvalidArgument("analytic symbol document must be an object or an array");
    }
    return table;
}

inline SymbolTable load_symbols(const std::string &path)
{
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open symbol file '" + path + "'");
    }
    try {
        return symbols_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error &e) {
        throw InvalidArgument("symbol file '" + path + "' is not valid JSON: " + e.what());
    }
}

} // namespace poincare

#endif
