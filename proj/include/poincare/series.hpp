#ifndef POINCARE_SERIES_HPP
#define POINCARE_SERIES_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include <poincare/errors.hpp>
#include <poincare/eval.hpp>
#include <poincare/formula.hpp>
#include <poincare/rational.hpp>

namespace poincare
{

// num/den in Q(T), normalised so den(0) = 1 and gcd(num, den) = 1.
class RationalFn
{
public:
    RationalFn() : num_(), den_{Rational(1)} {}
    RationalFn(Poly num, Poly den) : num_(std::move(num)), den_(std::move(den))
    {
        normalize();
    }

    const Poly &num() const noexcept
    {
        return num_;
    }
    const Poly &den() const noexcept
    {
        return den_;
    }

    // First k Taylor coefficients at T = 0.
    std::vector<Rational> expand(std::size_t k) const
    {
        std::vector<Rational> s(k);
        for (std::size_t i = 0; i < k; ++i) {
            Rational v = num_.coeff(i);
            for (std::size_t j = 1; j <= i && j < den_.coeffs().size(); ++j) {
                v -= den_.coeff(j) * s[i - j];
            }
            s[i] = v; // den(0) = 1
        }
        return s;
    }

    friend bool operator==(const RationalFn &a, const RationalFn &b)
    {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }

    nlohmann::json to_json() const
    {
        const auto list = [](const Poly &p) {
            nlohmann::json out = nlohmann::json::array();
            for (std::size_t i = 0; i <= static_cast<std::size_t>(std::max(0L, p.degree())); ++i) {
                out.push_back(poincare::to_string(p.coeff(i)));
            }
            return out;
        };
        return {{"num", list(num_)}, {"den", list(den_)}};
    }

    static RationalFn from_json(const nlohmann::json &j)
    {
        const auto read = [](const nlohmann::json &a) {
            std::vector<Rational> c;
            for (const auto &x : a) {
                c.push_back(x.is_string() ? parse_rational(x.get<std::string>()) : Rational(x.get<long long>()));
            }
            return Poly(std::move(c));
        };
        try {
            return {read(j.at("num")), read(j.at("den"))};
        } catch (const nlohmann::json::exception &e) {
            throw InvalidArgument(std::string("malformed rational function: ") + e.what());
        }
    }

    std::string to_string() const
    {
        const auto show = [](const Poly &p) {
            std::string s;
            for (std::size_t i = 0; i < p.coeffs().size(); ++i) {
                const Rational &c = p.coeffs()[i];
                if (c == 0) {
                    continue;
                }
                std::string mag = poincare::to_string(c < 0 ? Rational(-c) : c);
                if (!s.empty()) {
                    s += c < 0 ? " - " : " + ";
                } else if (c < 0) {
                    s += "-";
                }
                if (i == 0) {
                    s += mag;
                } else {
                    if (mag != "1") {
                        s += mag + "*";
                    }
                    s += "T" + (i > 1 ? "^" + std::to_string(i) : std::string());
                }
            }
            return s.empty() ? std::string("0") : s;
        };
        return "(" + show(num_) + ")/(" + show(den_) + ")";
    }

private:
    void normalize()
    {
        if (den_.is_zero()) {
            throw InvalidArgument("rational function with zero denominator");
        }
        const Poly g = Poly::gcd(num_, den_);
        if (g.degree() > 0) {
            num_ = Poly::divmod(num_, g).first;
            den_ = Poly::divmod(den_, g).first;
        }
        if (den_.coeff(0) == 0) {
            throw InvalidArgument("denominator vanishes at T = 0; not a power series");
        }
        const Rational c = den_.coeff(0);
        num_ = (Rational(1) / c) * num_;
        den_ = (Rational(1) / c) * den_;
    }

    Poly num_;
    Poly den_;
};

// Berlekamp-Massey over Q, then the numerator from (S * C) mod T^L. The fit
// counts as confirmed only with at least 2L + 1 terms.
inline RationalFn min_recurrence(std::span<const Rational> seq)
{
    if (seq.size() < 3) {
        throw InvalidArgument("min_recurrence needs at least 3 terms");
    }
    std::vector<Rational> c{Rational(1)}, b{Rational(1)};
    std::size_t len = 0, shift = 1;
    Rational last_disc = 1;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        Rational d = seq[i];
        for (std::size_t j = 1; j <= len; ++j) {
            d += c[j] * seq[i - j];
        }
        if (d == 0) {
            ++shift;
            continue;
        }
        const Rational coef = d / last_disc;
        auto t = c;
        if (c.size() < b.size() + shift) {
            c.resize(b.size() + shift, Rational(0));
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
            c[j + shift] -= coef * b[j];
        }
        if (2 * len <= i) {
            len = i + 1 - len;
            b = std::move(t);
            last_disc = d;
            shift = 1;
        } else {
            ++shift;
        }
    }
    c.resize(len + 1, Rational(0));
    const std::size_t needed = 2 * len + 1;
    if (seq.size() < needed) {
        throw ReconstructionAmbiguous("minimal recurrence of length " + std::to_string(len) + " is unconfirmed",
                                      static_cast<int>(needed - seq.size()));
    }
    const Poly conn(c);
    const Poly s(std::vector<Rational>(seq.begin(), seq.end()));
    const RationalFn out((s * conn).truncated(len), conn);
    const auto check = out.expand(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (check[i] != seq[i]) {
            throw ReconstructionAmbiguous("reconstruction does not reproduce term " + std::to_string(i), 1);
        }
    }
    return out;
}

inline RationalFn min_recurrence(const std::vector<long long> &seq)
{
    std::vector<Rational> r(seq.begin(), seq.end());
    return min_recurrence(std::span<const Rational>(r));
}

struct ShapeFactor {
    int a = 0;
    int b = 1;

    friend bool operator==(const ShapeFactor &, const ShapeFactor &) = default;
    friend auto operator<=>(const ShapeFactor &, const ShapeFactor &) = default;
};

struct DenominatorShape {
    std::vector<ShapeFactor> factors;
    Poly residual;            // what is left of the denominator after division
    BigInt residual_scalar;   // candidate #Y: clears the numerator's denominators
    std::vector<std::pair<BigInt, Poly>> alternatives; // (constant c, numerator c*num) readings

    bool complete() const
    {
        return residual.degree() == 0;
    }

    nlohmann::json to_json() const
    {
        nlohmann::json fs = nlohmann::json::array();
        for (const auto &f : factors) {
            fs.push_back({f.a, f.b});
        }
        nlohmann::json alts = nlohmann::json::array();
        for (const auto &[c, n] : alternatives) {
            nlohmann::json coeffs = nlohmann::json::array();
            for (const auto &x : n.coeffs()) {
                coeffs.push_back(to_string(Rational(x)));
            }
            alts.push_back({{"constant", c.str()}, {"numerator", coeffs}});
        }
        nlohmann::json res = nlohmann::json::array();
        for (const auto &x : residual.coeffs()) {
            res.push_back(to_string(x));
        }
        return {{"factors", fs},
                {"residual", res},
                {"residual_scalar", residual_scalar.str()},
                {"verdict", complete() ? "SHAPE_FOUND" : "ShapeNotFound"},
                {"alternatives", alts}};
    }
};

namespace detail
{

inline Poly shape_factor_poly(const ShapeFactor &f, const Rational &q)
{
    std::vector<Rational> c(static_cast<std::size_t>(f.b) + 1);
    c[0] = 1;
    c[static_cast<std::size_t>(f.b)] = -rpow(q, f.a);
    return Poly(std::move(c));
}

inline bool shape_search(const Poly &rest, const std::vector<ShapeFactor> &cands, const std::vector<Poly> &polys,
                         std::size_t from, std::vector<ShapeFactor> &chosen, Poly &leftover)
{
    if (rest.degree() == 0) {
        leftover = rest;
        return true;
    }
    for (std::size_t i = from; i < cands.size(); ++i) {
        if (polys[i].degree() > rest.degree()) {
            continue;
        }
        auto [quo, rem] = Poly::divmod(rest, polys[i]);
        if (!rem.is_zero()) {
            continue;
        }
        chosen.push_back(cands[i]);
        if (shape_search(quo, cands, polys, i, chosen, leftover)) {
            return true;
        }
        chosen.pop_back();
    }
    return false;
}

} // namespace detail

// Factor den(T) as prod (1 - q^a T^b) by exact division with backtracking.
// Candidates run b ascending, then |a| ascending, positive a first.
inline DenominatorShape denominator_shape(const RationalFn &f, long long q, int a_max = 12, int b_max = 8)
{
    if (q < 2) {
        throw InvalidArgument("denominator_shape needs q >= 2");
    }
    std::vector<ShapeFactor> cands;
    for (int b = 1; b <= b_max; ++b) {
        cands.push_back({0, b});
        for (int a = 1; a <= a_max; ++a) {
            cands.push_back({a, b});
            cands.push_back({-a, b});
        }
    }
    std::vector<Poly> polys;
    for (const auto &c : cands) {
        polys.push_back(detail::shape_factor_poly(c, Rational(q)));
    }
    DenominatorShape out;
    Poly leftover;
    if (!detail::shape_search(f.den(), cands, polys, 0, out.factors, leftover)) {
        // No full factorisation: keep the greedy prefix and report the residual.
        out.factors.clear();
        Poly rest = f.den();
        for (std::size_t i = 0; i < cands.size(); ++i) {
            while (polys[i].degree() <= rest.degree()) {
                auto [quo, rem] = Poly::divmod(rest, polys[i]);
                if (!rem.is_zero()) {
                    break;
                }
                out.factors.push_back(cands[i]);
                rest = quo;
            }
        }
        leftover = rest;
    }
    out.residual = leftover;
    BigInt scalar = 1;
    for (const auto &c : f.num().coeffs()) {
        scalar = lcm(scalar, denom(c));
    }
    out.residual_scalar = scalar;
    BigInt qa = 1;
    for (int a = 0; a <= 2; ++a) {
        const BigInt c = scalar * qa;
        out.alternatives.emplace_back(c, Rational(c) * f.num());
        qa *= q;
    }
    std::sort(out.factors.begin(), out.factors.end(), [](const ShapeFactor &x, const ShapeFactor &y) {
        return std::pair(x.b, std::pair(std::abs(x.a), -x.a)) < std::pair(y.b, std::pair(std::abs(y.a), -y.a));
    });
    return out;
}

struct UniformityFit {
    std::vector<long long> ns;
    std::vector<Poly> polys; // per n, in q
    std::vector<std::uint64_t> training;
    std::uint64_t held_out = 0;

    nlohmann::json to_json() const
    {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < ns.size(); ++i) {
            nlohmann::json coeffs = nlohmann::json::array();
            for (const auto &c : polys[i].coeffs()) {
                coeffs.push_back(to_string(c));
            }
            rows.push_back({{"n", ns[i]}, {"poly_in_q", coeffs}, {"validated", true}});
        }
        return {{"training_primes", training}, {"held_out_prime", held_out}, {"coefficients", rows}};
    }
};

inline Poly lagrange(std::span<const std::pair<Rational, Rational>> pts)
{
    Poly acc;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Poly term = Poly::constant(pts[i].second);
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (j == i) {
                continue;
            }
            term = term * Poly{-pts[j].first / (pts[i].first - pts[j].first), Rational(1) / (pts[i].first - pts[j].first)};
        }
        acc += term;
    }
    return acc;
}

// table: prime -> coefficient row over ns (same length for every prime).
inline UniformityFit uniformity_fit(const std::map<std::uint64_t, std::vector<Rational>> &table,
                                    const std::vector<long long> &ns, int degree_cap)
{
    if (table.size() < static_cast<std::size_t>(degree_cap) + 2) {
        throw InvalidArgument("uniformity_fit needs at least degree_cap + 2 primes");
    }
    for (const auto &[p, row] : table) {
        if (row.size() != ns.size()) {
            throw InvalidArgument("prime " + std::to_string(p) + " has a coefficient row of the wrong length");
        }
    }
    UniformityFit fit;
    fit.ns = ns;
    fit.held_out = table.rbegin()->first;
    for (const auto &[p, row] : table) {
        if (p != fit.held_out) {
            fit.training.push_back(p);
        }
    }
    for (std::size_t k = 0; k < ns.size(); ++k) {
        std::vector<std::pair<Rational, Rational>> pts;
        for (auto p : fit.training) {
            pts.emplace_back(Rational(p), table.at(p)[k]);
        }
        const Poly poly = lagrange(pts);
        for (const auto &c : poly.coeffs()) {
            if (denom(c) != 1) {
                throw UniformityRejected(ns[k], fit.held_out, "interpolant has non-integer coefficient " + to_string(c));
            }
        }
        if (poly.degree() > degree_cap) {
            throw UniformityRejected(ns[k], fit.held_out,
                                     "interpolant degree " + std::to_string(poly.degree()) + " exceeds the cap");
        }
        if (poly(Rational(fit.held_out)) != table.at(fit.held_out)[k]) {
            throw UniformityRejected(ns[k], fit.held_out,
                                     "predicted " + to_string(poly(Rational(fit.held_out))) + ", observed "
                                         + to_string(table.at(fit.held_out)[k]));
        }
        fit.polys.push_back(poly);
    }
    return fit;
}

// Number of points of F_p^s satisfying a residue-field-only formula.
inline std::uint64_t residue_point_count(const Formula &psi, std::uint64_t p)
{
    const auto check_term = [](const Term &t, auto &&self) -> void {
        if (t.sort() != Sort::RF) {
            throw SortError("residue_point_count: term " + t.to_string() + " is not RF");
        }
        for (const auto &a : t.args()) {
            self(a, self);
        }
    };
    const auto check = [&](const Formula &f, auto &&self) -> void {
        if (f.is_atom()) {
            check_term(f.lhs(), check_term);
            check_term(f.rhs(), check_term);
            return;
        }
        if (f.is_quantifier() && f.bound().sort != Sort::RF) {
            throw SortError("residue_point_count: quantifier over " + to_string(f.bound().sort));
        }
        for (const auto &s : f.subs()) {
            self(s, self);
        }
    };
    check(psi, check);
    const auto fv = free_vars(psi);
    const std::vector<Var> vars(fv.begin(), fv.end());
    const FieldSpec spec = FieldSpec::mixed(p, 1);
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (total > enumeration_budget / p) {
            throw EnumerationBudgetExceeded("F_p^s too large to enumerate");
        }
        total *= p;
    }
    const Evaluator ev(psi, vars);
    std::vector<std::int64_t> vals(vars.size(), 0);
    std::uint64_t count = 0;
    for (std::uint64_t idx = 0; idx < total; ++idx) {
        std::uint64_t r = idx;
        for (auto &v : vals) {
            v = static_cast<std::int64_t>(r % p);
            r /= p;
        }
        if (ev(vals, spec, 1).value) {
            ++count;
        }
    }
    return count;
}

} // namespace poincare

#endif
