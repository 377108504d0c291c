#ifndef POINCARE_TESTS_MOTIVIC_CORPUS_HPP
#define POINCARE_TESTS_MOTIVIC_CORPUS_HPP

#include <vector>

#include <poincare/motivic.hpp>

// Integrands where both orders of integration and specialisation are computable.
// S*: step-constant at a finite level; T*: infinite sums with geometric tails.
namespace corpus
{

using poincare::GeometricIntegrand;
using poincare::GeometricPiece;
using poincare::LatticeRange;
using poincare::LinearBound;
using poincare::Poly;
using poincare::Rational;

inline LatticeRange from(long long lo)
{
    return {LinearBound{{}, lo}, std::nullopt};
}
inline LatticeRange upto(long long hi)
{
    return {std::nullopt, LinearBound{{}, hi}};
}
inline LatticeRange between(long long lo, long long hi)
{
    return {LinearBound{{}, lo}, LinearBound{{}, hi}};
}

inline const Poly units{Rational(-1), Rational(1)};

inline Poly units_pow(int k)
{
    Poly out = Poly::constant(1);
    for (int i = 0; i < k; ++i) {
        out = out * units;
    }
    return out;
}

inline std::vector<GeometricIntegrand> integrands()
{
    std::vector<GeometricIntegrand> out;
    const auto step = [&](std::string name, int vf, int vg, std::vector<GeometricPiece> pieces, int level) {
        GeometricIntegrand g;
        g.name = std::move(name);
        g.vf = vf;
        g.vg = vg;
        g.pieces = std::move(pieces);
        g.residue_class = units_pow(vf);
        g.step_level = level;
        out.push_back(g);
        return &out.back();
    };
    const auto tail = [&](std::string name, int vf, int vg, std::vector<GeometricPiece> pieces, long long start,
                          std::function<Rational(const Rational &)> ratio, bool exact) {
        GeometricIntegrand g;
        g.name = std::move(name);
        g.vf = vf;
        g.vg = vg;
        g.pieces = std::move(pieces);
        g.residue_class = units_pow(vf);
        g.tail_start = start;
        g.tail_ratio = std::move(ratio);
        g.exact_tail = exact;
        out.push_back(g);
        return &out.back();
    };

    step("one", 1, 0, {{{from(0)}, {0}, 0}}, 1);
    step("maximal ideal", 1, 0, {{{from(1)}, {0}, 0}}, 2);
    step("capped power", 1, 0, {{{between(0, 1)}, {1}, 0}, {{from(2)}, {0}, 2}}, 2);
    {
        auto *g = step("unit leading coefficient", 1, 0, {{{between(0, 2)}, {0}, 0}}, 3);
        g->residue = "ac(x1) = 1";
        g->residue_class = Poly::constant(1);
    }
    step("ordered pair", 2, 0, {{{between(0, 2), {LinearBound{{1}, 0}, LinearBound{{}, 2}}}, {0, 0}, 0}}, 3);
    step("box power", 2, 0, {{{between(0, 1), between(0, 1)}, {1, 1}, 0}}, 2);
    {
        auto *g = step("square roots of a square", 1, 0, {{{between(0, 1)}, {0}, 0}}, 2);
        g->rf = 1;
        g->residue = "u1:RF * u1 = ac(x1) * ac(x1)";
        g->residue_class = Poly{Rational(-2), Rational(2)};
    }
    {
        auto *g = step("two-sided value group", 1, 1,
                       {{{from(0), between(0, 2)}, {0, -1}, 0}, {{from(0), between(-2, -1)}, {0, 1}, 0}}, 1);
        g->vg_bound = 2;
    }
    {
        auto *g = step("value above order", 1, 1, {{{between(0, 2), {LinearBound{{1}, 0}, LinearBound{{}, 2}}}, {0, -1}, 0}}, 3);
        g->vg_bound = 2;
    }
    step("simplex", 2, 0, {{{between(0, 2), {LinearBound{{}, 0}, LinearBound{{-1}, 2}}}, {1, 0}, 0}}, 3);

    const auto inv_q = [](const Rational &q) { return Rational(1) / q; };
    const auto inv_q2 = [](const Rational &q) { return Rational(1) / (q * q); };
    tail("one-sided value sum", 0, 1, {{{from(0)}, {-1}, 0}}, 0, inv_q, true);
    tail("two-sided value sum", 0, 1, {{{from(0)}, {-1}, 0}, {{upto(-1)}, {1}, 0}}, 1, inv_q, true);
    tail("inverse absolute value", 1, 0, {{{from(0)}, {-1}, 0}}, 0, inv_q2, true);
    tail("inverse square absolute value", 1, 0, {{{from(0)}, {-2}, 0}}, 0,
         [](const Rational &q) { return Rational(1) / (q * q * q); }, true);
    tail("product of absolute values", 2, 0, {{{from(0), from(0)}, {-1, -1}, 0}}, 0,
         [](const Rational &q) { return Rational(2) / (q * q); }, false);
    tail("ordered pair weighted", 2, 0, {{{from(0), {LinearBound{{1}, 0}, std::nullopt}}, {0, -1}, 0}}, 0,
         [](const Rational &q) { return (q + 1) / (q * q); }, false);
    tail("value above order", 1, 1, {{{from(0), {LinearBound{{1}, 0}, std::nullopt}}, {0, -1}, 0}}, 0,
         [](const Rational &q) { return Rational(2) / q; }, false);
    {
        auto *g = tail("unit leading coefficient", 1, 0, {{{from(0)}, {-1}, 0}}, 0, inv_q2, true);
        g->residue = "ac(x1) = 1";
        g->residue_class = Poly::constant(1);
    }
    {
        auto *g = tail("square roots of the leading coefficient", 1, 0, {{{from(0)}, {0}, 0}}, 0, inv_q, true);
        g->rf = 1;
        g->residue = "u1:RF * u1 = ac(x1)";
        g->residue_class = units;
    }
    tail("negative value sum", 0, 1, {{{upto(-1)}, {1}, 0}}, 1, inv_q, true);
    return out;
}

} // namespace corpus

#endif
