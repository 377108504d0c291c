#include <gtest/gtest.h>

#include <poincare/series.hpp>

#include "oracles.hpp"

using namespace poincare;

namespace
{

std::vector<Rational> rationals(std::initializer_list<long long> xs)
{
    return {xs.begin(), xs.end()};
}

std::vector<Rational> expand_by_hand(const Poly &num, const Poly &den, std::size_t k)
{
    // Independent expansion: multiply num by the geometric inverse of den.
    std::vector<Rational> inv(k);
    inv[0] = Rational(1) / den.coeff(0);
    for (std::size_t i = 1; i < k; ++i) {
        Rational acc = 0;
        for (std::size_t j = 1; j <= i; ++j) {
            acc += den.coeff(j) * inv[i - j];
        }
        inv[i] = -acc / den.coeff(0);
    }
    std::vector<Rational> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            out[i] += num.coeff(j) * inv[i - j];
        }
    }
    return out;
}

} // namespace

TEST(MinRecurrence, Constant)
{
    const auto f = min_recurrence(rationals({1, 1, 1, 1, 1}));
    EXPECT_EQ(f.num(), Poly{Rational(1)});
    EXPECT_EQ(f.den(), (Poly{Rational(1), Rational(-1)}));
}

TEST(MinRecurrence, SquareCongruenceSeries)
{
    const auto seq = rationals({1, 1, 3, 3, 9, 9, 27, 27, 81});
    const auto f = min_recurrence(seq);
    EXPECT_EQ(f.num(), (Poly{Rational(1), Rational(1)}));
    EXPECT_EQ(f.den(), (Poly{Rational(1), Rational(0), Rational(-3)}));
    EXPECT_EQ(expand_by_hand(f.num(), f.den(), seq.size()), seq);
}

TEST(MinRecurrence, ConfirmationMargin)
{
    const auto f = min_recurrence(rationals({1, 2, 4}));
    EXPECT_EQ(f.den(), (Poly{Rational(1), Rational(-2)}));
    // A late break forces order 3, which 4 terms cannot confirm.
    try {
        min_recurrence(rationals({1, 2, 4, 9}));
        FAIL() << "expected ReconstructionAmbiguous";
    } catch (const ReconstructionAmbiguous &e) {
        EXPECT_EQ(e.extra_terms(), 3);
    }
    EXPECT_THROW(min_recurrence(rationals({1, 2})), InvalidArgument);
}

TEST(MinRecurrence, ProductSeries)
{
    // x*y at p = 3: closed form (n+1)3^n - n 3^(n-1).
    std::vector<Rational> seq;
    for (int n = 0; n <= 6; ++n) {
        seq.emplace_back(oracle::closed_form_x_times_y(3, n));
    }
    const auto f = min_recurrence(seq);
    EXPECT_EQ(f.num(), (Poly{Rational(1), Rational(-1)}));
    EXPECT_EQ(f.den(), (Poly{Rational(1), Rational(-6), Rational(9)}));
    EXPECT_EQ(f.to_string(), "(1 - T)/(1 - 6*T + 9*T^2)");
}

TEST(MinRecurrence, ShiftRobust)
{
    const std::vector<std::vector<long long>> corpus = {
        {1, 1, 3, 3, 9, 9, 27, 27}, {1, 5, 21, 81, 297, 1053, 3645}, {2, 3, 5, 9, 17, 33, 65}, {1, 0, 0, 0, 0}};
    for (const auto &c : corpus) {
        const auto f = min_recurrence(c);
        auto longer = f.expand(c.size() + 1);
        const auto g = min_recurrence(std::span<const Rational>(longer));
        EXPECT_EQ(f, g);
        // Soundness: the expansion reproduces the input.
        const auto e = f.expand(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            EXPECT_EQ(e[i], Rational(c[i]));
        }
    }
}

TEST(MinRecurrence, RationalTerms)
{
    // 1/(1 - T/2): halving sequence.
    std::vector<Rational> seq;
    Rational v = 1;
    for (int i = 0; i < 6; ++i) {
        seq.push_back(v);
        v /= 2;
    }
    const auto f = min_recurrence(seq);
    EXPECT_EQ(f.den(), (Poly{Rational(1), Rational(-1, 2)}));
}

TEST(DenominatorShape, Examples)
{
    const RationalFn a(Poly{Rational(1)}, Poly{Rational(1), Rational(0), Rational(-3)});
    const auto sa = denominator_shape(a, 3);
    EXPECT_TRUE(sa.complete());
    EXPECT_EQ(sa.factors, (std::vector<ShapeFactor>{{1, 2}}));

    const RationalFn b(Poly{Rational(1)}, Poly{Rational(1), Rational(-1)} * Poly{Rational(1), Rational(-9)});
    EXPECT_EQ(denominator_shape(b, 3).factors, (std::vector<ShapeFactor>{{0, 1}, {2, 1}}));

    const RationalFn c(Poly{Rational(1), Rational(-1)}, Poly{Rational(1), Rational(-3)} * Poly{Rational(1), Rational(-3)});
    EXPECT_EQ(denominator_shape(c, 3).factors, (std::vector<ShapeFactor>{{1, 1}, {1, 1}}));
}

TEST(DenominatorShape, BacktracksPastGreedyDeadEnd)
{
    // 1 - 9T^2 = (1 - 3T)(1 + 3T); the greedy first step leaves 1 + 3T.
    const RationalFn f(Poly{Rational(1)}, Poly{Rational(1), Rational(0), Rational(-9)});
    const auto s = denominator_shape(f, 3);
    EXPECT_TRUE(s.complete());
    EXPECT_EQ(s.factors, (std::vector<ShapeFactor>{{2, 2}}));
}

TEST(DenominatorShape, ProductIdentityAndFailure)
{
    const RationalFn f(Poly{Rational(1)}, Poly{Rational(1), Rational(-1)} * Poly{Rational(1), Rational(0), Rational(-5)}
                                              * Poly{Rational(1), Rational(-1, 5)});
    const auto s = denominator_shape(f, 5);
    ASSERT_TRUE(s.complete());
    Poly prod = s.residual;
    for (const auto &fa : s.factors) {
        prod = prod * detail::shape_factor_poly(fa, Rational(5));
    }
    EXPECT_EQ(prod, f.den());

    const RationalFn bad(Poly{Rational(1)}, Poly{Rational(1), Rational(1), Rational(1)});
    const auto sb = denominator_shape(bad, 3);
    EXPECT_FALSE(sb.complete());
    EXPECT_EQ(sb.to_json()["verdict"], "ShapeNotFound");
    EXPECT_THROW(denominator_shape(bad, 1), InvalidArgument);
}

TEST(DenominatorShape, ResidualScalarAndAlternatives)
{
    const RationalFn f(Poly{Rational(1, 2), Rational(1, 3)}, Poly{Rational(1), Rational(-3)});
    const auto s = denominator_shape(f, 3);
    EXPECT_EQ(s.residual_scalar, 6);
    ASSERT_EQ(s.alternatives.size(), 3U);
    EXPECT_EQ(s.alternatives[1].first, 18);
    EXPECT_EQ(s.alternatives[1].second, (Poly{Rational(9), Rational(6)}));
}

TEST(UniformityFit, SquareCoefficientAtFour)
{
    std::map<std::uint64_t, std::vector<Rational>> table;
    for (std::uint64_t p : {3, 5, 7, 11, 13}) {
        table[p] = {Rational(oracle::closed_form_x_squared(static_cast<std::int64_t>(p), 4))};
    }
    const auto fit = uniformity_fit(table, {4}, 2);
    EXPECT_EQ(fit.held_out, 13U);
    EXPECT_EQ(fit.polys[0], (Poly{Rational(0), Rational(0), Rational(1)}));
}

TEST(UniformityFit, ConstantAndAdversarial)
{
    std::map<std::uint64_t, std::vector<Rational>> ones{{3, {1}}, {5, {1}}, {7, {1}}, {11, {1}}};
    EXPECT_EQ(uniformity_fit(ones, {0}, 1).polys[0], Poly{Rational(1)});

    std::map<std::uint64_t, std::vector<Rational>> adv{{3, {3}}, {5, {5}}, {7, {7}}, {11, {10}}};
    try {
        uniformity_fit(adv, {1}, 2);
        FAIL() << "expected UniformityRejected";
    } catch (const UniformityRejected &e) {
        EXPECT_EQ(e.prime(), 11U);
        EXPECT_EQ(e.n(), 1);
    }
    EXPECT_THROW(uniformity_fit(ones, {0}, 3), InvalidArgument);
}

TEST(UniformityFit, SumOfSquaresIsNotUniformAcrossResidueClasses)
{
    using oracle::Poly;
    // p = 1 mod 4 only: counts are polynomial in q.
    std::map<std::uint64_t, std::vector<Rational>> good, mixed;
    for (std::int64_t p : {5, 13, 17}) {
        good[static_cast<std::uint64_t>(p)] = {Rational(oracle::zeros_mixed(Poly::x2_plus_y2, p, 1))};
    }
    EXPECT_EQ(uniformity_fit(good, {1}, 1).polys[0], (poincare::Poly{Rational(-1), Rational(2)}));
    for (std::int64_t p : {3, 5, 7}) {
        mixed[static_cast<std::uint64_t>(p)] = {Rational(oracle::zeros_mixed(Poly::x2_plus_y2, p, 1))};
    }
    EXPECT_THROW(uniformity_fit(mixed, {1}, 1), UniformityRejected);
}

TEST(ResiduePointCount, Examples)
{
    EXPECT_EQ(residue_point_count(parse("u:RF = u"), 5), 5U);
    EXPECT_EQ(residue_point_count(parse("u:RF * u = -1"), 5), 2U);
    EXPECT_EQ(residue_point_count(parse("u:RF * u = -1"), 7), 0U);
    EXPECT_EQ(residue_point_count(parse("E v:RF. u:RF = v * v"), 7), 4U);
    EXPECT_THROW(residue_point_count(parse("ac(x) = 0"), 3), SortError);
}

TEST(RationalFn, JsonRoundTrip)
{
    const RationalFn f(Poly{Rational(1), Rational(1)}, Poly{Rational(1), Rational(0), Rational(-3)});
    const auto j = f.to_json();
    EXPECT_EQ(j["num"], (nlohmann::json{"1", "1"}));
    EXPECT_EQ(j["den"], (nlohmann::json{"1", "0", "-3"}));
    EXPECT_EQ(RationalFn::from_json(j), f);
}
