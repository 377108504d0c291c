#include <gtest/gtest.h>

#include <poincare/localfield.hpp>

using namespace poincare;

namespace
{

std::vector<FieldSpec> small_specs()
{
    std::vector<FieldSpec> out;
    for (std::uint64_t p : {2, 3}) {
        for (int n = 1; n <= 3; ++n) {
            out.push_back(FieldSpec::mixed(p, n));
            out.push_back(FieldSpec::equal(p, n));
        }
    }
    return out;
}

// Independent model of F_p[t]/t^N: coefficient vectors, schoolbook product.
std::vector<std::uint64_t> poly_mul(const std::vector<std::uint64_t> &a, const std::vector<std::uint64_t> &b,
                                    std::uint64_t p)
{
    std::vector<std::uint64_t> c(a.size(), 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; i + j < a.size(); ++j) {
            c[i + j] = (c[i + j] + a[i] * b[j]) % p;
        }
    }
    return c;
}

} // namespace

TEST(FieldSpec, RejectsCompositeAndBadPrecision)
{
    EXPECT_THROW(FieldSpec::mixed(4, 2), InvalidFieldSpec);
    EXPECT_THROW(FieldSpec::mixed(1, 2), InvalidFieldSpec);
    EXPECT_THROW(FieldSpec::equal(3, 0), InvalidPrecision);
    EXPECT_NO_THROW(FieldSpec::equal(101, 3));
}

TEST(RingOps, MixedExamples)
{
    const auto s = FieldSpec::mixed(3, 2);
    EXPECT_EQ((TruncElem(s, 7) + TruncElem(s, 5)).code(), 3U);
    for (std::uint64_t a = 0; a < 9; ++a) {
        EXPECT_EQ(TruncElem::zero(s) + TruncElem(s, a), TruncElem(s, a));
    }
}

TEST(RingOps, EqualCharacteristicSquare)
{
    const auto s = FieldSpec::equal(2, 3);
    const auto one_plus_t = TruncElem::from_digits(s, {1, 1});
    const auto sq = one_plus_t * one_plus_t;
    EXPECT_EQ(sq, TruncElem::from_digits(s, {1, 0, 1}));
    EXPECT_EQ(sq.to_string(), "1+t^2");
}

TEST(RingOps, SpecMismatch)
{
    EXPECT_THROW(TruncElem(FieldSpec::mixed(3, 2), 1) + TruncElem(FieldSpec::mixed(3, 3), 1), SpecMismatch);
    EXPECT_THROW(TruncElem(FieldSpec::mixed(3, 2), 1) * TruncElem(FieldSpec::equal(3, 2), 1), SpecMismatch);
}

TEST(RingOps, AgreeWithIndependentModels)
{
    for (const auto &s : small_specs()) {
        const auto m = s.size();
        for (std::uint64_t a = 0; a < m; ++a) {
            for (std::uint64_t b = 0; b < m; ++b) {
                const TruncElem x(s, a), y(s, b);
                if (s.char_case() == CharCase::mixed) {
                    EXPECT_EQ((x + y).code(), (a + b) % m);
                    EXPECT_EQ((x * y).code(), (a * b) % m);
                    EXPECT_EQ((x - y).code(), (a + m - b) % m);
                } else {
                    const auto da = x.digits(), db = y.digits();
                    std::vector<std::uint64_t> sum(da.size());
                    for (std::size_t i = 0; i < da.size(); ++i) {
                        sum[i] = (da[i] + db[i]) % s.p();
                    }
                    EXPECT_EQ((x + y).digits(), sum);
                    EXPECT_EQ((x * y).digits(), poly_mul(da, db, s.p()));
                    EXPECT_EQ(((x - y) + y), x);
                }
            }
        }
    }
}

TEST(Ord, Examples)
{
    const auto s = FieldSpec::mixed(3, 3);
    EXPECT_EQ(TruncElem(s, 6).ord(), ValuationValue::finite(1));
    EXPECT_EQ(TruncElem(s, 1).ord(), ValuationValue::finite(0));
    EXPECT_TRUE(TruncElem(s, 0).ord().is_top());
    EXPECT_LT(ValuationValue::finite(100), ValuationValue::top());
    EXPECT_LT(ValuationValue::finite(1), ValuationValue::finite(2));
}

TEST(Ac, Examples)
{
    EXPECT_EQ(TruncElem(FieldSpec::mixed(3, 3), 6).ac(), 2U);
    for (const auto &s : small_specs()) {
        EXPECT_EQ(TruncElem::zero(s).ac(), 0U);
    }
    EXPECT_EQ(TruncElem::from_digits(FieldSpec::equal(5, 3), {0, 0, 3}).ac(), 3U);
}

TEST(Enumerate, OrderAndSize)
{
    std::vector<std::string> seen;
    for (const auto &e : enumerate(FieldSpec::mixed(2, 2))) {
        seen.push_back(e.to_string());
    }
    EXPECT_EQ(seen, (std::vector<std::string>{"0", "1", "2", "3"}));
    EXPECT_EQ(enumerate(FieldSpec::mixed(3, 1)).size(), 3U);
    seen.clear();
    for (const auto &e : enumerate(FieldSpec::equal(2, 2))) {
        seen.push_back(e.to_string());
    }
    EXPECT_EQ(seen, (std::vector<std::string>{"0", "1", "t", "1+t"}));
    EXPECT_THROW(enumerate(FieldSpec::mixed(2, 40)), EnumerationBudgetExceeded);
}

TEST(ReducePrecision, Examples)
{
    EXPECT_EQ(TruncElem(FieldSpec::mixed(3, 2), 7).reduce_precision(1).code(), 1U);
    const TruncElem a(FieldSpec::mixed(3, 2), 7);
    EXPECT_EQ(a.reduce_precision(2), a);
    const auto e = TruncElem::from_digits(FieldSpec::equal(2, 3), {1, 1, 1});
    EXPECT_EQ(e.reduce_precision(2).to_string(), "1+t");
    EXPECT_THROW(a.reduce_precision(0), InvalidPrecision);
    EXPECT_THROW(a.reduce_precision(3), InvalidPrecision);
}

TEST(ReducePrecision, IsRingHomomorphism)
{
    for (const auto &s : small_specs()) {
        for (int n2 = 1; n2 <= s.precision(); ++n2) {
            for (const auto &x : enumerate(s)) {
                for (const auto &y : enumerate(s)) {
                    EXPECT_EQ((x * y).reduce_precision(n2), x.reduce_precision(n2) * y.reduce_precision(n2));
                    EXPECT_EQ((x + y).reduce_precision(n2), x.reduce_precision(n2) + y.reduce_precision(n2));
                }
            }
        }
    }
}

TEST(Multiplicativity, OrdAndAcExhaustive)
{
    for (const auto &s : small_specs()) {
        for (const auto &x : enumerate(s)) {
            for (const auto &y : enumerate(s)) {
                const auto ox = x.ord(), oy = y.ord();
                if (ox.is_top() || oy.is_top() || ox.value() + oy.value() >= s.precision()) {
                    continue;
                }
                EXPECT_EQ((x * y).ord(), ValuationValue::finite(ox.value() + oy.value()));
                EXPECT_EQ((x * y).ac(), (x.ac() * y.ac()) % s.p());
            }
        }
    }
}

TEST(Ac, UnitsReduceToResidue)
{
    for (const auto &s : small_specs()) {
        for (const auto &x : enumerate(s)) {
            if (x.ord() == ValuationValue::finite(0)) {
                EXPECT_EQ(x.ac(), x.residue());
            }
        }
    }
}

TEST(BothCases, SameOrdAcInterfaceOnCodes)
{
    // The canonical codes double as digit vectors, so ord and ac coincide
    // code-by-code across the two characteristic cases.
    for (std::uint64_t p : {2, 3, 5}) {
        for (int n = 1; n <= 2; ++n) {
            const auto m = FieldSpec::mixed(p, n), e = FieldSpec::equal(p, n);
            for (std::uint64_t c = 0; c < m.size(); ++c) {
                EXPECT_EQ(TruncElem(m, c).ord(), TruncElem(e, c).ord());
                EXPECT_EQ(TruncElem(m, c).ac(), TruncElem(e, c).ac());
                EXPECT_EQ(TruncElem(m, c).residue(), TruncElem(e, c).residue());
            }
        }
    }
}

TEST(Lift, KeepsDigits)
{
    const TruncElem a(FieldSpec::equal(3, 2), 5);
    EXPECT_EQ(a.lift(4).reduce_precision(2), a);
    EXPECT_THROW(a.lift(1), InvalidPrecision);
}
