#include <gtest/gtest.h>

#include <poincare/eval.hpp>

#include "corpus.hpp"

using namespace poincare;

namespace
{

AnalyticSymbol geometric_in_xi()
{
    // sum_i t^i xi^i
    AnalyticSymbol s;
    s.name = "G";
    s.arity = 1;
    s.t_precision = 8;
    for (int i = 0; i < 8; ++i) {
        s.coefficients.push_back({Monomial{{i}, 1}});
    }
    return s;
}

} // namespace

TEST(Eval, Examples)
{
    const auto s = FieldSpec::mixed(3, 3);
    Environment env;
    env.set("x", TruncElem(s, 4)).set_vg("n", 2);
    EXPECT_EQ(eval(parse("E y:VF. ord(x - y) >= n"), env, s), (EvalVerdict{true, true}));

    Environment e2;
    e2.set("x", TruncElem(s, 5));
    EXPECT_EQ(eval(parse("ord(x) >= 1"), e2, s), (EvalVerdict{false, true}));

    Environment e3;
    e3.set("x", TruncElem(s, 0));
    EXPECT_EQ(eval(parse("ord(x) = 5"), e3, s), (EvalVerdict{false, false}));
}

TEST(Eval, TopSemantics)
{
    const auto s = FieldSpec::mixed(3, 3);
    Environment env;
    env.set("x", TruncElem(s, 0));
    EXPECT_EQ(eval(parse("ord(x) >= 3"), env, s), (EvalVerdict{true, true}));
    EXPECT_EQ(eval(parse("ord(x) >= 4"), env, s), (EvalVerdict{true, false}));
    EXPECT_EQ(eval(parse("ord(x) <= 2"), env, s), (EvalVerdict{false, true}));
    EXPECT_EQ(eval(parse("ord(x) <= 3"), env, s), (EvalVerdict{false, false}));
    EXPECT_EQ(eval(parse("ord(x) = ord(x)"), env, s), (EvalVerdict{true, false}));
    EXPECT_EQ(eval(parse("ac(x) = 0"), env, s), (EvalVerdict{true, false}));
}

TEST(Eval, UnboundVariable)
{
    const auto s = FieldSpec::mixed(3, 2);
    EXPECT_THROW(eval(parse("ord(x) >= n"), Environment{}.set("x", TruncElem(s, 1)), s), UnboundVariable);
}

TEST(EvalStable, Examples)
{
    const auto s = FieldSpec::mixed(3, 3);
    Environment env;
    env.set("x", TruncElem(s, 5));
    EXPECT_EQ(eval_stable(parse("ord(x) >= 1"), env, s, 3), eval(parse("ord(x) >= 1"), env, s));

    Environment zero;
    zero.set("x", TruncElem(s, 0));
    EXPECT_THROW(eval_stable(parse("ord(x) = 5"), zero, s, 4), StabilizationFailure);

    Environment nine;
    nine.set("x", TruncElem(s, 9));
    EXPECT_EQ(eval_stable(parse("E n:VG. n >= 0 /\\ ord(x) = n"), nine, s, 3), (EvalVerdict{true, true}));
}

TEST(EvalAnalytic, Examples)
{
    const auto g = geometric_in_xi();
    const auto e = FieldSpec::equal(2, 3);
    const TruncElem one = TruncElem::from_integer(e, 1);
    EXPECT_EQ(eval_analytic(g, std::vector<TruncElem>{one}, e).to_string(), "1+t+t^2");

    AnalyticSymbol coord{"C", 1, 4, {{Monomial{{1}, 1}}}};
    const auto m = FieldSpec::mixed(5, 3);
    for (const auto &x : enumerate(m)) {
        EXPECT_EQ(eval_analytic(coord, std::vector<TruncElem>{x}, m), x);
    }

    // Oracle: 1 + 3 + 9 + ... reduced mod 9.
    AnalyticSymbol ones{"S", 1, 4, {{Monomial{{0}, 1}}, {Monomial{{0}, 1}}, {Monomial{{0}, 1}}, {Monomial{{0}, 1}}}};
    const auto m32 = FieldSpec::mixed(3, 2);
    EXPECT_EQ(eval_analytic(ones, std::vector<TruncElem>{TruncElem(m32, 7)}, m32).code(), (1U + 3U + 9U + 27U) % 9U);

    EXPECT_THROW(eval_analytic(g, std::vector<TruncElem>{TruncElem::zero(FieldSpec::mixed(3, 9))}, FieldSpec::mixed(3, 9)),
                 InsufficientTSeriesPrecision);
}

TEST(EvalAnalytic, CylinderAgrees)
{
    AnalyticSymbol f{"F", 2, 4, {{Monomial{{1, 1}, 1}, Monomial{{0, 2}, -1}}, {Monomial{{2, 0}, 3}}, {}, {Monomial{{0, 0}, 1}}}};
    const AnalyticSymbol fc = f.cylinder("Fc");
    for (const auto &spec : {FieldSpec::mixed(3, 2), FieldSpec::equal(3, 2)}) {
        for (const auto &a : enumerate(spec)) {
            for (const auto &b : enumerate(spec)) {
                for (const auto &c : enumerate(spec)) {
                    EXPECT_EQ(eval_analytic(f, std::vector<TruncElem>{a, b}, spec),
                              eval_analytic(fc, std::vector<TruncElem>{a, b, c}, spec));
                }
            }
        }
    }
}

TEST(EvalAnalytic, InFormulas)
{
    const SymbolTable table{{"G", geometric_in_xi()}};
    const auto s = FieldSpec::mixed(3, 3);
    // G(x) = 1/(1 - t x): so G(x) * (1 - 3x) = 1 modulo 27.
    Environment env;
    for (const auto &x : enumerate(s)) {
        env.set("x", x);
        const auto v = eval(parse("G(x) * (1 - 3 * x) = 1", table), env, s, table);
        EXPECT_TRUE(v.value);
    }
}

TEST(Eval, QuantifierDuality)
{
    for (const auto &src : corpus::stability_formulas()) {
        const Formula body = parse(src);
        for (const auto &v : free_vars(body)) {
            const Formula neg_ex = Formula::negation(Formula::exists(v, body));
            const Formula all_neg = Formula::forall(v, Formula::negation(body));
            const auto rest = free_vars(neg_ex);
            for (const auto &spec : {FieldSpec::mixed(2, 2), FieldSpec::mixed(3, 2)}) {
                Environment env;
                for (const auto &w : rest) {
                    if (w.sort == Sort::VF) {
                        env.set(w.name, TruncElem(spec, 1));
                    } else if (w.sort == Sort::RF) {
                        env.set_rf(w.name, 1);
                    } else {
                        env.set_vg(w.name, 1);
                    }
                }
                EXPECT_EQ(eval(neg_ex, env, spec), eval(all_neg, env, spec)) << src << " over " << v.name;
            }
        }
    }
}

// Stable verdicts survive raising the precision and the VG bound by one.
TEST(Eval, MonotoneStability)
{
    const auto &formulas = corpus::stability_formulas();
    ASSERT_EQ(formulas.size(), 50U);
    std::size_t stable_seen = 0;
    for (const auto &src : formulas) {
        const Formula f = parse(src);
        const auto fv = free_vars(f);
        const std::vector<Var> vars(fv.begin(), fv.end());
        const Evaluator ev(f, vars);
        for (std::uint64_t p : {2, 3}) {
            for (int n = 1; n <= 3; ++n) {
                for (auto cc : {CharCase::mixed, CharCase::equal}) {
                    const FieldSpec spec(cc, p, n);
                    const FieldSpec up = spec.with_precision(n + 1);
                    // Enumerate every assignment: VF over the truncation, RF over F_p, VG over [-1, n+1].
                    std::vector<std::int64_t> lo, hi;
                    for (const auto &v : vars) {
                        lo.push_back(v.sort == Sort::VG ? -1 : 0);
                        hi.push_back(v.sort == Sort::VF   ? static_cast<std::int64_t>(spec.size()) - 1
                                     : v.sort == Sort::RF ? static_cast<std::int64_t>(p) - 1
                                                          : n + 1);
                    }
                    std::vector<std::int64_t> cur = lo;
                    while (true) {
                        const auto a = ev(cur, spec, n);
                        if (a.stable) {
                            ++stable_seen;
                            const auto b = ev(cur, up, n + 1);
                            EXPECT_EQ(a.value, b.value) << src << " at " << spec;
                        }
                        std::size_t k = 0;
                        while (k < cur.size() && cur[k] == hi[k]) {
                            cur[k] = lo[k];
                            ++k;
                        }
                        if (k == cur.size()) {
                            break;
                        }
                        ++cur[k];
                    }
                }
            }
        }
    }
    EXPECT_GT(stable_seen, 1000U);
}
