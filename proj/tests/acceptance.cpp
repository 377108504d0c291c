// One line per acceptance criterion; exit status 0 only when all pass.
#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <poincare/motivic.hpp>
#include <poincare/series.hpp>

#include "corpus.hpp"
#include "motivic_corpus.hpp"
#include "multibox_oracle.hpp"
#include "oracles.hpp"

using namespace poincare;

namespace
{

// Pinned limits.
constexpr double seconds_per_prime_single = 30.0;
constexpr double seconds_two_variable = 300.0;
const Rational tail_tolerance(1, 1000000000000LL);
constexpr int fuzz_inputs = 100000;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects failures; the first few are kept for the report line.
struct Check {
    int failures = 0;
    std::ostringstream first;

    void require(bool ok, const std::string &what)
    {
        if (!ok) {
            if (failures < 3) {
                first << (failures > 0 ? "; " : "") << what;
            }
            ++failures;
        }
    }
};

std::vector<long long> upto(long long n)
{
    std::vector<long long> out;
    for (long long i = 0; i <= n; ++i) {
        out.push_back(i);
    }
    return out;
}

std::vector<Rational> counts_of(const std::vector<ClassCount> &row)
{
    std::vector<Rational> out;
    for (const auto &c : row) {
        out.emplace_back(static_cast<long long>(c.count));
    }
    return out;
}

bool stable(const std::vector<ClassCount> &row)
{
    for (const auto &c : row) {
        if (!c.stable || c.error) {
            return false;
        }
    }
    return true;
}

std::string criterion_1(Check &c)
{
    const auto rel = RelationSpec::congruence("x1 * x1", 1);
    double worst = 0;
    for (std::uint64_t p : {3, 5, 7}) {
        const auto t0 = Clock::now();
        for (auto cc : {CharCase::mixed, CharCase::equal}) {
            const std::string at = "p=" + std::to_string(p) + " " + to_string(cc);
            const auto row = series_coeffs(rel, cc, p, upto(6));
            c.require(stable(row), at + " unstable");
            for (const auto &e : row) {
                c.require(e.count == static_cast<std::uint64_t>(oracle::ipow(static_cast<std::int64_t>(p), static_cast<int>(e.z / 2))),
                          at + " a_" + std::to_string(e.z) + " = " + std::to_string(e.count));
            }
            const auto f = min_recurrence(counts_of(row));
            c.require(f.num() == Poly{Rational(1), Rational(1)} && f.den() == Poly{Rational(1), Rational(0), Rational(-static_cast<long long>(p))},
                      at + " fit " + f.to_string());
            const auto s = denominator_shape(f, static_cast<long long>(p));
            c.require(s.complete() && s.factors == std::vector<ShapeFactor>{{1, 2}}, at + " shape");
        }
        const double secs = since(t0);
        worst = std::max(worst, secs);
        c.require(secs < seconds_per_prime_single, "p=" + std::to_string(p) + " took " + std::to_string(secs) + " s");
    }
    return "x^2, p in {3,5,7}, n=0..6, both cases: a_n = p^floor(n/2), (1+T)/(1-pT^2), shape [(1,2)]; slowest prime "
           + std::to_string(worst) + " s";
}

std::string criterion_2(Check &c)
{
    const std::int64_t p = 3;
    for (int n = 0; n <= 3; ++n) {
        c.require(oracle::zeros_mixed(oracle::Poly::x_times_y, p, n) == oracle::closed_form_x_times_y(p, n),
                  "closed form disagrees with exhaustive count at n=" + std::to_string(n));
    }
    const auto t0 = Clock::now();
    const auto row = series_coeffs(RelationSpec::congruence("x1 * x2", 2), CharCase::mixed, 3, upto(5));
    const double secs = since(t0);
    c.require(stable(row), "unstable");
    for (const auto &e : row) {
        c.require(static_cast<std::int64_t>(e.count) == oracle::closed_form_x_times_y(p, static_cast<int>(e.z)),
                  "a_" + std::to_string(e.z) + " = " + std::to_string(e.count));
    }
    const auto f = min_recurrence(counts_of(row));
    const auto s = denominator_shape(f, 3);
    c.require(s.complete() && s.factors == std::vector<ShapeFactor>{{1, 1}, {1, 1}}, "shape of " + f.to_string());
    c.require(secs < seconds_two_variable, "took " + std::to_string(secs) + " s");
    return "x*y, p=3, n=0..5: counts match (n+1)p^n - n p^(n-1) (oracle confirmed exhaustively at n<=3), shape "
           "[(1,1),(1,1)]; " + std::to_string(secs) + " s";
}

std::string criterion_3(Check &c)
{
    const std::vector<std::pair<std::string, int>> fs = {{"x1", 1}, {"x1 * x1", 1}, {"x1 * x2", 2}};
    int rows = 0;
    for (const auto &[f, m] : fs) {
        const auto rel = RelationSpec::congruence(f, m);
        for (std::uint64_t p : {3, 5}) {
            const auto a = series_coeffs(rel, CharCase::mixed, p, upto(4));
            const auto b = series_coeffs(rel, CharCase::equal, p, upto(4));
            c.require(stable(a) && stable(b), f + " unstable at p=" + std::to_string(p));
            for (std::size_t i = 0; i < a.size(); ++i) {
                c.require(a[i].count == b[i].count, f + " differs at p=" + std::to_string(p) + " n=" + std::to_string(i));
                ++rows;
            }
        }
    }
    return "compare-fields on x, x^2, x*y, p in {3,5}, n<=4: " + std::to_string(rows) + " rows identical across Q_p and F_p((t))";
}

std::string criterion_4(Check &c)
{
    int classes = 0;
    const std::vector<std::pair<std::string, RelationSpec>> rels = {{"ball", RelationSpec::ball(1)},
                                                                   {"x^2", RelationSpec::congruence("x1 * x1", 1)}};
    for (const auto &[name, rel] : rels) {
        for (std::uint64_t p : {3, 5}) {
            for (long long n = 0; n <= 3; ++n) {
                const std::string at = name + " p=" + std::to_string(p) + " n=" + std::to_string(n);
                const FieldSpec spec = FieldSpec::mixed(p, static_cast<int>(n) + 1);
                const auto masses = class_mass_check(rel, spec, n);
                for (const auto &cls : masses.classes) {
                    c.require(cls.integral == 1, at + " class integral " + to_string(cls.integral));
                    ++classes;
                }
                const auto civ = count_via_integral(rel, spec, n);
                c.require(civ.match(), at + " integral " + to_string(civ.integral) + " vs " + std::to_string(civ.count));
            }
        }
    }
    return "class-mass identity for the ball and x^2 relations, n<=3, p in {3,5}: " + std::to_string(classes)
           + " class integrals equal 1, count_via_integral = count_classes";
}

std::string criterion_5(Check &c)
{
    const auto rel = RelationSpec::congruence("x1 * x1", 1);
    const auto ns = upto(5);
    std::map<std::uint64_t, std::vector<Rational>> table;
    for (std::uint64_t p : {3, 5, 7, 11}) {
        table[p] = counts_of(series_coeffs(rel, CharCase::mixed, p, ns));
    }
    try {
        const auto fit = uniformity_fit(table, ns, 2);
        c.require(fit.held_out == 11, "held-out prime is " + std::to_string(fit.held_out));
        for (std::size_t i = 0; i < ns.size(); ++i) {
            c.require(fit.polys[i].degree() <= ns[i] / 2, "degree too high at n=" + std::to_string(ns[i]));
            for (const auto &coef : fit.polys[i].coeffs()) {
                c.require(denom(coef) == 1, "non-integer coefficient at n=" + std::to_string(ns[i]));
            }
        }
    } catch (const UniformityRejected &e) {
        c.require(false, e.what());
    }
    return "uniformity for x^2: train {3,5,7}, n=0..5, integer polynomials of degree <= floor(n/2), exact at p=11";
}

// Multibox checks against brute force for one set.
void multibox_against_oracle(Check &c, const FiniteSubset &x, const std::string &at)
{
    if (x.empty()) {
        return;
    }
    const auto report = multibox(x);
    const auto shapes = mbo::all_multiball_shapes(x);
    std::vector<int> best = shapes.front().r;
    for (const auto &s : shapes) {
        if (mbo::colex_vol_greater(s.r, best)) {
            best = s.r;
        }
    }
    c.require(report.multivol.r == best, at + " multivolume not colex-maximal");
    std::set<mbo::Pt> uni;
    for (const auto &s : shapes) {
        if (s.r == best) {
            uni.insert(s.pts.begin(), s.pts.end());
        }
    }
    c.require(mbo::as_set(report.mb) == uni, at + " multibox is not the union of maximal multiballs");
    const auto again = multibox(report.mb);
    c.require(again.mb == report.mb && again.multivol == report.multivol, at + " not idempotent");
}

std::string criterion_6(Check &c)
{
    // Every subset where there are at most 2^16 of them; seeded box unions elsewhere.
    constexpr std::uint64_t exhaustive_cells = 16;
    std::mt19937_64 rng(20240611);
    long long all_subsets = 0, sampled = 0;
    for (std::uint64_t p : {2, 3}) {
        for (int n = 1; n <= 2; ++n) {
            for (int N = 1; N <= 3; ++N) {
                const FieldSpec spec = FieldSpec::mixed(p, N);
                const std::uint64_t cells = mbo::ipow(mbo::ipow(p, N), n);
                const std::string at = "p=" + std::to_string(p) + " n=" + std::to_string(n) + " N=" + std::to_string(N);
                if (cells <= exhaustive_cells) {
                    for (std::uint64_t mask = 1; mask < (1ULL << cells); ++mask) {
                        std::vector<std::uint64_t> idx;
                        for (std::uint64_t i = 0; i < cells; ++i) {
                            if ((mask >> i) & 1U) {
                                idx.push_back(i);
                            }
                        }
                        multibox_against_oracle(c, FiniteSubset::from_indices(spec, n, N, idx), at);
                        ++all_subsets;
                    }
                } else {
                    for (int rep = 0; rep < 200; ++rep) {
                        multibox_against_oracle(c, mbo::random_box_union(rng, p, N, n), at);
                        ++sampled;
                    }
                }
            }
        }
    }
    for (std::uint64_t p : {2, 3}) {
        const auto x = mbo::make(p, 3, 2, [p](auto v) {
            return mbo::ball(v[0], 1, 2, p) || (mbo::ball(v[0], 0, 1, p) && mbo::ball(v[1], 0, 1, p));
        });
        c.require(multibox(x).mb.project(1) != multibox(x.project(1)).mb,
                  "no projection non-commutation at p=" + std::to_string(p));
    }
    const std::vector<std::pair<RelationSpec, std::vector<long long>>> scans = {
        {RelationSpec::ball(1), upto(2)},
        {RelationSpec::ball(2), upto(1)},
        {RelationSpec::congruence("x1 * x1", 1), upto(2)},
        {RelationSpec::congruence("x1 * x2", 2), upto(1)}};
    std::uint64_t q = 0;
    for (const auto &[rel, ns] : scans) {
        const auto scan = bound_scan(rel, CharCase::mixed, {3, 5, 7}, ns);
        c.require(scan.constant_in_p(), "bound_scan Q varies with p");
        q = std::max(q, scan.q);
    }
    return "multibox: colex-maximality and idempotence on " + std::to_string(all_subsets) + " exhaustive subsets and "
           + std::to_string(sampled) + " seeded box unions (p in {2,3}, arity<=2, N<=3), non-commutation witness at "
           "p=2,3; bound_scan Q=" + std::to_string(q) + " constant over p in {3,5,7}";
}

std::string criterion_7(Check &c)
{
    const auto all = corpus::integrands();
    c.require(all.size() == 20, "corpus has " + std::to_string(all.size()) + " instances");
    int exact = 0, certified = 0;
    for (const auto &g : all) {
        const auto sym = integrate_symbolic(g);
        for (std::uint64_t p : {3, 5, 7}) {
            for (auto cc : {CharCase::mixed, CharCase::equal}) {
                const Rational want = sym.theta(Rational(p));
                const auto got = integrate_specialized(g, cc, p);
                const std::string at = g.name + " p=" + std::to_string(p) + " " + to_string(cc);
                if (got.exact) {
                    c.require(got.lo == want, at + ": " + to_string(got.lo) + " vs " + to_string(want));
                    ++exact;
                } else {
                    c.require(got.contains(want) && got.hi - got.lo <= tail_tolerance * got.lo, at + " outside the tail bound");
                    ++certified;
                }
            }
        }
    }
    return "integrate-then-specialize = specialize-then-integrate on 20 integrands at p in {3,5,7}, both cases: "
           + std::to_string(exact) + " exact, " + std::to_string(certified) + " within a 1e-12 relative tail bound";
}

std::string criterion_8(Check &c)
{
    // ord/ac multiplicativity, exhaustive at p <= 3, N <= 3.
    long long pairs = 0;
    for (std::uint64_t p : {2, 3}) {
        for (int N = 1; N <= 3; ++N) {
            for (auto cc : {CharCase::mixed, CharCase::equal}) {
                const FieldSpec s(cc, p, N);
                for (const auto &x : enumerate(s)) {
                    for (const auto &y : enumerate(s)) {
                        const auto ox = x.ord(), oy = y.ord();
                        if (ox.is_top() || oy.is_top() || ox.value() + oy.value() >= N) {
                            c.require((x * y).ord().is_top(), "product beyond the precision is not zero");
                            continue;
                        }
                        c.require((x * y).ord() == ValuationValue::finite(ox.value() + oy.value()), "ord not additive");
                        c.require((x * y).ac() == (x.ac() * y.ac()) % p, "ac not multiplicative");
                        ++pairs;
                    }
                }
            }
        }
    }

    // Parser fuzz: token soup and mutated seeds; only ParseError or SortError may escape.
    std::mt19937_64 rng(0xf022);
    const std::vector<std::string> pieces = {"x", "y", "n", "u", "E", "A", ":", "VF", "RF", "VG", ".", "ord", "ac", "(",
                                             ")", ",", "+", "-", "*", "=", "<=", ">=", "<", "/\\", "\\/", "~", "->", "0",
                                             "1", "7", " ", "F", "$", "99999999999999999999", "((((", "G"};
    const auto &seeds = corpus::stability_formulas();
    int parsed = 0;
    for (int i = 0; i < fuzz_inputs; ++i) {
        std::string s;
        if (i % 2 == 0) {
            const auto len = rng() % 20;
            for (std::size_t k = 0; k < len; ++k) {
                s += pieces[rng() % pieces.size()];
            }
        } else {
            s = seeds[rng() % seeds.size()];
            const auto edits = 1 + rng() % 4;
            for (std::size_t k = 0; k < edits && !s.empty(); ++k) {
                const auto pos = rng() % s.size();
                switch (rng() % 3) {
                    case 0:
                        s.erase(pos, 1);
                        break;
                    case 1:
                        s.insert(pos, pieces[rng() % pieces.size()]);
                        break;
                    default:
                        s[pos] = static_cast<char>(rng() % 256);
                }
            }
        }
        try {
            const Formula f = parse(s);
            ++parsed;
            c.require(parse(f.to_string()).to_string() == f.to_string(), "printer round trip fails on " + s);
        } catch (const ParseError &) {
        } catch (const SortError &) {
        } catch (const std::exception &e) {
            c.require(false, std::string("unexpected exception ") + e.what() + " on " + s);
        }
    }

    // Monotone stability: a stable verdict survives one more digit of precision.
    long long stable_seen = 0;
    for (const auto &src : seeds) {
        const Formula f = parse(src);
        const auto fv = free_vars(f);
        const std::vector<Var> vars(fv.begin(), fv.end());
        const Evaluator ev(f, vars);
        for (std::uint64_t p : {2, 3}) {
            for (int n = 1; n <= 3; ++n) {
                for (auto cc : {CharCase::mixed, CharCase::equal}) {
                    const FieldSpec spec(cc, p, n);
                    const FieldSpec up = spec.with_precision(n + 1);
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
                            c.require(ev(cur, up, n + 1).value == a.value, "stable verdict flipped: " + src);
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

    // Seeded broken relations, one per axiom.
    const auto one_var = [](const std::string &phi, const std::string &dom = "0 = 0") {
        RelationSpec r;
        r.x = {"x1"};
        r.y = {"y1"};
        r.phi = parse(phi);
        r.domain = parse(dom);
        return r;
    };
    const auto spec = FieldSpec::mixed(3, 3);
    const std::vector<std::tuple<RelationSpec, long long, std::string>> broken = {
        {one_var("ord(x1 - y1) = n"), 1, "reflexivity"},
        {one_var("ord(x1 - y1) >= n \\/ ord(x1) < ord(y1)"), 2, "symmetry"},
        {one_var("ord(x1) <= ord(y1) + 1 /\\ ord(y1) <= ord(x1) + 1", "ord(x1) <= 2"), 0, "transitivity"}};
    int detected = 0;
    for (const auto &[rel, z, axiom] : broken) {
        const auto r = check_equivalence(rel, spec, z);
        const bool hit = !r.ok() && r.counterexample->axiom == axiom;
        c.require(hit, "missed broken " + axiom);
        detected += hit ? 1 : 0;
    }
    return "properties: ord/ac multiplicative on " + std::to_string(pairs) + " pairs; " + std::to_string(fuzz_inputs)
           + " fuzzed parser inputs (" + std::to_string(parsed) + " parsed) without crash; " + std::to_string(stable_seen)
           + " stable verdicts monotone; " + std::to_string(detected) + "/3 broken relations detected";
}

} // namespace

int main()
{
    const std::vector<std::function<std::string(Check &)>> criteria = {criterion_1, criterion_2, criterion_3,
                                                                       criterion_4, criterion_5, criterion_6,
                                                                       criterion_7, criterion_8};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        std::string summary;
        try {
            summary = criteria[i](c);
        } catch (const std::exception &e) {
            c.require(false, std::string("threw ") + e.what());
        }
        const bool ok = c.failures == 0;
        failed += ok ? 0 : 1;
        std::cout << (ok ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << summary;
        if (!ok) {
            std::cout << " [" << c.failures << " failures: " << c.first.str() << "]";
        }
        std::cout << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
