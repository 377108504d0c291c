#ifndef POINCARE_EQUIV_HPP
#define POINCARE_EQUIV_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include <poincare/analytic.hpp>
#include <poincare/errors.hpp>
#include <poincare/eval.hpp>
#include <poincare/formula.hpp>
#include <poincare/localfield.hpp>

namespace poincare
{

inline constexpr std::uint64_t default_seed = 0x5eedULL;

// A parametrised relation phi(x, y, n) on the definable set domain(x, n).
// x and y are VF tuples of the same arity; n is a VG parameter.
struct RelationSpec {
    Formula phi = Formula::eq(Term::constant(0, Sort::VG), Term::constant(0, Sort::VG));
    Formula domain = phi;
    std::vector<std::string> x;
    std::vector<std::string> y;
    std::string param = "n";
    SymbolTable symbols;
    std::optional<int> vg_bound; // VG quantifier range; unset means the precision

    int arity() const noexcept
    {
        return static_cast<int>(x.size());
    }

    void validate() const
    {
        if (x.empty() || x.size() != y.size()) {
            throw InvalidArgument("relation needs x and y tuples of equal, positive arity");
        }
        VarSet allowed;
        for (const auto &v : x) {
            allowed.insert({v, Sort::VF});
        }
        VarSet allowed_domain = allowed;
        for (const auto &v : y) {
            allowed.insert({v, Sort::VF});
        }
        allowed.insert({param, Sort::VG});
        allowed_domain.insert({param, Sort::VG});
        for (const auto &v : free_vars(phi)) {
            if (allowed.count(v) == 0) {
                throw InvalidArgument("relation formula has stray free variable " + v.name + ":" + to_string(v.sort));
            }
        }
        for (const auto &v : free_vars(domain)) {
            if (allowed_domain.count(v) == 0) {
                throw InvalidArgument("domain formula has stray free variable " + v.name + ":" + to_string(v.sort));
            }
        }
    }

    static RelationSpec from_json(const nlohmann::json &j, const SymbolTable &symbols = {})
    {
        try {
            if (j.contains("congruence")) {
                // Shorthand: the congruence relation attached to a polynomial in x1..xm.
                return congruence(j.at("congruence").get<std::string>(), j.at("arity").get<int>(), symbols);
            }
            RelationSpec r;
            r.symbols = symbols;
            r.phi = parse(j.at("phi").get<std::string>(), symbols);
            r.domain = parse(j.value("domain", std::string("0 = 0")), symbols);
            r.x = j.at("x").get<std::vector<std::string>>();
            r.y = j.at("y").get<std::vector<std::string>>();
            r.param = j.value("param", std::string("n"));
            r.validate();
            return r;
        } catch (const nlohmann::json::exception &e) {
            throw InvalidArgument(std::string("malformed relation document: ") + e.what());
        }
    }

    nlohmann::json to_json() const
    {
        return {{"phi", phi.to_string()}, {"domain", domain.to_string()}, {"x", x}, {"y", y}, {"param", param}};
    }

    // min(ord x_i - y_i) >= n on all of O^m.
    static RelationSpec ball(int m)
    {
        RelationSpec r;
        std::string phi;
        for (int i = 1; i <= m; ++i) {
            r.x.push_back("x" + std::to_string(i));
            r.y.push_back("y" + std::to_string(i));
            phi += (i > 1 ? " /\\ " : "") + std::string("ord(x") + std::to_string(i) + " - y" + std::to_string(i)
                   + ") >= n";
        }
        r.phi = parse(phi);
        r.domain = parse("0 = 0");
        r.validate();
        return r;
    }

    // Points with ord f(x) >= n, related when they agree modulo m^n.
    static RelationSpec congruence(const std::string &poly, int m, const SymbolTable &symbols = {})
    {
        RelationSpec r;
        r.symbols = symbols;
        std::string close;
        for (int i = 1; i <= m; ++i) {
            r.x.push_back("x" + std::to_string(i));
            r.y.push_back("y" + std::to_string(i));
            close += " /\\ ord(x" + std::to_string(i) + " - y" + std::to_string(i) + ") >= n";
        }
        const std::string dom = "ord(" + poly + ") >= n";
        r.domain = parse(dom, symbols);
        r.phi = parse(dom + close, symbols);
        r.validate();
        return r;
    }
};

inline RelationSpec load_relation(const std::string &path, const SymbolTable &symbols = {})
{
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open relation file '" + path + "'");
    }
    try {
        return RelationSpec::from_json(nlohmann::json::parse(in), symbols);
    } catch (const nlohmann::json::parse_error &e) {
        throw InvalidArgument("relation file '" + path + "' is not valid JSON: " + e.what());
    }
}

// Points of (O/m^N)^m are indexed in mixed radix, first coordinate fastest.
class PointSpace
{
public:
    PointSpace(const FieldSpec &spec, int arity) : spec_(spec), m_(arity), count_(tuple_count(spec, arity)) {}

    std::uint64_t count() const noexcept
    {
        return count_;
    }
    int arity() const noexcept
    {
        return m_;
    }
    const FieldSpec &spec() const noexcept
    {
        return spec_;
    }
    void decode(std::uint64_t index, std::span<std::int64_t> out) const
    {
        for (int i = 0; i < m_; ++i) {
            out[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(index % spec_.size());
            index /= spec_.size();
        }
    }
    std::vector<std::int64_t> decode(std::uint64_t index) const
    {
        std::vector<std::int64_t> out(static_cast<std::size_t>(m_));
        decode(index, out);
        return out;
    }

private:
    FieldSpec spec_;
    int m_;
    std::uint64_t count_;
};

// The relation compiled once; membership tests then cost one slot fill.
class CompiledRelation
{
public:
    explicit CompiledRelation(const RelationSpec &rel)
        : m_(rel.arity()), vg_bound_(rel.vg_bound), phi_(rel.phi, inputs(rel, true), rel.symbols),
          dom_(rel.domain, inputs(rel, false), rel.symbols)
    {
    }

    int arity() const noexcept
    {
        return m_;
    }

    EvalVerdict in_domain(std::span<const std::int64_t> x, const FieldSpec &spec, long long z) const
    {
        std::vector<std::int64_t> v(x.begin(), x.end());
        v.push_back(z);
        return dom_(v, spec, vg_bound_.value_or(spec.precision()));
    }

    EvalVerdict related(std::span<const std::int64_t> x, std::span<const std::int64_t> y, const FieldSpec &spec,
                        long long z) const
    {
        std::vector<std::int64_t> v(x.begin(), x.end());
        v.insert(v.end(), y.begin(), y.end());
        v.push_back(z);
        return phi_(v, spec, vg_bound_.value_or(spec.precision()));
    }

    bool in_domain_checked(std::span<const std::int64_t> x, const FieldSpec &spec, long long z) const
    {
        const auto v = in_domain(x, spec, z);
        if (!v.stable) {
            throw UnstableRelation("domain membership undecided at precision " + std::to_string(spec.precision()));
        }
        return v.value;
    }
    bool related_checked(std::span<const std::int64_t> x, std::span<const std::int64_t> y, const FieldSpec &spec,
                         long long z) const
    {
        const auto v = related(x, y, spec, z);
        if (!v.stable) {
            throw UnstableRelation("relation verdict undecided at precision " + std::to_string(spec.precision()));
        }
        return v.value;
    }

private:
    static std::vector<Var> inputs(const RelationSpec &rel, bool with_y)
    {
        rel.validate();
        std::vector<Var> out;
        for (const auto &n : rel.x) {
            out.push_back({n, Sort::VF});
        }
        if (with_y) {
            for (const auto &n : rel.y) {
                out.push_back({n, Sort::VF});
            }
        }
        out.push_back({rel.param, Sort::VG});
        return out;
    }

    int m_;
    std::optional<int> vg_bound_;
    Evaluator phi_;
    Evaluator dom_;
};

class UnionFind
{
public:
    explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0), components_(n)
    {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }
    std::size_t find(std::size_t a)
    {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }
    bool unite(std::size_t a, std::size_t b)
    {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        if (rank_[a] < rank_[b]) {
            std::swap(a, b);
        }
        parent_[b] = a;
        if (rank_[a] == rank_[b]) {
            ++rank_[a];
        }
        --components_;
        return true;
    }
    std::size_t components() const noexcept
    {
        return components_;
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<unsigned char> rank_;
    std::size_t components_;
};

namespace detail
{

inline std::vector<std::uint64_t> domain_points(const CompiledRelation &rel, const PointSpace &space, long long z)
{
    std::vector<std::uint64_t> out;
    std::vector<std::int64_t> x(static_cast<std::size_t>(space.arity()));
    for (std::uint64_t i = 0; i < space.count(); ++i) {
        space.decode(i, x);
        if (rel.in_domain_checked(x, space.spec(), z)) {
            out.push_back(i);
        }
    }
    return out;
}

// Codes reduced modulo m^k, coordinate-wise.
inline std::vector<std::int64_t> truncate_codes(std::span<const std::int64_t> x, std::uint64_t p, int k)
{
    std::uint64_t mod = 1;
    for (int i = 0; i < k; ++i) {
        mod *= p;
    }
    std::vector<std::int64_t> out;
    for (auto c : x) {
        out.push_back(static_cast<std::int64_t>(static_cast<std::uint64_t>(c) % mod));
    }
    return out;
}

} // namespace detail

struct Counterexample {
    std::string axiom; // reflexivity, symmetry or transitivity
    std::vector<std::vector<std::int64_t>> points;
};

struct EquivalenceReport {
    std::optional<Counterexample> counterexample;
    bool exhaustive = true;
    std::uint64_t seed = default_seed;
    std::uint64_t domain_size = 0;

    bool ok() const noexcept
    {
        return !counterexample.has_value();
    }
};

inline constexpr std::uint64_t exhaustive_axiom_threshold = 1000;
inline constexpr int sampled_triples = 10000;

inline EquivalenceReport check_equivalence(const RelationSpec &rel, const FieldSpec &spec, long long z,
                                           std::uint64_t seed = default_seed)
{
    const CompiledRelation cr(rel);
    const PointSpace space(spec, rel.arity());
    EquivalenceReport report;
    report.seed = seed;
    const auto dom = detail::domain_points(cr, space, z);
    report.domain_size = dom.size();

    // Reflexivity, exhaustively. A tainted false still fails: x - x is 0
    // exactly, so no precision rescues it.
    for (auto i : dom) {
        const auto x = space.decode(i);
        const auto v = cr.related(x, x, spec, z);
        if (!v.value) {
            report.counterexample = Counterexample{"reflexivity", {x}};
            return report;
        }
        if (!v.stable) {
            throw UnstableRelation("reflexivity undecided at precision " + std::to_string(spec.precision()));
        }
    }

    if (dom.size() <= exhaustive_axiom_threshold) {
        const std::size_t d = dom.size();
        const std::size_t words = (d + 63) / 64;
        std::vector<std::vector<std::uint64_t>> rows(d, std::vector<std::uint64_t>(words, 0));
        std::vector<std::vector<std::int64_t>> pts;
        for (auto i : dom) {
            pts.push_back(space.decode(i));
        }
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                if (cr.related_checked(pts[i], pts[j], spec, z)) {
                    rows[i][j / 64] |= 1ULL << (j % 64);
                }
            }
        }
        const auto bit = [&](std::size_t i, std::size_t j) { return (rows[i][j / 64] >> (j % 64)) & 1ULL; };
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                if (bit(i, j) != bit(j, i)) {
                    report.counterexample = Counterexample{"symmetry", bit(i, j) ? std::vector{pts[i], pts[j]}
                                                                                  : std::vector{pts[j], pts[i]}};
                    return report;
                }
            }
        }
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                if (bit(i, j) == 0) {
                    continue;
                }
                // x~y requires row(y) to be inside row(x).
                for (std::size_t w = 0; w < words; ++w) {
                    const std::uint64_t missing = rows[j][w] & ~rows[i][w];
                    if (missing != 0) {
                        const std::size_t k = w * 64 + static_cast<std::size_t>(__builtin_ctzll(missing));
                        report.counterexample = Counterexample{"transitivity", {pts[i], pts[j], pts[k]}};
                        return report;
                    }
                }
            }
        }
        return report;
    }

    // Sampled: triples are drawn near each other (random digit perturbations
    // at a random level) so related pairs actually occur.
    report.exhaustive = false;
    std::mt19937_64 rng(seed);
    const auto draw = [&](std::uint64_t range) { return range == 0 ? 0 : rng() % range; };
    const auto perturb = [&](const std::vector<std::int64_t> &x) {
        const int level = static_cast<int>(draw(static_cast<std::uint64_t>(spec.precision()) + 1));
        auto out = detail::truncate_codes(x, spec.p(), level);
        std::uint64_t unit = 1;
        for (int i = 0; i < level; ++i) {
            unit *= spec.p();
        }
        for (auto &c : out) {
            c += static_cast<std::int64_t>(unit * draw(spec.size() / unit));
        }
        return out;
    };
    for (int t = 0; t < sampled_triples; ++t) {
        const auto x = space.decode(dom[draw(dom.size())]);
        const auto y = perturb(x);
        const auto zz = perturb(y);
        if (!cr.in_domain_checked(y, spec, z) || !cr.in_domain_checked(zz, spec, z)) {
            continue;
        }
        const bool xy = cr.related_checked(x, y, spec, z);
        const bool yx = cr.related_checked(y, x, spec, z);
        if (xy != yx) {
            report.counterexample = Counterexample{"symmetry", xy ? std::vector{x, y} : std::vector{y, x}};
            return report;
        }
        if (xy && cr.related_checked(y, zz, spec, z) && !cr.related_checked(x, zz, spec, z)) {
            report.counterexample = Counterexample{"transitivity", {x, y, zz}};
            return report;
        }
    }
    return report;
}

inline constexpr std::uint64_t exhaustive_invariance_threshold = 1000000;

namespace detail
{

inline std::optional<std::uint64_t> tuple_count_or_none(const FieldSpec &spec, int arity)
{
    try {
        return tuple_count(spec, arity);
    } catch (const EnumerationBudgetExceeded &) {
        return std::nullopt;
    }
}

} // namespace detail
inline constexpr int sampled_invariance_points = 10000;

// Least N0 < N such that the domain is a union of N0-boxes and every domain
// point is related to its whole N0-box (observed at precision N).
inline int invariance_level(const RelationSpec &rel, const FieldSpec &spec, long long z,
                            std::uint64_t seed = default_seed)
{
    const CompiledRelation cr(rel);
    const auto total = detail::tuple_count_or_none(spec, rel.arity());
    std::vector<std::vector<std::int64_t>> probe;
    if (total && *total <= exhaustive_invariance_threshold) {
        const PointSpace space(spec, rel.arity());
        for (std::uint64_t i = 0; i < space.count(); ++i) {
            probe.push_back(space.decode(i));
        }
    } else {
        // Coordinates are drawn independently, so the tuple space itself may exceed the budget.
        std::mt19937_64 rng(seed);
        for (int i = 0; i < sampled_invariance_points; ++i) {
            std::vector<std::int64_t> x(static_cast<std::size_t>(rel.arity()));
            for (auto &c : x) {
                c = static_cast<std::int64_t>(rng() % spec.size());
            }
            probe.push_back(std::move(x));
        }
    }
    const auto holds = [&](int k) {
        for (const auto &x : probe) {
            const auto r = detail::truncate_codes(x, spec.p(), k);
            const bool dx = cr.in_domain_checked(x, spec, z);
            if (dx != cr.in_domain_checked(r, spec, z)) {
                return false;
            }
            if (dx && !cr.related_checked(r, x, spec, z)) {
                return false;
            }
        }
        return true;
    };
    int lo = 0, hi = spec.precision();
    while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (holds(mid)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if (lo >= spec.precision()) {
        throw NotInvariant("relation is not box-invariant below precision " + std::to_string(spec.precision()));
    }
    return lo;
}

enum class CountPath { automatic, points, boxes };

struct ClassCount {
    long long z = 0;
    std::uint64_t count = 0;
    int precision_used = 0;
    int invariance_level = -1;
    bool stable = false;
    std::string path;
    std::optional<std::string> error; // per-entry marker in series output
};

inline constexpr std::uint64_t point_pair_threshold = 1000000;
inline constexpr std::uint64_t box_pair_budget = 20'000'000'000ULL;

namespace detail
{

inline std::uint64_t components_over(const CompiledRelation &cr, const std::vector<std::vector<std::int64_t>> &pts,
                                     const FieldSpec &spec, long long z)
{
    UnionFind uf(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            if (uf.find(i) == uf.find(j)) {
                continue;
            }
            if (cr.related_checked(pts[i], pts[j], spec, z)) {
                uf.unite(i, j);
            }
        }
    }
    return uf.components();
}

} // namespace detail

inline ClassCount count_classes(const RelationSpec &rel, const FieldSpec &spec, long long z,
                                CountPath path = CountPath::automatic, std::uint64_t seed = default_seed)
{
    const CompiledRelation cr(rel);
    ClassCount out;
    out.z = z;
    out.precision_used = spec.precision();
    out.stable = true;

    std::optional<std::vector<std::uint64_t>> dom;
    if (path != CountPath::boxes) {
        const auto total = detail::tuple_count_or_none(spec, rel.arity());
        if ((total && *total <= exhaustive_invariance_threshold) || path == CountPath::points) {
            dom = detail::domain_points(cr, PointSpace(spec, rel.arity()), z);
        }
        const bool small = dom && static_cast<double>(dom->size()) * static_cast<double>(dom->size()) / 2.0
                                      <= static_cast<double>(point_pair_threshold);
        if (path == CountPath::points || small) {
            const PointSpace space(spec, rel.arity());
            std::vector<std::vector<std::int64_t>> pts;
            for (auto i : *dom) {
                pts.push_back(space.decode(i));
            }
            out.count = detail::components_over(cr, pts, spec, z);
            out.path = "points";
            return out;
        }
    }

    out.invariance_level = invariance_level(rel, spec, z, seed);
    const PointSpace boxes(spec.with_precision(std::max(out.invariance_level, 1)), rel.arity());
    std::vector<std::vector<std::int64_t>> reps;
    if (out.invariance_level == 0) {
        const std::vector<std::int64_t> zero(static_cast<std::size_t>(rel.arity()), 0);
        if (cr.in_domain_checked(zero, spec, z)) {
            reps.push_back(zero);
        }
    } else {
        std::vector<std::int64_t> x(static_cast<std::size_t>(rel.arity()));
        for (std::uint64_t i = 0; i < boxes.count(); ++i) {
            boxes.decode(i, x);
            if (cr.in_domain_checked(x, spec, z)) {
                reps.push_back(x);
            }
        }
    }
    if (static_cast<double>(reps.size()) * static_cast<double>(reps.size()) / 2.0 > static_cast<double>(box_pair_budget)) {
        throw EnumerationBudgetExceeded(std::to_string(reps.size()) + " domain boxes are too many to pair up");
    }
    out.count = detail::components_over(cr, reps, spec, z);
    out.path = "boxes";
    return out;
}

// Explicit classes as PointSpace indices, ordered by their least point.
// Each new point is tested against one representative per class, which is
// sound only for a verified equivalence relation.
inline std::vector<std::vector<std::uint64_t>> partition_classes(const RelationSpec &rel, const FieldSpec &spec, long long z)
{
    const CompiledRelation cr(rel);
    const PointSpace space(spec, rel.arity());
    std::vector<std::vector<std::uint64_t>> classes;
    std::vector<std::vector<std::int64_t>> reps;
    std::vector<std::int64_t> x(static_cast<std::size_t>(rel.arity()));
    for (std::uint64_t i = 0; i < space.count(); ++i) {
        space.decode(i, x);
        if (!cr.in_domain_checked(x, spec, z)) {
            continue;
        }
        std::size_t k = 0;
        while (k < reps.size() && !cr.related_checked(reps[k], x, spec, z)) {
            ++k;
        }
        if (k == reps.size()) {
            reps.push_back(x);
            classes.emplace_back();
        }
        classes[k].push_back(i);
    }
    return classes;
}

struct SeriesOptions {
    std::optional<int> fixed_precision; // unset: auto from n+1 up to n+4
    int max_extra = 3;
    bool extra_class = false; // count points outside the domain as one more class
    CountPath path = CountPath::automatic;
    std::uint64_t seed = default_seed;
};

namespace detail
{

inline bool domain_is_everything(const RelationSpec &rel, const FieldSpec &spec, long long z)
{
    const CompiledRelation cr(rel);
    const PointSpace space(spec, rel.arity());
    std::vector<std::int64_t> x(static_cast<std::size_t>(rel.arity()));
    for (std::uint64_t i = 0; i < space.count(); ++i) {
        space.decode(i, x);
        if (!cr.in_domain_checked(x, spec, z)) {
            return false;
        }
    }
    return true;
}

} // namespace detail

// a_n for each n: counted at N and N+1, stable when they agree, escalating N.
inline std::vector<ClassCount> series_coeffs(const RelationSpec &rel, CharCase cc, std::uint64_t p,
                                             const std::vector<long long> &ns, const SeriesOptions &opt = {})
{
    std::vector<ClassCount> out;
    for (long long n : ns) {
        const int start = opt.fixed_precision.value_or(static_cast<int>(std::max(0LL, n)) + 1);
        const int last = opt.fixed_precision ? start : start + opt.max_extra - 1;
        ClassCount entry;
        entry.z = n;
        std::vector<std::uint64_t> seen;
        bool not_invariant = false;
        std::string last_error;
        for (int big_n = start; big_n <= last; ++big_n) {
            try {
                const FieldSpec s1(cc, p, big_n), s2(cc, p, big_n + 1);
                ClassCount a = count_classes(rel, s1, n, opt.path, opt.seed);
                ClassCount b = count_classes(rel, s2, n, opt.path, opt.seed);
                seen.push_back(a.count);
                seen.push_back(b.count);
                if (a.count == b.count) {
                    entry = a;
                    entry.stable = true;
                    if (opt.extra_class && !detail::domain_is_everything(rel, s1, n)) {
                        ++entry.count;
                    }
                    break;
                }
                entry = a;
                entry.stable = false;
            } catch (const NotInvariant &e) {
                not_invariant = true;
                last_error = e.kind();
                // Small spaces still get raw point counts, so growth shows up as divergence.
                const FieldSpec s1(cc, p, big_n), s2(cc, p, big_n + 1);
                if (tuple_count(s2, rel.arity()) <= 10000) {
                    seen.push_back(count_classes(rel, s1, n, CountPath::points).count);
                    seen.push_back(count_classes(rel, s2, n, CountPath::points).count);
                }
            } catch (const UnstableRelation &e) {
                last_error = e.kind();
            } catch (const EnumerationBudgetExceeded &e) {
                last_error = e.kind();
                break;
            }
        }
        if (!entry.stable) {
            const bool growing = seen.size() >= 2 && std::is_sorted(seen.begin(), seen.end()) && seen.front() < seen.back();
            if (growing) {
                entry.error = "Divergent";
            } else if (!last_error.empty()) {
                entry.error = last_error;
            } else if (not_invariant) {
                entry.error = "NotInvariant";
            } else {
                entry.error = "Unstable";
            }
            entry.z = n;
        }
        out.push_back(entry);
    }
    return out;
}

} // namespace poincare

#endif
