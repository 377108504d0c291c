#ifndef POINCARE_MULTIBOX_HPP
#define POINCARE_MULTIBOX_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "equiv.hpp"
#include "errors.hpp"
#include "localfield.hpp"
#include "rational.hpp"

namespace poincare
{

namespace detail
{

inline std::uint64_t upow(std::uint64_t b, int e)
{
    std::uint64_t r = 1;
    for (int i = 0; i < e; ++i) {
        r *= b;
    }
    return r;
}

} // namespace detail

// A subset of (O/m^N)^n that is a union of boxes of level N0 <= N. It is
// stored at level N0: one flag per tuple of codes in [0, p^N0), first
// coordinate fastest, so cell index = sum c_i * side^i.
class FiniteSubset
{
public:
    FiniteSubset(const FieldSpec &spec, int arity, int level) : spec_(spec), n_(arity), level_(level)
    {
        if (arity < 1) {
            throw InvalidArgument("subset arity must be positive");
        }
        if (level < 0 || level > spec.precision()) {
            throw InvalidArgument("box level " + std::to_string(level) + " outside [0, " + std::to_string(spec.precision())
                                  + "]");
        }
        side_ = detail::upow(spec.p(), level);
        const FieldSpec lvl = spec.with_precision(std::max(level, 1));
        cells_ = level == 0 ? 1 : tuple_count(lvl, arity);
        bits_.assign(cells_, false);
    }

    // Points given as codes at the precision of spec; the set must be a union
    // of level boxes, otherwise it is rejected.
    static FiniteSubset from_points(const FieldSpec &spec, int arity, int level,
                                    const std::vector<std::vector<std::int64_t>> &points)
    {
        FiniteSubset out(spec, arity, level);
        std::map<std::uint64_t, std::uint64_t> hits;
        std::vector<std::vector<std::int64_t>> sorted = points;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        for (const auto &x : sorted) {
            if (static_cast<int>(x.size()) != arity) {
                throw InvalidArgument("point of wrong arity in subset");
            }
            for (auto c : x) {
                if (c < 0 || static_cast<std::uint64_t>(c) >= spec.size()) {
                    throw InvalidArgument("code " + std::to_string(c) + " outside the truncation");
                }
            }
            ++hits[out.index_of(x)];
        }
        const std::uint64_t full = detail::upow(detail::upow(spec.p(), spec.precision() - level), arity);
        for (const auto &[cell, count] : hits) {
            if (count != full) {
                throw InvalidArgument("point set is not a union of level-" + std::to_string(level) + " boxes");
            }
            out.bits_[cell] = true;
        }
        return out;
    }

    // Indices into PointSpace(spec, arity).
    static FiniteSubset from_indices(const FieldSpec &spec, int arity, int level, std::span<const std::uint64_t> idx)
    {
        const PointSpace space(spec, arity);
        std::vector<std::vector<std::int64_t>> pts;
        pts.reserve(idx.size());
        for (auto i : idx) {
            pts.push_back(space.decode(i));
        }
        return from_points(spec, arity, level, pts);
    }

    // Membership decided on one representative per level box.
    template <class Pred>
    static FiniteSubset from_predicate(const FieldSpec &spec, int arity, int level, Pred &&pred)
    {
        FiniteSubset out(spec, arity, level);
        for (std::uint64_t i = 0; i < out.cells_; ++i) {
            out.bits_[i] = static_cast<bool>(pred(std::span<const std::int64_t>(out.decode(i))));
        }
        return out;
    }

    const FieldSpec &spec() const noexcept
    {
        return spec_;
    }
    int arity() const noexcept
    {
        return n_;
    }
    int level() const noexcept
    {
        return level_;
    }
    std::uint64_t p() const noexcept
    {
        return spec_.p();
    }
    std::uint64_t side() const noexcept
    {
        return side_;
    }
    std::uint64_t cells() const noexcept
    {
        return cells_;
    }

    std::uint64_t index_of(std::span<const std::int64_t> x) const
    {
        std::uint64_t idx = 0;
        for (int i = n_ - 1; i >= 0; --i) {
            idx = idx * side_ + static_cast<std::uint64_t>(x[static_cast<std::size_t>(i)]) % side_;
        }
        return idx;
    }
    std::vector<std::int64_t> decode(std::uint64_t idx) const
    {
        std::vector<std::int64_t> out(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            out[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(idx % side_);
            idx /= side_;
        }
        return out;
    }

    bool test(std::uint64_t idx) const
    {
        return bits_[idx];
    }
    void set(std::uint64_t idx, bool v = true)
    {
        bits_[idx] = v;
    }
    // Codes at any precision >= level.
    bool contains(std::span<const std::int64_t> x) const
    {
        return static_cast<int>(x.size()) == n_ && bits_[index_of(x)];
    }

    std::uint64_t size() const
    {
        return static_cast<std::uint64_t>(std::count(bits_.begin(), bits_.end(), true));
    }
    bool empty() const
    {
        return std::find(bits_.begin(), bits_.end(), true) == bits_.end();
    }
    Rational volume() const
    {
        return Rational(size()) / Rational(cells_);
    }
    std::vector<std::vector<std::int64_t>> points() const
    {
        std::vector<std::vector<std::int64_t>> out;
        for (std::uint64_t i = 0; i < cells_; ++i) {
            if (bits_[i]) {
                out.push_back(decode(i));
            }
        }
        return out;
    }

    // Image under (x_1..x_n) -> (x_1..x_m).
    FiniteSubset project(int m) const
    {
        if (m < 1 || m > n_) {
            throw InvalidArgument("projection to " + std::to_string(m) + " coordinates out of range");
        }
        FiniteSubset out(spec_, m, level_);
        for (std::uint64_t i = 0; i < cells_; ++i) {
            if (bits_[i]) {
                out.bits_[i % out.cells_] = true;
            }
        }
        return out;
    }

    // {y : (prefix, y) in X}, of arity n - |prefix|.
    FiniteSubset fiber(std::span<const std::int64_t> prefix) const
    {
        const int k = static_cast<int>(prefix.size());
        if (k >= n_) {
            throw InvalidArgument("fiber prefix must be shorter than the arity");
        }
        std::uint64_t base = 0;
        std::uint64_t stride = 1;
        for (int i = k - 1; i >= 0; --i) {
            base = base * side_ + static_cast<std::uint64_t>(prefix[static_cast<std::size_t>(i)]) % side_;
        }
        for (int i = 0; i < k; ++i) {
            stride *= side_;
        }
        FiniteSubset out(spec_, n_ - k, level_);
        for (std::uint64_t j = 0; j < out.cells_; ++j) {
            out.bits_[j] = bits_[base + j * stride];
        }
        return out;
    }

    // Coordinates reordered: result coordinate i is input coordinate perm[i].
    FiniteSubset permuted(std::span<const int> perm) const
    {
        if (static_cast<int>(perm.size()) != n_) {
            throw InvalidArgument("permutation length differs from arity");
        }
        std::vector<int> check(perm.begin(), perm.end());
        std::sort(check.begin(), check.end());
        for (int i = 0; i < n_; ++i) {
            if (check[static_cast<std::size_t>(i)] != i) {
                throw InvalidArgument("not a permutation of 0.." + std::to_string(n_ - 1));
            }
        }
        FiniteSubset out(spec_, n_, level_);
        std::vector<std::int64_t> y(static_cast<std::size_t>(n_));
        for (std::uint64_t i = 0; i < cells_; ++i) {
            if (!bits_[i]) {
                continue;
            }
            const auto x = decode(i);
            for (int k = 0; k < n_; ++k) {
                y[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
            }
            out.bits_[out.index_of(y)] = true;
        }
        return out;
    }

    bool subset_of(const FiniteSubset &o) const
    {
        check_compatible(o);
        for (std::uint64_t i = 0; i < cells_; ++i) {
            if (bits_[i] && !o.bits_[i]) {
                return false;
            }
        }
        return true;
    }

    FiniteSubset &operator|=(const FiniteSubset &o)
    {
        check_compatible(o);
        for (std::uint64_t i = 0; i < cells_; ++i) {
            bits_[i] = bits_[i] || o.bits_[i];
        }
        return *this;
    }
    friend FiniteSubset operator|(FiniteSubset a, const FiniteSubset &b)
    {
        return a |= b;
    }

    friend bool operator==(const FiniteSubset &a, const FiniteSubset &b)
    {
        return a.spec_ == b.spec_ && a.n_ == b.n_ && a.level_ == b.level_ && a.bits_ == b.bits_;
    }

    nlohmann::json to_json() const
    {
        return {{"p", spec_.p()},
                {"case", spec_.char_case() == CharCase::mixed ? "mixed" : "equal"},
                {"precision", spec_.precision()},
                {"level", level_},
                {"arity", n_},
                {"boxes", size()},
                {"points", points()}};
    }

private:
    void check_compatible(const FiniteSubset &o) const
    {
        if (!(spec_ == o.spec_) || n_ != o.n_ || level_ != o.level_) {
            throw InvalidArgument("subsets live in different spaces");
        }
    }

    FieldSpec spec_;
    int n_;
    int level_;
    std::uint64_t side_ = 1;
    std::uint64_t cells_ = 1;
    std::vector<bool> bits_;
};

// Exponents r_i of the volumes q^-r_i. r_i equal to the box level is a
// singleton at precision: flagged, since the true set may have r_i = +inf.
struct Multivolume {
    std::vector<int> r;
    std::vector<bool> precision_limited;

    std::string to_string() const
    {
        std::string s = "(";
        for (std::size_t i = 0; i < r.size(); ++i) {
            s += (i ? "," : "") + std::to_string(r[i]) + (precision_limited[i] ? "*" : "");
        }
        return s + ")";
    }
    nlohmann::json to_json() const
    {
        return {{"exponents", r}, {"precision_limited", precision_limited}};
    }
    friend bool operator==(const Multivolume &a, const Multivolume &b)
    {
        return a.r == b.r;
    }
};

// Colex on volume tuples: the last differing coordinate decides, and the
// larger volume (smaller exponent) wins.
inline bool colex_greater(const Multivolume &a, const Multivolume &b)
{
    if (a.r.size() != b.r.size()) {
        throw InvalidArgument("multivolumes of different length");
    }
    for (std::size_t k = a.r.size(); k-- > 0;) {
        if (a.r[k] != b.r[k]) {
            return a.r[k] < b.r[k];
        }
    }
    return false;
}

namespace detail
{

// Per-class member counts of a one-dimensional subset, classes mod p^r.
inline std::vector<std::uint64_t> coset_counts(const FiniteSubset &s, int r)
{
    const std::uint64_t mod = upow(s.p(), r);
    std::vector<std::uint64_t> counts(mod, 0);
    for (std::uint64_t c = 0; c < s.side(); ++c) {
        if (s.test(c)) {
            ++counts[c % mod];
        }
    }
    return counts;
}

// Least r such that s contains a whole coset of m^r.
inline std::optional<int> max_ball_radius(const FiniteSubset &s)
{
    for (int r = 0; r <= s.level(); ++r) {
        const std::uint64_t full = s.side() / upow(s.p(), r);
        const auto counts = coset_counts(s, r);
        if (std::find(counts.begin(), counts.end(), full) != counts.end()) {
            return r;
        }
    }
    return std::nullopt;
}

// Union of the cosets of m^r contained in s.
inline std::vector<bool> interior(const FiniteSubset &s, int r)
{
    const std::uint64_t mod = upow(s.p(), r);
    const std::uint64_t full = s.side() / mod;
    const auto counts = coset_counts(s, r);
    std::vector<bool> out(s.side(), false);
    for (std::uint64_t c = 0; c < s.side(); ++c) {
        out[c] = counts[c % mod] == full;
    }
    return out;
}

} // namespace detail

// Y is a multiball iff its projection is one and every fiber over the
// projection is a ball of one common radius.
inline std::optional<Multivolume> is_multiball(const FiniteSubset &y)
{
    if (y.empty()) {
        throw InvalidArgument("is_multiball needs a nonempty set");
    }
    const auto one_dim = [](const FiniteSubset &s) -> std::optional<int> {
        const std::uint64_t n = s.size();
        for (int r = 0; r <= s.level(); ++r) {
            if (s.side() / detail::upow(s.p(), r) == n) {
                const auto counts = detail::coset_counts(s, r);
                return std::find(counts.begin(), counts.end(), n) != counts.end() ? std::optional<int>(r)
                                                                                   : std::nullopt;
            }
        }
        return std::nullopt;
    };
    if (y.arity() == 1) {
        const auto r = one_dim(y);
        if (!r) {
            return std::nullopt;
        }
        return Multivolume{{*r}, {*r == y.level()}};
    }
    const FiniteSubset a = y.project(y.arity() - 1);
    auto head = is_multiball(a);
    if (!head) {
        return std::nullopt;
    }
    std::optional<int> common;
    for (std::uint64_t i = 0; i < a.cells(); ++i) {
        if (!a.test(i)) {
            continue;
        }
        const auto r = one_dim(y.fiber(a.decode(i)));
        if (!r || (common && *common != *r)) {
            return std::nullopt;
        }
        common = r;
    }
    head->r.push_back(*common);
    head->precision_limited.push_back(*common == y.level());
    return head;
}

struct MultiboxReport {
    FiniteSubset mb;
    Multivolume multivol;

    nlohmann::json to_json() const
    {
        return {{"multivolume", multivol.to_json()}, {"multibox", mb.to_json()}};
    }
};

// The last exponent is the least radius of a ball inside any fiber; the
// prefixes whose fiber holds such a ball form a set whose multibox gives the
// remaining exponents. MB(X) is that multibox with the r_n-interior of each
// fiber on top.
inline MultiboxReport multibox(const FiniteSubset &x)
{
    if (x.empty()) {
        throw InvalidArgument("multibox of the empty set");
    }
    if (x.arity() == 1) {
        const int r = *detail::max_ball_radius(x);
        FiniteSubset mb(x.spec(), 1, x.level());
        const auto in = detail::interior(x, r);
        for (std::uint64_t c = 0; c < x.side(); ++c) {
            mb.set(c, in[c]);
        }
        return {mb, {{r}, {r == x.level()}}};
    }
    const int n = x.arity();
    const FiniteSubset proj = x.project(n - 1);
    std::vector<std::optional<int>> radius(proj.cells());
    int best = x.level();
    for (std::uint64_t i = 0; i < proj.cells(); ++i) {
        if (proj.test(i)) {
            radius[i] = detail::max_ball_radius(x.fiber(proj.decode(i)));
            best = std::min(best, *radius[i]);
        }
    }
    FiniteSubset carriers(x.spec(), n - 1, x.level());
    for (std::uint64_t i = 0; i < proj.cells(); ++i) {
        carriers.set(i, radius[i] && *radius[i] == best);
    }
    MultiboxReport head = multibox(carriers);
    FiniteSubset mb(x.spec(), n, x.level());
    const std::uint64_t stride = proj.cells();
    for (std::uint64_t i = 0; i < proj.cells(); ++i) {
        if (!head.mb.test(i)) {
            continue;
        }
        const auto in = detail::interior(x.fiber(proj.decode(i)), best);
        for (std::uint64_t c = 0; c < x.side(); ++c) {
            if (in[c]) {
                mb.set(i + c * stride);
            }
        }
    }
    head.multivol.r.push_back(best);
    head.multivol.precision_limited.push_back(best == x.level());
    return {mb, head.multivol};
}

namespace detail
{

// X(x, m): the fiber of the projection of MB(X) to m coordinates over x_{<m}.
inline FiniteSubset multibox_fiber(const MultiboxReport &rep, std::span<const std::int64_t> x, int m)
{
    if (m < 1 || m > rep.mb.arity()) {
        throw InvalidArgument("coordinate index m = " + std::to_string(m) + " out of range");
    }
    if (!rep.mb.contains(x)) {
        throw PointNotInMultibox("point is not in the multibox");
    }
    const FiniteSubset xm = rep.mb.project(m);
    return m == 1 ? xm : xm.fiber(x.first(static_cast<std::size_t>(m - 1)));
}

} // namespace detail

// Number of maximal-volume balls inside X(x, m).
inline std::uint64_t multinumber(const MultiboxReport &rep, std::span<const std::int64_t> x, int m)
{
    const FiniteSubset f = detail::multibox_fiber(rep, x, m);
    const int r = *detail::max_ball_radius(f);
    const std::uint64_t full = f.side() / detail::upow(f.p(), r);
    const auto counts = detail::coset_counts(f, r);
    return static_cast<std::uint64_t>(std::count(counts.begin(), counts.end(), full));
}

namespace detail
{

// Multinumber of a one-dimensional fiber.
inline std::uint64_t upper_count(const FiniteSubset &f, int m)
{
    if (*max_ball_radius(f) == f.level() && f.level() > 0) {
        // Isolated points at this precision: the qualifying balls may be finer still.
        throw PrecisionInconclusive("fiber over coordinate " + std::to_string(m)
                                    + " consists of singletons at precision " + std::to_string(f.level()));
    }
    for (int r = f.level() - 1; r >= 0; --r) {
        const std::uint64_t full = f.side() / upow(f.p(), r);
        const auto counts = coset_counts(f, r);
        const auto partial = std::count_if(counts.begin(), counts.end(), [&](auto c) { return c > 0 && c < full; });
        if (partial > 0) {
            return static_cast<std::uint64_t>(partial);
        }
    }
    return 0;
}

} // namespace detail

// Number of balls of the least volume that meet X(x, m) without lying in it;
// 0 when every meeting ball is contained (the fiber is all of O).
inline std::uint64_t multinumber_upper(const MultiboxReport &rep, std::span<const std::int64_t> x, int m)
{
    return detail::upper_count(detail::multibox_fiber(rep, x, m), m);
}

inline std::uint64_t multinumber(const FiniteSubset &x, std::span<const std::int64_t> pt, int m)
{
    return multinumber(multibox(x), pt, m);
}
inline std::uint64_t multinumber_upper(const FiniteSubset &x, std::span<const std::int64_t> pt, int m)
{
    return multinumber_upper(multibox(x), pt, m);
}

// prod_m Multinumber_m(X, x), a zero factor (fiber equal to O) counted as 1.
inline std::uint64_t multinumber_product(const MultiboxReport &rep, std::span<const std::int64_t> x)
{
    std::uint64_t prod = 1;
    for (int m = 1; m <= rep.mb.arity(); ++m) {
        prod *= std::max<std::uint64_t>(1, multinumber_upper(rep, x, m));
    }
    return prod;
}

struct BoundRow {
    std::uint64_t p = 0;
    long long n = 0;
    std::uint64_t classes = 0;
    std::uint64_t max_product = 0;
};

struct BoundScan {
    std::vector<BoundRow> rows;
    std::uint64_t q = 0; // the empirical bound: the largest product seen
    bool growth_warning = false;

    // Q constant in p: for each n, every prime reports the same maximum.
    bool constant_in_p() const
    {
        std::map<long long, std::uint64_t> first;
        for (const auto &row : rows) {
            const auto [it, fresh] = first.emplace(row.n, row.max_product);
            if (!fresh && it->second != row.max_product) {
                return false;
            }
        }
        return true;
    }

    nlohmann::json to_json() const
    {
        nlohmann::json table = nlohmann::json::array();
        for (const auto &r : rows) {
            table.push_back({{"prime", r.p}, {"n", r.n}, {"classes", r.classes}, {"max_product", r.max_product}});
        }
        return {{"rows", table}, {"Q", q}, {"constant_in_p", constant_in_p()}, {"growth_warning", growth_warning}};
    }
};

// Classes are taken at precision n + 1 + extra_precision, each as a union of
// boxes at that full precision.
inline BoundScan bound_scan(const RelationSpec &rel, CharCase cc, std::vector<std::uint64_t> primes,
                            const std::vector<long long> &ns, int extra_precision = 0)
{
    std::sort(primes.begin(), primes.end());
    BoundScan out;
    for (std::uint64_t p : primes) {
        for (long long n : ns) {
            const FieldSpec spec(cc, p, static_cast<int>(std::max(0LL, n)) + 1 + extra_precision);
            BoundRow row{p, n, 0, 0};
            const auto classes = partition_classes(rel, spec, n);
            row.classes = classes.size();
            for (const auto &cls : classes) {
                const auto rep = multibox(FiniteSubset::from_indices(spec, rel.arity(), spec.precision(), cls));
                for (const auto &pt : rep.mb.points()) {
                    row.max_product = std::max(row.max_product, multinumber_product(rep, pt));
                }
            }
            out.q = std::max(out.q, row.max_product);
            out.rows.push_back(row);
        }
    }
    // Growth across primes at fixed n argues against a uniform bound.
    for (long long n : ns) {
        std::vector<std::uint64_t> seq;
        for (const auto &r : out.rows) {
            if (r.n == n) {
                seq.push_back(r.max_product);
            }
        }
        if (seq.size() >= 2 && std::adjacent_find(seq.begin(), seq.end(), std::greater_equal<>()) == seq.end()) {
            out.growth_warning = true;
        }
    }
    return out;
}

} // namespace poincare

#endif
