#ifndef POINCARE_LOCALFIELD_HPP
#define POINCARE_LOCALFIELD_HPP

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <poincare/errors.hpp>

namespace poincare
{

// Truncated valuation rings O_K / m^N for K = Q_p (mixed characteristic,
// modelled as Z/p^N) and K = F_p((t)) (equal characteristic, modelled as
// F_p[t]/t^N).
//
// Both cases share one canonical code: an integer in [0, p^N) whose base-p
// digits are the p-adic digits (mixed) resp. the t-coefficients (equal).
// So ord is the number of trailing zero digits, ac is the first nonzero
// digit, reduction mod m^N' is "code mod p^N'", and enumeration in
// ascending code order is the same in both cases.

enum class CharCase { mixed, equal };

inline std::string to_string(CharCase c)
{
    return c == CharCase::mixed ? "mixed" : "equal";
}

inline CharCase char_case_from_string(const std::string &s)
{
    if (s == "mixed") {
        return CharCase::mixed;
    }
    if (s == "equal") {
        return CharCase::equal;
    }
    throw InvalidArgument("unknown characteristic case '" + s + "' (expected mixed or equal)");
}

inline bool is_prime(std::uint64_t n)
{
    if (n < 2) {
        return false;
    }
    for (std::uint64_t d = 2; d * d <= n; ++d) {
        if (n % d == 0) {
            return false;
        }
    }
    return true;
}

inline constexpr std::uint64_t enumeration_budget = 100'000'000;

class FieldSpec
{
public:
    FieldSpec(CharCase c, std::uint64_t p, int precision) : case_(c), p_(p), n_(precision)
    {
        if (!is_prime(p)) {
            throw InvalidFieldSpec("p = " + std::to_string(p) + " is not prime");
        }
        if (precision < 1) {
            throw InvalidPrecision("precision must be >= 1, got " + std::to_string(precision));
        }
        // Products of two representatives must fit in 128 bits.
        unsigned __int128 m = 1;
        for (int i = 0; i < precision; ++i) {
            m *= p;
            if (m > (static_cast<unsigned __int128>(1) << 62U)) {
                throw InvalidPrecision("p^N exceeds the 2^62 arithmetic range");
            }
        }
        modulus_ = static_cast<std::uint64_t>(m);
    }

    static FieldSpec mixed(std::uint64_t p, int precision)
    {
        return {CharCase::mixed, p, precision};
    }
    static FieldSpec equal(std::uint64_t p, int precision)
    {
        return {CharCase::equal, p, precision};
    }

    CharCase char_case() const noexcept
    {
        return case_;
    }
    std::uint64_t p() const noexcept
    {
        return p_;
    }
    int precision() const noexcept
    {
        return n_;
    }
    // p^N, the number of elements of the truncation.
    std::uint64_t size() const noexcept
    {
        return modulus_;
    }

    FieldSpec with_precision(int precision) const
    {
        return {case_, p_, precision};
    }

    friend bool operator==(const FieldSpec &, const FieldSpec &) = default;

    friend std::ostream &operator<<(std::ostream &os, const FieldSpec &s)
    {
        return os << (s.case_ == CharCase::mixed ? "Z/" : "F_") << s.p_
                  << (s.case_ == CharCase::mixed ? "^" : "[t]/t^") << s.n_;
    }

private:
    CharCase case_;
    std::uint64_t p_;
    int n_;
    std::uint64_t modulus_ = 1;
};

// Value of ord at finite precision: either an exact k < N, or top, meaning
// "divisible by m^N", which this precision cannot tell apart from zero.
class ValuationValue
{
public:
    static ValuationValue finite(int k)
    {
        return ValuationValue(k);
    }
    static ValuationValue top()
    {
        return ValuationValue(std::nullopt);
    }

    bool is_top() const noexcept
    {
        return !k_.has_value();
    }
    int value() const
    {
        if (!k_) {
            throw InvalidArgument("value() of a top valuation");
        }
        return *k_;
    }

    friend bool operator==(const ValuationValue &, const ValuationValue &) = default;
    friend std::strong_ordering operator<=>(const ValuationValue &a, const ValuationValue &b)
    {
        if (a.is_top() || b.is_top()) {
            return static_cast<int>(a.is_top()) <=> static_cast<int>(b.is_top());
        }
        return *a.k_ <=> *b.k_;
    }

    friend std::ostream &operator<<(std::ostream &os, const ValuationValue &v)
    {
        return v.is_top() ? os << "top" : os << *v.k_;
    }

private:
    explicit ValuationValue(std::optional<int> k) : k_(k) {}
    std::optional<int> k_;
};

class TruncElem
{
public:
    // Code must already be canonical (< spec.size()).
    TruncElem(const FieldSpec &spec, std::uint64_t code) : spec_(spec), code_(code)
    {
        if (code >= spec.size()) {
            throw InvalidArgument("code " + std::to_string(code) + " out of range for this truncation");
        }
    }

    static TruncElem zero(const FieldSpec &spec)
    {
        return {spec, 0};
    }

    // Image of an integer: n mod p^N in the mixed case, (n mod p) * 1 in the
    // equal case, where the prime field sits inside F_p[[t]] as constants.
    static TruncElem from_integer(const FieldSpec &spec, long long n)
    {
        const std::uint64_t m = spec.char_case() == CharCase::mixed ? spec.size() : spec.p();
        auto r = static_cast<long long>(n % static_cast<long long>(m));
        if (r < 0) {
            r += static_cast<long long>(m);
        }
        return {spec, static_cast<std::uint64_t>(r)};
    }

    // Sum of digits[i] * uniformizer^i, reduced into the truncation.
    static TruncElem from_digits(const FieldSpec &spec, const std::vector<long long> &digits)
    {
        TruncElem acc = zero(spec);
        TruncElem unit = from_integer(spec, 1);
        const TruncElem pi = uniformizer(spec);
        for (long long d : digits) {
            acc = acc + from_integer(spec, d) * unit;
            unit = unit * pi;
        }
        return acc;
    }

    // p in the mixed case, t in the equal case; both have code p.
    static TruncElem uniformizer(const FieldSpec &spec)
    {
        return {spec, spec.precision() >= 2 ? spec.p() : 0};
    }

    const FieldSpec &spec() const noexcept
    {
        return spec_;
    }
    std::uint64_t code() const noexcept
    {
        return code_;
    }

    std::vector<std::uint64_t> digits() const
    {
        std::vector<std::uint64_t> d(static_cast<std::size_t>(spec_.precision()));
        std::uint64_t c = code_;
        for (auto &x : d) {
            x = c % spec_.p();
            c /= spec_.p();
        }
        return d;
    }

    friend TruncElem operator+(const TruncElem &a, const TruncElem &b)
    {
        check(a, b);
        if (a.spec_.char_case() == CharCase::mixed) {
            return {a.spec_, static_cast<std::uint64_t>((static_cast<unsigned __int128>(a.code_) + b.code_) % a.spec_.size())};
        }
        return digitwise(a, b, [p = a.spec_.p()](std::uint64_t x, std::uint64_t y) { return (x + y) % p; });
    }

    friend TruncElem operator-(const TruncElem &a, const TruncElem &b)
    {
        check(a, b);
        if (a.spec_.char_case() == CharCase::mixed) {
            const std::uint64_t m = a.spec_.size();
            return {a.spec_, a.code_ >= b.code_ ? a.code_ - b.code_ : m - (b.code_ - a.code_)};
        }
        return digitwise(a, b, [p = a.spec_.p()](std::uint64_t x, std::uint64_t y) { return (x + p - y) % p; });
    }

    TruncElem operator-() const
    {
        return zero(spec_) - *this;
    }

    friend TruncElem operator*(const TruncElem &a, const TruncElem &b)
    {
        check(a, b);
        if (a.spec_.char_case() == CharCase::mixed) {
            return {a.spec_, static_cast<std::uint64_t>((static_cast<unsigned __int128>(a.code_) * b.code_) % a.spec_.size())};
        }
        const auto n = static_cast<std::size_t>(a.spec_.precision());
        const std::uint64_t p = a.spec_.p();
        const auto da = a.digits(), db = b.digits();
        std::vector<std::uint64_t> dc(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (da[i] == 0) {
                continue;
            }
            for (std::size_t j = 0; i + j < n; ++j) {
                dc[i + j] = (dc[i + j] + da[i] * db[j]) % p;
            }
        }
        return from_digit_vector(a.spec_, dc);
    }

    TruncElem &operator+=(const TruncElem &o)
    {
        return *this = *this + o;
    }
    TruncElem &operator*=(const TruncElem &o)
    {
        return *this = *this * o;
    }

    friend bool operator==(const TruncElem &, const TruncElem &) = default;

    ValuationValue ord() const
    {
        if (code_ == 0) {
            return ValuationValue::top();
        }
        int k = 0;
        std::uint64_t c = code_;
        while (c % spec_.p() == 0) {
            c /= spec_.p();
            ++k;
        }
        return ValuationValue::finite(k);
    }

    // Angular component: residue of x / uniformizer^ord(x); ac(0) = 0.
    std::uint64_t ac() const
    {
        std::uint64_t c = code_;
        if (c == 0) {
            return 0;
        }
        while (c % spec_.p() == 0) {
            c /= spec_.p();
        }
        return c % spec_.p();
    }

    std::uint64_t residue() const noexcept
    {
        return code_ % spec_.p();
    }

    TruncElem reduce_precision(int precision) const
    {
        if (precision < 1 || precision > spec_.precision()) {
            throw InvalidPrecision("cannot reduce from precision " + std::to_string(spec_.precision()) + " to "
                                   + std::to_string(precision));
        }
        const FieldSpec target = spec_.with_precision(precision);
        return {target, code_ % target.size()};
    }

    // The representative with the same digits at a higher precision.
    TruncElem lift(int precision) const
    {
        if (precision < spec_.precision()) {
            throw InvalidPrecision("lift target below current precision");
        }
        return {spec_.with_precision(precision), code_};
    }

    std::string to_string() const
    {
        if (spec_.char_case() == CharCase::mixed) {
            return std::to_string(code_);
        }
        const auto d = digits();
        std::string out;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d[i] == 0) {
                continue;
            }
            if (!out.empty()) {
                out += '+';
            }
            if (i == 0 || d[i] != 1) {
                out += std::to_string(d[i]);
            }
            if (i >= 1) {
                out += 't';
            }
            if (i >= 2) {
                out += '^' + std::to_string(i);
            }
        }
        return out.empty() ? "0" : out;
    }

    friend std::ostream &operator<<(std::ostream &os, const TruncElem &e)
    {
        return os << e.to_string();
    }

private:
    static void check(const TruncElem &a, const TruncElem &b)
    {
        if (!(a.spec_ == b.spec_)) {
            throw SpecMismatch("operands live in different truncations");
        }
    }

    template <typename Op>
    static TruncElem digitwise(const TruncElem &a, const TruncElem &b, Op op)
    {
        const std::uint64_t p = a.spec_.p();
        std::uint64_t x = a.code_, y = b.code_, out = 0, place = 1;
        for (int i = 0; i < a.spec_.precision(); ++i) {
            out += op(x % p, y % p) * place;
            x /= p;
            y /= p;
            place *= p;
        }
        return {a.spec_, out};
    }

    static TruncElem from_digit_vector(const FieldSpec &spec, const std::vector<std::uint64_t> &d)
    {
        std::uint64_t out = 0;
        for (auto it = d.rbegin(); it != d.rend(); ++it) {
            out = out * spec.p() + *it;
        }
        return {spec, out};
    }

    FieldSpec spec_;
    std::uint64_t code_;
};

// All p^N elements in ascending canonical order.
inline std::vector<TruncElem> enumerate(const FieldSpec &spec)
{
    if (spec.size() > enumeration_budget) {
        throw EnumerationBudgetExceeded("p^N = " + std::to_string(spec.size()) + " exceeds the enumeration budget");
    }
    std::vector<TruncElem> out;
    out.reserve(spec.size());
    for (std::uint64_t c = 0; c < spec.size(); ++c) {
        out.emplace_back(spec, c);
    }
    return out;
}

// p^(N*m), guarded against the enumeration budget.
inline std::uint64_t tuple_count(const FieldSpec &spec, int arity)
{
    unsigned __int128 total = 1;
    for (int i = 0; i < arity; ++i) {
        total *= spec.size();
        if (total > enumeration_budget) {
            throw EnumerationBudgetExceeded("p^(N*m) exceeds the enumeration budget");
        }
    }
    return static_cast<std::uint64_t>(total);
}

} // namespace poincare

#endif
