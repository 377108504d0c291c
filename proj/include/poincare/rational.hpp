#ifndef POINCARE_RATIONAL_HPP
#define POINCARE_RATIONAL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include <poincare/errors.hpp>

namespace poincare
{

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline BigInt numer(const Rational &r)
{
    return boost::multiprecision::numerator(r);
}

inline BigInt denom(const Rational &r)
{
    return boost::multiprecision::denominator(r);
}

// "num/den", or just "num" for integers. This is the wire format for every
// exact value the tools emit.
inline std::string to_string(const Rational &r)
{
    std::ostringstream os;
    os << numer(r);
    if (denom(r) != 1) {
        os << '/' << denom(r);
    }
    return os.str();
}

inline Rational parse_rational(const std::string &text)
{
    const auto slash = text.find('/');
    try {
        if (slash == std::string::npos) {
            return Rational(BigInt(text));
        }
        BigInt d(text.substr(slash + 1));
        if (d == 0) {
            throw InvalidArgument("zero denominator in '" + text + "'");
        }
        return Rational(BigInt(text.substr(0, slash)), d);
    } catch (const std::runtime_error &) {
        throw InvalidArgument("not a rational number: '" + text + "'");
    }
}

inline Rational rpow(const Rational &base, long exponent)
{
    if (exponent < 0) {
        if (base == 0) {
            throw InvalidArgument("zero to a negative power");
        }
        return rpow(Rational(1) / base, -exponent);
    }
    Rational result = 1, b = base;
    auto e = static_cast<unsigned long>(exponent);
    while (e != 0) {
        if ((e & 1U) != 0) {
            result *= b;
        }
        b *= b;
        e >>= 1U;
    }
    return result;
}

inline BigInt lcm(const BigInt &a, const BigInt &b)
{
    if (a == 0 || b == 0) {
        return 0;
    }
    return boost::multiprecision::abs(a / boost::multiprecision::gcd(a, b) * b);
}

// Dense univariate polynomial with exact rational coefficients, lowest degree
// first. The zero polynomial has an empty coefficient vector.
class Poly
{
public:
    Poly() = default;
    Poly(std::initializer_list<Rational> c) : c_(c)
    {
        trim();
    }
    explicit Poly(std::vector<Rational> c) : c_(std::move(c))
    {
        trim();
    }
    static Poly constant(const Rational &v)
    {
        return Poly(std::vector<Rational>{v});
    }
    static Poly monomial(const Rational &coef, std::size_t degree)
    {
        std::vector<Rational> c(degree + 1);
        c[degree] = coef;
        return Poly(std::move(c));
    }

    bool is_zero() const noexcept
    {
        return c_.empty();
    }
    // -1 for the zero polynomial.
    long degree() const noexcept
    {
        return static_cast<long>(c_.size()) - 1;
    }
    Rational coeff(std::size_t i) const
    {
        return i < c_.size() ? c_[i] : Rational(0);
    }
    const std::vector<Rational> &coeffs() const noexcept
    {
        return c_;
    }
    Rational leading() const
    {
        return c_.empty() ? Rational(0) : c_.back();
    }

    Rational operator()(const Rational &x) const
    {
        Rational acc = 0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) {
            acc = acc * x + *it;
        }
        return acc;
    }

    Poly derivative() const
    {
        std::vector<Rational> d;
        for (std::size_t i = 1; i < c_.size(); ++i) {
            d.push_back(c_[i] * static_cast<long>(i));
        }
        return Poly(std::move(d));
    }

    // Coefficients of x^0..x^{n-1} only.
    Poly truncated(std::size_t n) const
    {
        std::vector<Rational> c(c_.begin(), c_.begin() + static_cast<std::ptrdiff_t>(std::min(n, c_.size())));
        return Poly(std::move(c));
    }

    Poly operator-() const
    {
        auto c = c_;
        for (auto &x : c) {
            x = -x;
        }
        return Poly(std::move(c));
    }
    friend Poly operator+(const Poly &a, const Poly &b)
    {
        std::vector<Rational> c(std::max(a.c_.size(), b.c_.size()));
        for (std::size_t i = 0; i < c.size(); ++i) {
            c[i] = a.coeff(i) + b.coeff(i);
        }
        return Poly(std::move(c));
    }
    friend Poly operator-(const Poly &a, const Poly &b)
    {
        return a + (-b);
    }
    friend Poly operator*(const Poly &a, const Poly &b)
    {
        if (a.is_zero() || b.is_zero()) {
            return {};
        }
        std::vector<Rational> c(a.c_.size() + b.c_.size() - 1);
        for (std::size_t i = 0; i < a.c_.size(); ++i) {
            if (a.c_[i] == 0) {
                continue;
            }
            for (std::size_t j = 0; j < b.c_.size(); ++j) {
                c[i + j] += a.c_[i] * b.c_[j];
            }
        }
        return Poly(std::move(c));
    }
    friend Poly operator*(const Rational &s, const Poly &a)
    {
        return Poly::constant(s) * a;
    }
    Poly &operator+=(const Poly &o)
    {
        return *this = *this + o;
    }
    Poly &operator*=(const Poly &o)
    {
        return *this = *this * o;
    }
    friend bool operator==(const Poly &a, const Poly &b)
    {
        return a.c_ == b.c_;
    }
    friend bool operator!=(const Poly &a, const Poly &b)
    {
        return !(a == b);
    }

    // Euclidean division: a = q*b + r with deg r < deg b.
    static std::pair<Poly, Poly> divmod(const Poly &a, const Poly &b)
    {
        if (b.is_zero()) {
            throw InvalidArgument("polynomial division by zero");
        }
        std::vector<Rational> r = a.c_;
        const long db = b.degree();
        if (a.degree() < db) {
            return {Poly{}, a};
        }
        std::vector<Rational> q(static_cast<std::size_t>(a.degree() - db + 1));
        for (long i = a.degree(); i >= db; --i) {
            const Rational f = r[static_cast<std::size_t>(i)] / b.leading();
            q[static_cast<std::size_t>(i - db)] = f;
            if (f == 0) {
                continue;
            }
            for (long j = 0; j <= db; ++j) {
                r[static_cast<std::size_t>(i - db + j)] -= f * b.c_[static_cast<std::size_t>(j)];
            }
        }
        return {Poly(std::move(q)), Poly(std::move(r))};
    }

    Poly monic() const
    {
        if (is_zero()) {
            return {};
        }
        return (Rational(1) / leading()) * *this;
    }

    static Poly gcd(Poly a, Poly b)
    {
        while (!b.is_zero()) {
            auto r = divmod(a, b).second;
            a = std::move(b);
            b = std::move(r);
        }
        return a.monic();
    }

    friend std::ostream &operator<<(std::ostream &os, const Poly &p)
    {
        os << '[';
        for (std::size_t i = 0; i < p.c_.size(); ++i) {
            os << (i != 0 ? ", " : "") << to_string(p.c_[i]);
        }
        return os << ']';
    }

private:
    void trim()
    {
        while (!c_.empty() && c_.back() == 0) {
            c_.pop_back();
        }
    }

    std::vector<Rational> c_;
};

} // namespace poincare

#endif
