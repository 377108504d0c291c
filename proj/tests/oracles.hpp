#ifndef POINCARE_TESTS_ORACLES_HPP
#define POINCARE_TESTS_ORACLES_HPP

#include <cstdint>
#include <functional>
#include <vector>

// Reference computations written without the library, for cross-checks.
namespace oracle
{

inline std::int64_t ipow(std::int64_t b, int e)
{
    std::int64_t r = 1;
    while (e-- > 0) {
        r *= b;
    }
    return r;
}

// F_p[t]/t^n as plain digit vectors.
struct TPoly {
    std::vector<std::int64_t> d;
    std::int64_t p;

    TPoly operator+(const TPoly &o) const
    {
        TPoly r{d, p};
        for (std::size_t i = 0; i < d.size(); ++i) {
            r.d[i] = (d[i] + o.d[i]) % p;
        }
        return r;
    }
    TPoly operator*(const TPoly &o) const
    {
        TPoly r{std::vector<std::int64_t>(d.size(), 0), p};
        for (std::size_t i = 0; i < d.size(); ++i) {
            for (std::size_t j = 0; i + j < d.size(); ++j) {
                r.d[i + j] = (r.d[i + j] + d[i] * o.d[j]) % p;
            }
        }
        return r;
    }
    int ord() const
    {
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d[i] != 0) {
                return static_cast<int>(i);
            }
        }
        return static_cast<int>(d.size());
    }
};

enum class Poly { x, x_squared, x_times_y, x2_plus_y2 };

inline int poly_arity(Poly f)
{
    return (f == Poly::x || f == Poly::x_squared) ? 1 : 2;
}

// #{ x in (Z/p^n)^m : f(x) = 0 mod p^n }
inline std::int64_t zeros_mixed(Poly f, std::int64_t p, int n)
{
    const std::int64_t q = ipow(p, n);
    const int m = poly_arity(f);
    std::int64_t count = 0;
    for (std::int64_t a = 0; a < q; ++a) {
        for (std::int64_t b = 0; b < (m == 2 ? q : 1); ++b) {
            __int128 v = 0;
            switch (f) {
                case Poly::x:
                    v = a;
                    break;
                case Poly::x_squared:
                    v = static_cast<__int128>(a) * a;
                    break;
                case Poly::x_times_y:
                    v = static_cast<__int128>(a) * b;
                    break;
                case Poly::x2_plus_y2:
                    v = static_cast<__int128>(a) * a + static_cast<__int128>(b) * b;
                    break;
            }
            if (v % q == 0) {
                ++count;
            }
        }
    }
    return count;
}

// The same count in F_p[t]/t^n.
inline std::int64_t zeros_equal(Poly f, std::int64_t p, int n)
{
    if (n == 0) {
        return 1;
    }
    const std::int64_t q = ipow(p, n);
    const int m = poly_arity(f);
    const auto make = [&](std::int64_t code) {
        TPoly t{std::vector<std::int64_t>(static_cast<std::size_t>(n)), p};
        for (int i = 0; i < n; ++i) {
            t.d[static_cast<std::size_t>(i)] = code % p;
            code /= p;
        }
        return t;
    };
    std::int64_t count = 0;
    for (std::int64_t a = 0; a < q; ++a) {
        for (std::int64_t b = 0; b < (m == 2 ? q : 1); ++b) {
            const TPoly x = make(a), y = make(b);
            TPoly v = x;
            switch (f) {
                case Poly::x:
                    break;
                case Poly::x_squared:
                    v = x * x;
                    break;
                case Poly::x_times_y:
                    v = x * y;
                    break;
                case Poly::x2_plus_y2:
                    v = x * x + y * y;
                    break;
            }
            if (v.ord() >= n) {
                ++count;
            }
        }
    }
    return count;
}

inline std::int64_t closed_form_x_squared(std::int64_t p, int n)
{
    return ipow(p, n / 2);
}

inline std::int64_t closed_form_x_times_y(std::int64_t p, int n)
{
    return n == 0 ? 1 : (n + 1) * ipow(p, n) - n * ipow(p, n - 1);
}

} // namespace oracle

#endif
