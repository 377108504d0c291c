#ifndef POINCARE_TESTS_CORPUS_HPP
#define POINCARE_TESTS_CORPUS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <poincare/eval.hpp>

namespace corpus
{

// Formulas in x, y (VF), n (VG) and u (RF) used by the stability property.
inline const std::vector<std::string> &stability_formulas()
{
    static const std::vector<std::string> f = {
        "ord(x) >= n",
        "ord(x) <= n",
        "ord(x) < n",
        "ord(x) = n",
        "ord(x - y) >= n",
        "ord(x - y) >= 2 * n",
        "ord(x * y) >= n",
        "ord(x * x) >= n",
        "ord(x * x - y) >= n",
        "ord(x + y) <= ord(x)",
        "ord(x) + ord(y) = ord(x * y)",
        "ord(x) + 1 <= n",
        "ord(x - 1) >= 1",
        "ac(x) = 1",
        "ac(x) = u",
        "ac(x * y) = ac(x) * ac(y)",
        "ac(x) + u = 0",
        "x = y",
        "x * y = 1",
        "x = 0",
        "~(ord(x) >= n)",
        "ord(x) >= n /\\ ord(y) >= n",
        "ord(x) >= n \\/ ac(y) = 1",
        "ord(x) >= 1 -> ac(x) = 0",
        "E z:VF. ord(x - z * z) >= n",
        "E z:VF. x * z = 1",
        "E z:VF. ord(x * z - 1) >= n",
        "A z:VF. ord(x - z) >= 0",
        "A z:VF. ord(x - z) <= n",
        "E z:VF. ord(z) >= n /\\ ord(x - z) >= n",
        "E w:RF. ac(x) = w * w",
        "A w:RF. w = 0 \\/ ~(ac(x) = w) \\/ ac(x * x) = w * w",
        "E k:VG. ord(x) = k",
        "E k:VG. k >= 0 /\\ ord(x) = k",
        "E k:VG. ord(x) = 2 * k",
        "A k:VG. k <= n \\/ k >= n",
        "A k:VG. ord(x) >= k -> k <= n",
        "E k:VG. k < n /\\ ord(y) = k",
        "ord(x) >= n -> ord(x * y) >= n",
        "ord(x - y) >= n -> ac(x) = ac(y) \\/ ord(x) >= n",
        "~E z:VF. ord(x - z) >= n /\\ ~(ord(y - z) >= n)",
        "A z:VF. ord(x - z) >= n -> ord(y - z) >= n",
        "ord(x) >= n + 1 \\/ ord(x) <= n",
        "ord(x + 1) = 0",
        "ord(x * x + y * y) >= n",
        "ord(x * x * x - y) >= n",
        "ac(x - y) = 0",
        "E u2:RF. ac(x) = u2 /\\ ~(u2 = 0)",
        "ord(x) >= 0 - n",
        "ord(x - y) >= n /\\ ord(x) < n + 1",
    };
    return f;
}

} // namespace corpus

#endif
