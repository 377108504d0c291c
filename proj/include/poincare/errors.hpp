#ifndef POINCARE_ERRORS_HPP
#define POINCARE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace poincare
{

// Every failure raised by the library derives from Error and carries a
// stable machine-readable kind string (used verbatim in CLI reports).
class Error : public std::runtime_error
{
public:
    Error(std::string kind, const std::string &what) : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string &kind() const noexcept
    {
        return kind_;
    }

private:
    std::string kind_;
};

#define POINCARE_DEFINE_ERROR(Name)                                                                                    \
    class Name : public Error                                                                                          \
    {                                                                                                                  \
    public:                                                                                                            \
        explicit Name(const std::string &what) : Error(#Name, what) {}                                                 \
    }

POINCARE_DEFINE_ERROR(SpecMismatch);
POINCARE_DEFINE_ERROR(InvalidFieldSpec);
POINCARE_DEFINE_ERROR(InvalidPrecision);
POINCARE_DEFINE_ERROR(EnumerationBudgetExceeded);
POINCARE_DEFINE_ERROR(SortError);
POINCARE_DEFINE_ERROR(UnboundVariable);
POINCARE_DEFINE_ERROR(InsufficientTSeriesPrecision);
POINCARE_DEFINE_ERROR(StabilizationFailure);
POINCARE_DEFINE_ERROR(UnstableRelation);
POINCARE_DEFINE_ERROR(NotInvariant);
POINCARE_DEFINE_ERROR(PointNotInMultibox);
POINCARE_DEFINE_ERROR(PrecisionInconclusive);
POINCARE_DEFINE_ERROR(NotStepConstant);
POINCARE_DEFINE_ERROR(DivergentFamily);
POINCARE_DEFINE_ERROR(NonAdmissibleDenominator);
POINCARE_DEFINE_ERROR(InvalidArgument);
POINCARE_DEFINE_ERROR(ConfigError);

#undef POINCARE_DEFINE_ERROR

// Parse failures additionally record the byte offset and what was expected there.
class ParseError : public Error
{
public:
    ParseError(std::size_t position, std::string expected, const std::string &found)
        : Error("ParseError", "at offset " + std::to_string(position) + ": expected " + expected + ", found "
                                  + (found.empty() ? std::string("end of input") : "'" + found + "'")),
          position_(position), expected_(std::move(expected))
    {
    }

    std::size_t position() const noexcept
    {
        return position_;
    }
    const std::string &expected() const noexcept
    {
        return expected_;
    }

private:
    std::size_t position_;
    std::string expected_;
};

// The minimal recurrence found is not yet confirmed by enough terms.
class ReconstructionAmbiguous : public Error
{
public:
    ReconstructionAmbiguous(const std::string &what, int extra_terms)
        : Error("ReconstructionAmbiguous", what + " (needs " + std::to_string(extra_terms) + " more term(s))"),
          extra_terms_(extra_terms)
    {
    }
    int extra_terms() const noexcept
    {
        return extra_terms_;
    }

private:
    int extra_terms_;
};

class UniformityRejected : public Error
{
public:
    UniformityRejected(long long n, unsigned long long prime, const std::string &what)
        : Error("UniformityRejected",
                "coefficient n=" + std::to_string(n) + " at p=" + std::to_string(prime) + ": " + what),
          n_(n), prime_(prime)
    {
    }
    long long n() const noexcept
    {
        return n_;
    }
    unsigned long long prime() const noexcept
    {
        return prime_;
    }

private:
    long long n_;
    unsigned long long prime_;
};

} // namespace poincare

#endif
