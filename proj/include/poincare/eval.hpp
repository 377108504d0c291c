#ifndef POINCARE_EVAL_HPP
#define POINCARE_EVAL_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <poincare/analytic.hpp>
#include <poincare/errors.hpp>
#include <poincare/formula.hpp>
#include <poincare/localfield.hpp>

namespace poincare
{

struct EvalVerdict {
    bool value = false;
    bool stable = true;

    friend bool operator==(const EvalVerdict &, const EvalVerdict &) = default;
};

// Assignment of the free variables. VF values may come from a lower
// precision than the evaluation spec; they are lifted (same digits).
class Environment
{
public:
    Environment &set(const std::string &name, const TruncElem &v)
    {
        bindings_.insert_or_assign(name, Binding{Sort::VF, static_cast<std::int64_t>(v.code()), v.spec()});
        return *this;
    }
    Environment &set_rf(const std::string &name, std::uint64_t v)
    {
        bindings_.insert_or_assign(name, Binding{Sort::RF, static_cast<std::int64_t>(v), std::nullopt});
        return *this;
    }
    Environment &set_vg(const std::string &name, long long v)
    {
        bindings_.insert_or_assign(name, Binding{Sort::VG, v, std::nullopt});
        return *this;
    }
    // Bound for VG quantifiers; unset means "the precision N".
    Environment &set_bound(int b)
    {
        if (b < 1) {
            throw InvalidArgument("VG quantifier bound must be at least 1");
        }
        bound_ = b;
        return *this;
    }
    std::optional<int> bound() const noexcept
    {
        return bound_;
    }

    struct Binding {
        Sort sort;
        std::int64_t value;
        std::optional<FieldSpec> spec;
    };
    const Binding *find(const std::string &name) const
    {
        auto it = bindings_.find(name);
        return it == bindings_.end() ? nullptr : &it->second;
    }

private:
    std::map<std::string, Binding> bindings_;
    std::optional<int> bound_;
};

namespace detail
{

inline constexpr long long vg_inf = 1LL << 60;

inline long long clamp_vg(__int128 v)
{
    return static_cast<long long>(std::clamp<__int128>(v, -vg_inf, vg_inf));
}

// A value-group term at finite precision: the true value lies in [lo, hi]
// (with +-vg_inf standing for unbounded ends), and `nominal` is the value
// obtained by reading top as +infinity. nan marks top - top and the like.
struct VGValue {
    long long lo = 0, hi = 0;
    long long nominal = 0;
    bool nan = false;

    bool exact() const noexcept
    {
        return lo == hi && lo != vg_inf && lo != -vg_inf;
    }
    static VGValue point(long long v)
    {
        return {v, v, v, false};
    }
    static VGValue top(int precision)
    {
        return {precision, vg_inf, vg_inf, false};
    }
};

inline long long add_ends(long long a, long long b, long long inf_side)
{
    if (a == inf_side || b == inf_side) {
        return inf_side;
    }
    return clamp_vg(static_cast<__int128>(a) + b);
}

inline VGValue vg_add(const VGValue &a, const VGValue &b)
{
    VGValue r;
    r.lo = add_ends(a.lo, b.lo, -vg_inf);
    r.hi = add_ends(a.hi, b.hi, vg_inf);
    const bool ainf = a.nominal == vg_inf || a.nominal == -vg_inf;
    const bool binf = b.nominal == vg_inf || b.nominal == -vg_inf;
    r.nan = a.nan || b.nan || (ainf && binf && a.nominal != b.nominal);
    r.nominal = ainf ? a.nominal : binf ? b.nominal : clamp_vg(static_cast<__int128>(a.nominal) + b.nominal);
    return r;
}

inline VGValue vg_neg(const VGValue &a)
{
    return {-a.hi, -a.lo, -a.nominal, a.nan};
}

inline VGValue vg_scale(const VGValue &a, long long c)
{
    if (c == 0) {
        return VGValue::point(0);
    }
    const auto scale = [c](long long v) {
        if (v == vg_inf || v == -vg_inf) {
            return (v > 0) == (c > 0) ? vg_inf : -vg_inf;
        }
        return clamp_vg(static_cast<__int128>(v) * c);
    };
    VGValue r;
    r.lo = c > 0 ? scale(a.lo) : scale(a.hi);
    r.hi = c > 0 ? scale(a.hi) : scale(a.lo);
    r.nominal = scale(a.nominal);
    r.nan = a.nan;
    return r;
}

struct RFValue {
    std::uint64_t value = 0;
    bool tainted = false;
};

struct Scratch {
    std::vector<std::int64_t> slots;
    const FieldSpec *spec = nullptr;
    int bound = 1;
};

struct CTerm {
    TermKind kind;
    Sort sort;
    int slot = -1;
    long long value = 0;
    const AnalyticSymbol *symbol = nullptr;
    std::vector<CTerm> args;

    TruncElem vf(const Scratch &s) const
    {
        const FieldSpec &spec = *s.spec;
        switch (kind) {
            case TermKind::variable:
                return {spec, static_cast<std::uint64_t>(s.slots[static_cast<std::size_t>(slot)])};
            case TermKind::constant:
                return TruncElem::from_integer(spec, value);
            case TermKind::add:
                return args[0].vf(s) + args[1].vf(s);
            case TermKind::sub:
                return args[0].vf(s) - args[1].vf(s);
            case TermKind::mul:
                return args[0].vf(s) * args[1].vf(s);
            case TermKind::neg:
                return -args[0].vf(s);
            case TermKind::apply: {
                std::vector<TruncElem> vals;
                vals.reserve(args.size());
                for (const auto &a : args) {
                    vals.push_back(a.vf(s));
                }
                return eval_analytic(*symbol, vals, spec);
            }
            default:
                throw SortError("internal: non-VF term evaluated as VF");
        }
    }

    RFValue rf(const Scratch &s) const
    {
        const std::uint64_t p = s.spec->p();
        switch (kind) {
            case TermKind::variable:
                return {static_cast<std::uint64_t>(s.slots[static_cast<std::size_t>(slot)]), false};
            case TermKind::constant: {
                auto r = static_cast<long long>(value % static_cast<long long>(p));
                return {static_cast<std::uint64_t>(r < 0 ? r + static_cast<long long>(p) : r), false};
            }
            case TermKind::add: {
                auto a = args[0].rf(s), b = args[1].rf(s);
                return {(a.value + b.value) % p, a.tainted || b.tainted};
            }
            case TermKind::sub: {
                auto a = args[0].rf(s), b = args[1].rf(s);
                return {(a.value + p - b.value) % p, a.tainted || b.tainted};
            }
            case TermKind::mul: {
                auto a = args[0].rf(s), b = args[1].rf(s);
                return {static_cast<std::uint64_t>(static_cast<unsigned __int128>(a.value) * b.value % p),
                        a.tainted || b.tainted};
            }
            case TermKind::neg: {
                auto a = args[0].rf(s);
                return {(p - a.value) % p, a.tainted};
            }
            case TermKind::ac: {
                const TruncElem x = args[0].vf(s);
                // ac of an element that vanishes at this precision is unknown.
                return {x.ac(), x.code() == 0};
            }
            default:
                throw SortError("internal: non-RF term evaluated as RF");
        }
    }

    VGValue vg(const Scratch &s) const
    {
        switch (kind) {
            case TermKind::variable:
                return VGValue::point(s.slots[static_cast<std::size_t>(slot)]);
            case TermKind::constant:
                return VGValue::point(value);
            case TermKind::add:
                return vg_add(args[0].vg(s), args[1].vg(s));
            case TermKind::sub:
                return vg_add(args[0].vg(s), vg_neg(args[1].vg(s)));
            case TermKind::mul:
                if (args[0].kind == TermKind::constant) {
                    return vg_scale(args[1].vg(s), args[0].value);
                }
                return vg_scale(args[0].vg(s), args[1].value);
            case TermKind::neg:
                return vg_neg(args[0].vg(s));
            case TermKind::ord: {
                const TruncElem x = args[0].vf(s);
                const auto o = x.ord();
                return o.is_top() ? VGValue::top(s.spec->precision()) : VGValue::point(o.value());
            }
            default:
                throw SortError("internal: non-VG term evaluated as VG");
        }
    }
};

struct CFormula {
    FormulaKind kind;
    std::vector<CTerm> terms;
    std::vector<CFormula> subs;
    Sort bound_sort = Sort::VF;
    int slot = -1;

    EvalVerdict run(Scratch &s) const
    {
        switch (kind) {
            case FormulaKind::eq:
                return equality(s);
            case FormulaKind::le:
            case FormulaKind::ge:
            case FormulaKind::lt:
                return order(s);
            case FormulaKind::neg: {
                auto v = subs[0].run(s);
                return {!v.value, v.stable};
            }
            case FormulaKind::conj:
                return conj(subs[0].run(s), subs[1].run(s));
            case FormulaKind::disj:
                return disj(subs[0].run(s), subs[1].run(s));
            case FormulaKind::implies: {
                auto a = subs[0].run(s);
                return disj({!a.value, a.stable}, subs[1].run(s));
            }
            case FormulaKind::exists:
            case FormulaKind::forall:
                return quantifier(s);
        }
        return {};
    }

    // Kleene conjunction: a stable false operand decides.
    static EvalVerdict conj(EvalVerdict a, EvalVerdict b)
    {
        if ((!a.value && a.stable) || (!b.value && b.stable)) {
            return {false, true};
        }
        return {a.value && b.value, a.stable && b.stable};
    }
    static EvalVerdict disj(EvalVerdict a, EvalVerdict b)
    {
        if ((a.value && a.stable) || (b.value && b.stable)) {
            return {true, true};
        }
        return {a.value || b.value, a.stable && b.stable};
    }

    EvalVerdict equality(const Scratch &s) const
    {
        switch (terms[0].sort) {
            case Sort::VF:
                // Agreement modulo m^N does not prove equality in O.
                if (terms[0].vf(s) == terms[1].vf(s)) {
                    return {true, false};
                }
                return {false, true};
            case Sort::RF: {
                auto a = terms[0].rf(s), b = terms[1].rf(s);
                return {a.value == b.value, !a.tainted && !b.tainted};
            }
            case Sort::VG: {
                auto a = terms[0].vg(s), b = terms[1].vg(s);
                if (a.exact() && b.exact()) {
                    return {a.lo == b.lo, true};
                }
                // Any top involvement leaves equality undecided at this precision.
                return {!a.nan && !b.nan && a.nominal == b.nominal, false};
            }
        }
        return {};
    }

    EvalVerdict order(const Scratch &s) const
    {
        auto a = terms[0].vg(s), b = terms[1].vg(s);
        if (kind == FormulaKind::ge) {
            std::swap(a, b);
        }
        const bool strict = kind == FormulaKind::lt;
        // Decide a <= b (or a < b) from the intervals when possible.
        const bool surely_true = a.hi != vg_inf && b.lo != -vg_inf && (strict ? a.hi < b.lo : a.hi <= b.lo);
        const bool surely_false = a.lo != -vg_inf && b.hi != vg_inf && (strict ? a.lo >= b.hi : a.lo > b.hi);
        if (surely_true) {
            return {true, true};
        }
        if (surely_false) {
            return {false, true};
        }
        if (a.nan || b.nan) {
            return {false, false};
        }
        return {strict ? a.nominal < b.nominal : a.nominal <= b.nominal, false};
    }

    EvalVerdict quantifier(Scratch &s) const
    {
        const bool ex = kind == FormulaKind::exists;
        const auto idx = static_cast<std::size_t>(slot);
        // Existential: a stable witness decides; otherwise Kleene OR. The
        // universal case is the dual.
        bool any_decisive = false, accum = !ex, all_stable = true;
        const auto visit = [&](std::int64_t v, bool boundary) {
            s.slots[idx] = v;
            const EvalVerdict r = subs[0].run(s);
            if (r.value == ex && r.stable && !boundary) {
                any_decisive = true;
                return true;
            }
            accum = ex ? (accum || r.value) : (accum && r.value);
            all_stable = all_stable && r.stable && !boundary;
            return false;
        };
        if (bound_sort == Sort::VF) {
            const std::uint64_t n = s.spec->size();
            if (n > enumeration_budget) {
                throw EnumerationBudgetExceeded("VF quantifier over " + std::to_string(n) + " elements");
            }
            for (std::uint64_t c = 0; c < n; ++c) {
                if (visit(static_cast<std::int64_t>(c), false)) {
                    break;
                }
            }
        } else if (bound_sort == Sort::RF) {
            for (std::uint64_t c = 0; c < s.spec->p(); ++c) {
                if (visit(static_cast<std::int64_t>(c), false)) {
                    break;
                }
            }
        } else {
            const int b = s.bound;
            // Interior values first, so a stable interior witness wins early.
            for (int v = -b + 1; v <= b - 1; ++v) {
                if (visit(v, false)) {
                    break;
                }
            }
            if (!any_decisive) {
                visit(-b, true);
                visit(b, true);
            }
        }
        if (any_decisive) {
            return {ex, true};
        }
        return {accum, all_stable};
    }
};

} // namespace detail

// A formula compiled against a fixed ordering of its input variables, so
// repeated evaluation only fills a slot vector.
class Evaluator
{
public:
    Evaluator(const Formula &f, std::vector<Var> inputs, const SymbolTable &symbols = {})
        : inputs_(std::move(inputs)), symbols_(std::make_shared<const SymbolTable>(symbols))
    {
        for (const auto &v : free_vars(f)) {
            if (std::find(inputs_.begin(), inputs_.end(), v) == inputs_.end()) {
                throw UnboundVariable("free variable " + v.name + ":" + to_string(v.sort) + " has no value");
            }
        }
        for (std::size_t i = 0; i < inputs_.size(); ++i) {
            scope_.emplace_back(inputs_[i], static_cast<int>(i));
        }
        next_slot_ = static_cast<int>(inputs_.size());
        root_ = compile(f);
        slot_count_ = next_slot_;
    }

    const std::vector<Var> &inputs() const noexcept
    {
        return inputs_;
    }

    // values[i] is the code (VF), residue (RF) or integer (VG) of inputs()[i].
    EvalVerdict operator()(std::span<const std::int64_t> values, const FieldSpec &spec, int bound) const
    {
        if (values.size() != inputs_.size()) {
            throw InvalidArgument("wrong number of input values");
        }
        detail::Scratch s;
        s.slots.assign(static_cast<std::size_t>(slot_count_), 0);
        s.spec = &spec;
        s.bound = bound;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto v = values[i];
            switch (inputs_[i].sort) {
                case Sort::VF:
                    if (v < 0 || static_cast<std::uint64_t>(v) >= spec.size()) {
                        throw InvalidArgument("VF value for " + inputs_[i].name + " outside the truncation");
                    }
                    break;
                case Sort::RF:
                    if (v < 0 || static_cast<std::uint64_t>(v) >= spec.p()) {
                        throw InvalidArgument("RF value for " + inputs_[i].name + " outside the residue field");
                    }
                    break;
                case Sort::VG:
                    break;
            }
            s.slots[i] = v;
        }
        return root_.run(s);
    }

private:
    detail::CTerm compile(const Term &t)
    {
        detail::CTerm c{t.kind(), t.sort(), -1, t.value(), nullptr, {}};
        if (t.kind() == TermKind::variable) {
            c.slot = lookup(Var{t.name(), t.sort()});
        }
        if (t.kind() == TermKind::apply) {
            auto it = symbols_->find(t.name());
            if (it == symbols_->end()) {
                throw SortError("unknown analytic symbol '" + t.name() + "'");
            }
            c.symbol = &it->second;
        }
        for (const auto &a : t.args()) {
            c.args.push_back(compile(a));
        }
        return c;
    }

    detail::CFormula compile(const Formula &f)
    {
        detail::CFormula c{f.kind(), {}, {}, Sort::VF, -1};
        if (f.is_atom()) {
            c.terms.push_back(compile(f.lhs()));
            c.terms.push_back(compile(f.rhs()));
            return c;
        }
        if (f.is_quantifier()) {
            c.bound_sort = f.bound().sort;
            c.slot = next_slot_++;
            scope_.emplace_back(f.bound(), c.slot);
            c.subs.push_back(compile(f.sub()));
            scope_.pop_back();
            return c;
        }
        for (const auto &s : f.subs()) {
            c.subs.push_back(compile(s));
        }
        return c;
    }

    int lookup(const Var &v) const
    {
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it) {
            if (it->first.name == v.name) {
                if (it->first.sort != v.sort) {
                    throw SortError("variable " + v.name + " used as " + to_string(v.sort) + " but bound as "
                                    + to_string(it->first.sort));
                }
                return it->second;
            }
        }
        throw UnboundVariable("variable " + v.name + " has no value");
    }

    std::vector<Var> inputs_;
    std::shared_ptr<const SymbolTable> symbols_;
    std::vector<std::pair<Var, int>> scope_;
    int next_slot_ = 0;
    int slot_count_ = 0;
    detail::CFormula root_;
};

namespace detail
{

inline std::vector<std::int64_t> bind_inputs(const std::vector<Var> &vars, const Environment &env, const FieldSpec &spec)
{
    std::vector<std::int64_t> out;
    for (const auto &v : vars) {
        const auto *b = env.find(v.name);
        if (b == nullptr) {
            throw UnboundVariable("free variable " + v.name + ":" + to_string(v.sort) + " has no value");
        }
        if (b->sort != v.sort) {
            throw SortError("variable " + v.name + " is " + to_string(v.sort) + " but bound to a "
                            + to_string(b->sort) + " value");
        }
        if (v.sort == Sort::VF) {
            const FieldSpec &from = *b->spec;
            if (from.p() != spec.p() || from.char_case() != spec.char_case() || from.precision() > spec.precision()) {
                throw SpecMismatch("value of " + v.name + " does not live in this truncation");
            }
        }
        out.push_back(b->value);
    }
    return out;
}

} // namespace detail

inline EvalVerdict eval(const Formula &f, const Environment &env, const FieldSpec &spec, const SymbolTable &symbols = {})
{
    const auto fv = free_vars(f);
    std::vector<Var> vars(fv.begin(), fv.end());
    const Evaluator ev(f, vars, symbols);
    const auto values = detail::bind_inputs(vars, env, spec);
    return ev(values, spec, env.bound().value_or(spec.precision()));
}

// Re-evaluates at N, N+1, ... (bound raised in step) until two consecutive
// stable verdicts agree.
inline EvalVerdict eval_stable(const Formula &f, const Environment &env, const FieldSpec &spec, int max_extra,
                               const SymbolTable &symbols = {})
{
    const auto fv = free_vars(f);
    std::vector<Var> vars(fv.begin(), fv.end());
    const Evaluator ev(f, vars, symbols);
    const auto values = detail::bind_inputs(vars, env, spec);
    const int base_bound = env.bound().value_or(spec.precision());
    std::optional<EvalVerdict> prev;
    for (int k = 0; k <= max_extra; ++k) {
        const FieldSpec sk = spec.with_precision(spec.precision() + k);
        const EvalVerdict v = ev(values, sk, base_bound + k);
        if (prev && prev->stable && v.stable && prev->value == v.value) {
            return v;
        }
        prev = v;
    }
    throw StabilizationFailure("no two consecutive stable agreeing verdicts between precision "
                               + std::to_string(spec.precision()) + " and "
                               + std::to_string(spec.precision() + max_extra));
}

} // namespace poincare

#endif
