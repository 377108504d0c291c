#ifndef POINCARE_FORMULA_HPP
#define POINCARE_FORMULA_HPP

#include <cctype>
#include <charconv>
#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <poincare/analytic.hpp>
#include <poincare/errors.hpp>

namespace poincare
{

// Three-sorted Denef-Pas language: valued field, residue field, value group.
enum class Sort { VF, RF, VG };

inline std::string to_string(Sort s)
{
    switch (s) {
        case Sort::VF:
            return "VF";
        case Sort::RF:
            return "RF";
        case Sort::VG:
            return "VG";
    }
    return "?";
}

inline std::optional<Sort> sort_from_string(std::string_view s)
{
    if (s == "VF") {
        return Sort::VF;
    }
    if (s == "RF") {
        return Sort::RF;
    }
    if (s == "VG") {
        return Sort::VG;
    }
    return std::nullopt;
}

struct Var {
    std::string name;
    Sort sort = Sort::VF;

    friend auto operator<=>(const Var &, const Var &) = default;
    friend bool operator==(const Var &, const Var &) = default;
};

using VarSet = std::set<Var>;

enum class TermKind { variable, constant, add, sub, mul, neg, ord, ac, apply };

class Term;
struct TermNode {
    TermKind kind;
    Sort sort;
    std::string name; // variable or analytic symbol name
    long long value = 0;
    std::vector<Term> args;
};

// Immutable, cheaply copyable handle to a sorted term tree. The static
// builders enforce the operator signatures, so every Term is well-sorted.
class Term
{
public:
    static Term var(std::string name, Sort sort)
    {
        return Term(TermNode{TermKind::variable, sort, std::move(name), 0, {}});
    }
    static Term var(const Var &v)
    {
        return var(v.name, v.sort);
    }
    static Term constant(long long value, Sort sort)
    {
        return Term(TermNode{TermKind::constant, sort, {}, value, {}});
    }
    static Term add(Term a, Term b)
    {
        same_sort(a, b, "+");
        const Sort s = a.sort();
        return Term(TermNode{TermKind::add, s, {}, 0, {std::move(a), std::move(b)}});
    }
    static Term sub(Term a, Term b)
    {
        same_sort(a, b, "-");
        const Sort s = a.sort();
        return Term(TermNode{TermKind::sub, s, {}, 0, {std::move(a), std::move(b)}});
    }
    static Term mul(Term a, Term b)
    {
        same_sort(a, b, "*");
        if (a.sort() == Sort::VG && !a.is_constant() && !b.is_constant()) {
            throw SortError("VG multiplication needs an integer literal factor: " + a.to_string() + " * " + b.to_string());
        }
        const Sort s = a.sort();
        return Term(TermNode{TermKind::mul, s, {}, 0, {std::move(a), std::move(b)}});
    }
    // Negating a literal folds into the literal.
    static Term neg(Term a)
    {
        if (a.is_constant()) {
            return constant(-a.value(), a.sort());
        }
        const Sort s = a.sort();
        return Term(TermNode{TermKind::neg, s, {}, 0, {std::move(a)}});
    }
    static Term ord(Term a)
    {
        expect(a, Sort::VF, "ord");
        return Term(TermNode{TermKind::ord, Sort::VG, {}, 0, {std::move(a)}});
    }
    static Term ac(Term a)
    {
        expect(a, Sort::VF, "ac");
        return Term(TermNode{TermKind::ac, Sort::RF, {}, 0, {std::move(a)}});
    }
    static Term apply(std::string symbol, std::vector<Term> args)
    {
        for (const auto &a : args) {
            expect(a, Sort::VF, symbol);
        }
        return Term(TermNode{TermKind::apply, Sort::VF, std::move(symbol), 0, std::move(args)});
    }

    TermKind kind() const noexcept
    {
        return n_->kind;
    }
    Sort sort() const noexcept
    {
        return n_->sort;
    }
    const std::string &name() const noexcept
    {
        return n_->name;
    }
    long long value() const noexcept
    {
        return n_->value;
    }
    const std::vector<Term> &args() const noexcept
    {
        return n_->args;
    }
    bool is_constant() const noexcept
    {
        return n_->kind == TermKind::constant;
    }
    const TermNode *node() const noexcept
    {
        return n_.get();
    }

    friend bool operator==(const Term &a, const Term &b)
    {
        if (a.n_ == b.n_) {
            return true;
        }
        return a.kind() == b.kind() && a.sort() == b.sort() && a.name() == b.name() && a.value() == b.value()
               && a.args() == b.args();
    }

    std::string to_string() const;

private:
    explicit Term(TermNode n) : n_(std::make_shared<const TermNode>(std::move(n))) {}

    static void same_sort(const Term &a, const Term &b, const std::string &op)
    {
        if (a.sort() != b.sort()) {
            throw SortError("operands of '" + op + "' have sorts " + poincare::to_string(a.sort()) + " and "
                            + poincare::to_string(b.sort()));
        }
    }
    static void expect(const Term &a, Sort s, const std::string &op)
    {
        if (a.sort() != s) {
            throw SortError("'" + op + "' expects a " + poincare::to_string(s) + " argument, got "
                            + poincare::to_string(a.sort()) + " term " + a.to_string());
        }
    }

    std::shared_ptr<const TermNode> n_;
};

enum class FormulaKind { eq, le, ge, lt, conj, disj, neg, implies, exists, forall };

class Formula;
struct FormulaNode {
    FormulaKind kind;
    std::vector<Term> terms;   // atoms: lhs, rhs
    std::vector<Formula> subs; // connectives and quantifier bodies
    Var bound;                 // quantifiers
};

class Formula
{
public:
    static Formula eq(Term a, Term b)
    {
        if (a.sort() != b.sort()) {
            throw SortError("'=' between " + poincare::to_string(a.sort()) + " and " + poincare::to_string(b.sort()) + ": " + a.to_string()
                            + " = " + b.to_string());
        }
        return atom(FormulaKind::eq, std::move(a), std::move(b));
    }
    static Formula le(Term a, Term b)
    {
        order_sorts(a, b, "<=");
        return atom(FormulaKind::le, std::move(a), std::move(b));
    }
    static Formula ge(Term a, Term b)
    {
        order_sorts(a, b, ">=");
        return atom(FormulaKind::ge, std::move(a), std::move(b));
    }
    static Formula lt(Term a, Term b)
    {
        order_sorts(a, b, "<");
        return atom(FormulaKind::lt, std::move(a), std::move(b));
    }
    static Formula conj(Formula a, Formula b)
    {
        return Formula(FormulaNode{FormulaKind::conj, {}, {std::move(a), std::move(b)}, {}});
    }
    static Formula disj(Formula a, Formula b)
    {
        return Formula(FormulaNode{FormulaKind::disj, {}, {std::move(a), std::move(b)}, {}});
    }
    static Formula implies(Formula a, Formula b)
    {
        return Formula(FormulaNode{FormulaKind::implies, {}, {std::move(a), std::move(b)}, {}});
    }
    static Formula negation(Formula a)
    {
        return Formula(FormulaNode{FormulaKind::neg, {}, {std::move(a)}, {}});
    }
    static Formula exists(Var v, Formula body)
    {
        return Formula(FormulaNode{FormulaKind::exists, {}, {std::move(body)}, std::move(v)});
    }
    static Formula forall(Var v, Formula body)
    {
        return Formula(FormulaNode{FormulaKind::forall, {}, {std::move(body)}, std::move(v)});
    }

    FormulaKind kind() const noexcept
    {
        return n_->kind;
    }
    bool is_atom() const noexcept
    {
        return kind() == FormulaKind::eq || kind() == FormulaKind::le || kind() == FormulaKind::ge
               || kind() == FormulaKind::lt;
    }
    bool is_quantifier() const noexcept
    {
        return kind() == FormulaKind::exists || kind() == FormulaKind::forall;
    }
    const Term &lhs() const
    {
        return n_->terms.at(0);
    }
    const Term &rhs() const
    {
        return n_->terms.at(1);
    }
    const std::vector<Formula> &subs() const noexcept
    {
        return n_->subs;
    }
    const Formula &sub(std::size_t i = 0) const
    {
        return n_->subs.at(i);
    }
    const Var &bound() const noexcept
    {
        return n_->bound;
    }
    const FormulaNode *node() const noexcept
    {
        return n_.get();
    }

    friend bool operator==(const Formula &a, const Formula &b)
    {
        if (a.n_ == b.n_) {
            return true;
        }
        return a.kind() == b.kind() && a.n_->terms == b.n_->terms && a.subs() == b.subs() && a.bound() == b.bound();
    }

    // Canonical text; parse(to_string()) rebuilds an equal formula.
    std::string to_string() const;

private:
    explicit Formula(FormulaNode n) : n_(std::make_shared<const FormulaNode>(std::move(n))) {}

    static Formula atom(FormulaKind k, Term a, Term b)
    {
        return Formula(FormulaNode{k, {std::move(a), std::move(b)}, {}, {}});
    }
    static void order_sorts(const Term &a, const Term &b, const std::string &op)
    {
        if (a.sort() != Sort::VG || b.sort() != Sort::VG) {
            throw SortError("'" + op + "' is only defined on VG, got " + poincare::to_string(a.sort()) + " and "
                            + poincare::to_string(b.sort()) + ": " + a.to_string() + " " + op + " " + b.to_string());
        }
    }

    std::shared_ptr<const FormulaNode> n_;
};

// ---------------------------------------------------------------------------
// Free variables and substitution.

namespace detail
{

inline void term_vars(const Term &t, VarSet &out)
{
    if (t.kind() == TermKind::variable) {
        out.insert(Var{t.name(), t.sort()});
    }
    for (const auto &a : t.args()) {
        term_vars(a, out);
    }
}

inline void formula_free_vars(const Formula &f, std::set<std::string> &bound, VarSet &out)
{
    if (f.is_atom()) {
        VarSet vs;
        term_vars(f.lhs(), vs);
        term_vars(f.rhs(), vs);
        for (const auto &v : vs) {
            if (bound.count(v.name) == 0) {
                out.insert(v);
            }
        }
        return;
    }
    if (f.is_quantifier()) {
        const bool fresh = bound.insert(f.bound().name).second;
        formula_free_vars(f.sub(), bound, out);
        if (fresh) {
            bound.erase(f.bound().name);
        }
        return;
    }
    for (const auto &s : f.subs()) {
        formula_free_vars(s, bound, out);
    }
}

} // namespace detail

inline VarSet free_vars(const Term &t)
{
    VarSet out;
    detail::term_vars(t, out);
    return out;
}

inline VarSet free_vars(const Formula &f)
{
    std::set<std::string> bound;
    VarSet out;
    detail::formula_free_vars(f, bound, out);
    return out;
}

inline Term substitute(const Term &t, const Var &v, const Term &replacement)
{
    switch (t.kind()) {
        case TermKind::variable:
            return (t.name() == v.name && t.sort() == v.sort) ? replacement : t;
        case TermKind::constant:
            return t;
        case TermKind::add:
            return Term::add(substitute(t.args()[0], v, replacement), substitute(t.args()[1], v, replacement));
        case TermKind::sub:
            return Term::sub(substitute(t.args()[0], v, replacement), substitute(t.args()[1], v, replacement));
        case TermKind::mul:
            return Term::mul(substitute(t.args()[0], v, replacement), substitute(t.args()[1], v, replacement));
        case TermKind::neg:
            return Term::neg(substitute(t.args()[0], v, replacement));
        case TermKind::ord:
            return Term::ord(substitute(t.args()[0], v, replacement));
        case TermKind::ac:
            return Term::ac(substitute(t.args()[0], v, replacement));
        case TermKind::apply: {
            std::vector<Term> args;
            for (const auto &a : t.args()) {
                args.push_back(substitute(a, v, replacement));
            }
            return Term::apply(t.name(), std::move(args));
        }
    }
    return t;
}

// Capture-avoiding substitution of `replacement` for the free occurrences of v.
inline Formula substitute(const Formula &f, const Var &v, const Term &replacement)
{
    if (v.sort != replacement.sort()) {
        throw SortError("cannot substitute a " + to_string(replacement.sort()) + " term for " + v.name + ":"
                        + to_string(v.sort));
    }
    switch (f.kind()) {
        case FormulaKind::eq:
            return Formula::eq(substitute(f.lhs(), v, replacement), substitute(f.rhs(), v, replacement));
        case FormulaKind::le:
            return Formula::le(substitute(f.lhs(), v, replacement), substitute(f.rhs(), v, replacement));
        case FormulaKind::ge:
            return Formula::ge(substitute(f.lhs(), v, replacement), substitute(f.rhs(), v, replacement));
        case FormulaKind::lt:
            return Formula::lt(substitute(f.lhs(), v, replacement), substitute(f.rhs(), v, replacement));
        case FormulaKind::conj:
            return Formula::conj(substitute(f.sub(0), v, replacement), substitute(f.sub(1), v, replacement));
        case FormulaKind::disj:
            return Formula::disj(substitute(f.sub(0), v, replacement), substitute(f.sub(1), v, replacement));
        case FormulaKind::implies:
            return Formula::implies(substitute(f.sub(0), v, replacement), substitute(f.sub(1), v, replacement));
        case FormulaKind::neg:
            return Formula::negation(substitute(f.sub(), v, replacement));
        case FormulaKind::exists:
        case FormulaKind::forall: {
            const auto rebuild = [&](Var b, Formula body) {
                return f.kind() == FormulaKind::exists ? Formula::exists(std::move(b), std::move(body))
                                                       : Formula::forall(std::move(b), std::move(body));
            };
            if (f.bound().name == v.name) {
                return f;
            }
            const VarSet body_free = free_vars(f.sub());
            if (body_free.count(v) == 0) {
                return f;
            }
            Var b = f.bound();
            Formula body = f.sub();
            const VarSet repl_free = free_vars(replacement);
            const auto clashes = [&](const std::string &name) {
                for (const auto &x : repl_free) {
                    if (x.name == name) {
                        return true;
                    }
                }
                return false;
            };
            if (clashes(b.name)) {
                std::set<std::string> taken{v.name};
                for (const auto &x : repl_free) {
                    taken.insert(x.name);
                }
                for (const auto &x : body_free) {
                    taken.insert(x.name);
                }
                std::string fresh;
                for (int i = 1;; ++i) {
                    fresh = b.name + "_" + std::to_string(i);
                    if (taken.count(fresh) == 0) {
                        break;
                    }
                }
                Var renamed{fresh, b.sort};
                body = substitute(body, b, Term::var(renamed));
                b = renamed;
            }
            return rebuild(b, substitute(body, v, replacement));
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Sort checking of an already-built tree: consistent sorts per variable
// name (free names and binder scopes), VG products with a literal factor,
// and analytic-symbol arities against the table.

namespace detail
{

inline void check_term(const Term &t, const std::map<std::string, Sort> &scope, std::map<std::string, Sort> &free,
                       const SymbolTable &symbols, const std::string &path)
{
    switch (t.kind()) {
        case TermKind::variable: {
            auto it = scope.find(t.name());
            if (it != scope.end()) {
                if (it->second != t.sort()) {
                    throw SortError(path + ": bound variable " + t.name() + ":" + to_string(it->second) + " used as "
                                    + to_string(t.sort()));
                }
                return;
            }
            auto [fit, inserted] = free.emplace(t.name(), t.sort());
            if (!inserted && fit->second != t.sort()) {
                throw SortError(path + ": free variable " + t.name() + " used with sorts " + to_string(fit->second)
                                + " and " + to_string(t.sort()));
            }
            return;
        }
        case TermKind::apply: {
            auto it = symbols.find(t.name());
            if (it == symbols.end()) {
                throw SortError(path + ": unknown analytic symbol '" + t.name() + "'");
            }
            if (static_cast<std::size_t>(it->second.arity) != t.args().size()) {
                throw SortError(path + ": symbol '" + t.name() + "' has arity " + std::to_string(it->second.arity)
                                + " but is applied to " + std::to_string(t.args().size()) + " argument(s)");
            }
            break;
        }
        case TermKind::mul:
            if (t.sort() == Sort::VG && !t.args()[0].is_constant() && !t.args()[1].is_constant()) {
                throw SortError(path + ": VG multiplication needs an integer literal factor");
            }
            break;
        default:
            break;
    }
    for (const auto &a : t.args()) {
        if (a.sort() != Sort::VF && (t.kind() == TermKind::ord || t.kind() == TermKind::ac || t.kind() == TermKind::apply)) {
            throw SortError(path + ": argument of " + t.to_string() + " is not VF");
        }
        check_term(a, scope, free, symbols, path);
    }
}

inline void check_formula(const Formula &f, std::map<std::string, Sort> &scope, std::map<std::string, Sort> &free,
                          const SymbolTable &symbols, const std::string &path)
{
    if (f.is_atom()) {
        const std::string here = path + "/atom(" + f.to_string() + ")";
        if (f.lhs().sort() != f.rhs().sort()) {
            throw SortError(here + ": sides have sorts " + to_string(f.lhs().sort()) + " and " + to_string(f.rhs().sort()));
        }
        if (f.kind() != FormulaKind::eq && f.lhs().sort() != Sort::VG) {
            throw SortError(here + ": order comparison outside VG");
        }
        check_term(f.lhs(), scope, free, symbols, here);
        check_term(f.rhs(), scope, free, symbols, here);
        return;
    }
    if (f.is_quantifier()) {
        auto inner = scope;
        inner[f.bound().name] = f.bound().sort;
        check_formula(f.sub(), inner, free, symbols,
                      path + (f.kind() == FormulaKind::exists ? "/E " : "/A ") + f.bound().name);
        return;
    }
    for (std::size_t i = 0; i < f.subs().size(); ++i) {
        check_formula(f.sub(i), scope, free, symbols, path + "/" + std::to_string(i));
    }
}

} // namespace detail

inline void sort_check(const Formula &f, const SymbolTable &symbols = {})
{
    std::map<std::string, Sort> scope, free;
    detail::check_formula(f, scope, free, symbols, "");
}

// ---------------------------------------------------------------------------
// Printing.

namespace detail
{

inline int term_prec(const Term &t)
{
    switch (t.kind()) {
        case TermKind::add:
        case TermKind::sub:
            return 1;
        case TermKind::mul:
            return 2;
        case TermKind::neg:
            return 3;
        case TermKind::constant:
            return t.value() < 0 ? 3 : 4;
        default:
            return 4;
    }
}

// Free variables get a sort annotation on their first printed occurrence.
struct Printer {
    std::set<std::string> annotated;
    std::vector<std::string> scope;

    bool is_bound(const std::string &name) const
    {
        for (const auto &s : scope) {
            if (s == name) {
                return true;
            }
        }
        return false;
    }

    std::string term(const Term &t, int min_prec)
    {
        std::string s = term_raw(t);
        return term_prec(t) < min_prec ? "(" + s + ")" : s;
    }

    std::string term_raw(const Term &t)
    {
        switch (t.kind()) {
            case TermKind::variable:
                if (!is_bound(t.name()) && annotated.insert(t.name()).second) {
                    return t.name() + ":" + to_string(t.sort());
                }
                return t.name();
            case TermKind::constant:
                return std::to_string(t.value());
            case TermKind::add:
                return term(t.args()[0], 1) + " + " + term(t.args()[1], 2);
            case TermKind::sub:
                return term(t.args()[0], 1) + " - " + term(t.args()[1], 2);
            case TermKind::mul:
                return term(t.args()[0], 2) + " * " + term(t.args()[1], 3);
            case TermKind::neg:
                return "-" + term(t.args()[0], 4);
            case TermKind::ord:
                return "ord(" + term(t.args()[0], 0) + ")";
            case TermKind::ac:
                return "ac(" + term(t.args()[0], 0) + ")";
            case TermKind::apply: {
                std::string s = t.name() + "(";
                for (std::size_t i = 0; i < t.args().size(); ++i) {
                    s += (i != 0 ? ", " : "") + term(t.args()[i], 0);
                }
                return s + ")";
            }
        }
        return "?";
    }

    static int prec(const Formula &f)
    {
        switch (f.kind()) {
            case FormulaKind::implies:
                return 1;
            case FormulaKind::disj:
                return 2;
            case FormulaKind::conj:
                return 3;
            default:
                return 4;
        }
    }

    struct Out {
        std::string text;
        bool open; // ends in an unparenthesised quantifier body
    };

    // A quantifier body extends as far right as possible, so a non-trailing
    // operand that ends open must be parenthesised.
    Out operand(const Formula &f, int min_prec, bool trailing)
    {
        Out o = formula(f);
        if (prec(f) < min_prec || (!trailing && o.open)) {
            return {"(" + o.text + ")", false};
        }
        return o;
    }

    Out binary(const Formula &f, const char *op, int lhs_prec, int rhs_prec)
    {
        Out l = operand(f.sub(0), lhs_prec, false);
        Out r = operand(f.sub(1), rhs_prec, true);
        return {l.text + op + r.text, r.open};
    }

    Out formula(const Formula &f)
    {
        switch (f.kind()) {
            case FormulaKind::eq:
                return {term(f.lhs(), 0) + " = " + term(f.rhs(), 0), false};
            case FormulaKind::le:
                return {term(f.lhs(), 0) + " <= " + term(f.rhs(), 0), false};
            case FormulaKind::ge:
                return {term(f.lhs(), 0) + " >= " + term(f.rhs(), 0), false};
            case FormulaKind::lt:
                return {term(f.lhs(), 0) + " < " + term(f.rhs(), 0), false};
            case FormulaKind::conj:
                return binary(f, " /\\ ", 3, 4);
            case FormulaKind::disj:
                return binary(f, " \\/ ", 2, 3);
            case FormulaKind::implies:
                return binary(f, " -> ", 2, 1);
            case FormulaKind::neg: {
                Out o = operand(f.sub(), 4, true);
                return {"~" + o.text, o.open};
            }
            case FormulaKind::exists:
            case FormulaKind::forall: {
                std::string head = std::string(f.kind() == FormulaKind::exists ? "E " : "A ") + f.bound().name + ":"
                                   + to_string(f.bound().sort) + ". ";
                scope.push_back(f.bound().name);
                Out body = formula(f.sub());
                scope.pop_back();
                return {head + body.text, true};
            }
        }
        return {"?", false};
    }
};

} // namespace detail

// Stand-alone terms print without sort annotations.
inline std::string Term::to_string() const
{
    detail::Printer p;
    for (const auto &v : free_vars(*this)) {
        p.annotated.insert(v.name);
    }
    return p.term(*this, 0);
}

inline std::string Formula::to_string() const
{
    detail::Printer p;
    return p.formula(*this).text;
}

// ---------------------------------------------------------------------------
// Parsing. Grammar (whitespace-insensitive):
//
//   formula  := disj ('->' formula)?
//   disj     := conj ('\/' conj)*
//   conj     := unary ('/\' unary)*
//   unary    := '~' unary | ('E'|'A') ident ':' SORT '.' formula
//             | '(' formula ')' | term ('='|'<='|'>='|'<') term
//   term     := prod (('+'|'-') prod)*
//   prod     := factor ('*' factor)*
//   factor   := '-' factor | integer | ident [':' SORT]
//             | ('ord'|'ac'|ident) '(' term (',' term)* ')' | '(' term ')'
//
// Sorts of free variables and literals are inferred; annotations `x:VF`
// pin them, and conflicts are SortErrors.

namespace detail
{

struct Token {
    enum Kind { ident, integer, sym, end } kind;
    std::string text;
    std::size_t pos;
};

inline std::vector<Token> tokenize(std::string_view src)
{
    std::vector<Token> out;
    std::size_t i = 0;
    static const char *const multi[] = {"/\\", "\\/", "->", "<=", ">="};
    while (i < src.size()) {
        const auto c = static_cast<unsigned char>(src[i]);
        if (std::isspace(c) != 0) {
            ++i;
            continue;
        }
        if (std::isalpha(c) != 0 || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) != 0 || src[j] == '_')) {
                ++j;
            }
            out.push_back({Token::ident, std::string(src.substr(i, j - i)), i});
            i = j;
            continue;
        }
        if (std::isdigit(c) != 0) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])) != 0) {
                ++j;
            }
            out.push_back({Token::integer, std::string(src.substr(i, j - i)), i});
            i = j;
            continue;
        }
        bool matched = false;
        for (const char *m : multi) {
            if (src.substr(i, 2) == m) {
                out.push_back({Token::sym, m, i});
                i += 2;
                matched = true;
                break;
            }
        }
        if (matched) {
            continue;
        }
        if (std::string_view("()+-*=<,.:~").find(static_cast<char>(c)) != std::string_view::npos) {
            out.push_back({Token::sym, std::string(1, static_cast<char>(c)), i});
            ++i;
            continue;
        }
        throw ParseError(i, "a token", std::string(1, static_cast<char>(c)));
    }
    out.push_back({Token::end, "", src.size()});
    return out;
}

// Untyped trees produced by the parser, typed afterwards by inference.
struct RawTerm {
    TermKind kind;
    std::string name;
    long long value = 0;
    std::optional<Sort> annotation;
    std::vector<RawTerm> args;
    std::size_t pos = 0;
    int slot = -1; // sort-inference slot
};

struct RawFormula {
    FormulaKind kind;
    std::vector<RawTerm> terms;
    std::vector<RawFormula> subs;
    Var bound;
    std::size_t pos = 0;
};

class Parser
{
public:
    explicit Parser(std::string_view src) : toks_(tokenize(src)) {}

    RawFormula parse_all()
    {
        RawFormula f = formula();
        if (peek().kind != Token::end) {
            fail("end of input or a connective");
        }
        return f;
    }

private:
    const Token &peek(std::size_t ahead = 0) const
    {
        return toks_[std::min(i_ + ahead, toks_.size() - 1)];
    }
    bool at_sym(std::string_view s, std::size_t ahead = 0) const
    {
        return peek(ahead).kind == Token::sym && peek(ahead).text == s;
    }
    [[noreturn]] void fail(const std::string &expected) const
    {
        throw ParseError(peek().pos, expected, peek().text);
    }
    void expect_sym(std::string_view s)
    {
        if (!at_sym(s)) {
            fail("'" + std::string(s) + "'");
        }
        ++i_;
    }
    Sort sort_name()
    {
        if (peek().kind == Token::ident) {
            if (auto s = sort_from_string(peek().text)) {
                ++i_;
                return *s;
            }
        }
        fail("a sort (VF, RF or VG)");
    }
    static bool reserved(const std::string &s)
    {
        return s == "E" || s == "A" || s == "ord" || s == "ac";
    }

    RawFormula formula()
    {
        // Nesting depth guard keeps adversarial input from exhausting the stack.
        if (++depth_ > 2000) {
            fail("shallower nesting");
        }
        const std::size_t pos = peek().pos;
        RawFormula lhs = disjunction();
        if (at_sym("->")) {
            ++i_;
            RawFormula rhs = formula();
            lhs = RawFormula{FormulaKind::implies, {}, {std::move(lhs), std::move(rhs)}, {}, pos};
        }
        --depth_;
        return lhs;
    }
    RawFormula disjunction()
    {
        const std::size_t pos = peek().pos;
        RawFormula lhs = conjunction();
        while (at_sym("\\/")) {
            ++i_;
            RawFormula rhs = conjunction();
            lhs = RawFormula{FormulaKind::disj, {}, {std::move(lhs), std::move(rhs)}, {}, pos};
        }
        return lhs;
    }
    RawFormula conjunction()
    {
        const std::size_t pos = peek().pos;
        RawFormula lhs = unary();
        while (at_sym("/\\")) {
            ++i_;
            RawFormula rhs = unary();
            lhs = RawFormula{FormulaKind::conj, {}, {std::move(lhs), std::move(rhs)}, {}, pos};
        }
        return lhs;
    }
    RawFormula unary()
    {
        if (++depth_ > 2000) {
            fail("shallower nesting");
        }
        const std::size_t pos = peek().pos;
        RawFormula out;
        if (at_sym("~")) {
            ++i_;
            RawFormula body = unary();
            out = RawFormula{FormulaKind::neg, {}, {std::move(body)}, {}, pos};
        } else if (peek().kind == Token::ident && (peek().text == "E" || peek().text == "A")) {
            const bool ex = peek().text == "E";
            ++i_;
            if (peek().kind != Token::ident || reserved(peek().text) || sort_from_string(peek().text)) {
                fail("a variable name");
            }
            std::string name = peek().text;
            ++i_;
            expect_sym(":");
            const Sort s = sort_name();
            expect_sym(".");
            RawFormula body = formula();
            out = RawFormula{ex ? FormulaKind::exists : FormulaKind::forall, {}, {std::move(body)}, Var{name, s}, pos};
        } else if (at_sym("(")) {
            // Either a parenthesised formula or an atom whose left term starts
            // with '('. Try the formula reading first and fall back.
            const std::size_t save = i_;
            const int save_depth = depth_;
            bool ok = false;
            try {
                ++i_;
                out = formula();
                expect_sym(")");
                ok = !(at_sym("=") || at_sym("<=") || at_sym(">=") || at_sym("<") || at_sym("+") || at_sym("-")
                       || at_sym("*"));
            } catch (const ParseError &) {
                ok = false;
            }
            if (!ok) {
                i_ = save;
                depth_ = save_depth;
                out = atom();
            }
        } else {
            out = atom();
        }
        --depth_;
        return out;
    }
    RawFormula atom()
    {
        const std::size_t pos = peek().pos;
        RawTerm lhs = term();
        FormulaKind k;
        if (at_sym("=")) {
            k = FormulaKind::eq;
        } else if (at_sym("<=")) {
            k = FormulaKind::le;
        } else if (at_sym(">=")) {
            k = FormulaKind::ge;
        } else if (at_sym("<")) {
            k = FormulaKind::lt;
        } else {
            fail("'=', '<=', '>=' or '<'");
        }
        ++i_;
        RawTerm rhs = term();
        return RawFormula{k, {std::move(lhs), std::move(rhs)}, {}, {}, pos};
    }

    RawTerm term()
    {
        if (++depth_ > 2000) {
            fail("shallower nesting");
        }
        RawTerm lhs = product();
        while (at_sym("+") || at_sym("-")) {
            const std::size_t pos = peek().pos;
            const TermKind k = at_sym("+") ? TermKind::add : TermKind::sub;
            ++i_;
            RawTerm rhs = product();
            lhs = RawTerm{k, {}, 0, std::nullopt, {std::move(lhs), std::move(rhs)}, pos};
        }
        --depth_;
        return lhs;
    }
    RawTerm product()
    {
        RawTerm lhs = factor();
        while (at_sym("*")) {
            const std::size_t pos = peek().pos;
            ++i_;
            RawTerm rhs = factor();
            lhs = RawTerm{TermKind::mul, {}, 0, std::nullopt, {std::move(lhs), std::move(rhs)}, pos};
        }
        return lhs;
    }
    RawTerm factor()
    {
        if (++depth_ > 2000) {
            fail("shallower nesting");
        }
        const Token tok = peek();
        RawTerm out;
        if (at_sym("-")) {
            ++i_;
            RawTerm inner = factor();
            if (inner.kind == TermKind::constant) {
                inner.value = -inner.value;
                inner.pos = tok.pos;
                out = std::move(inner);
            } else {
                out = RawTerm{TermKind::neg, {}, 0, std::nullopt, {std::move(inner)}, tok.pos};
            }
        } else if (tok.kind == Token::integer) {
            long long v = 0;
            const auto res = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
            if (res.ec != std::errc()) {
                fail("an integer literal that fits in 64 bits");
            }
            ++i_;
            out = RawTerm{TermKind::constant, {}, v, std::nullopt, {}, tok.pos};
        } else if (tok.kind == Token::ident) {
            if (tok.text == "E" || tok.text == "A" || sort_from_string(tok.text)) {
                fail("a term");
            }
            ++i_;
            if (at_sym("(")) {
                ++i_;
                std::vector<RawTerm> args;
                args.push_back(term());
                while (at_sym(",")) {
                    ++i_;
                    args.push_back(term());
                }
                expect_sym(")");
                TermKind k = TermKind::apply;
                if (tok.text == "ord" || tok.text == "ac") {
                    if (args.size() != 1) {
                        throw SortError(tok.text + " takes exactly one argument (offset " + std::to_string(tok.pos) + ")");
                    }
                    k = tok.text == "ord" ? TermKind::ord : TermKind::ac;
                }
                out = RawTerm{k, tok.text, 0, std::nullopt, std::move(args), tok.pos};
            } else {
                if (tok.text == "ord" || tok.text == "ac") {
                    fail("'('");
                }
                std::optional<Sort> ann;
                if (at_sym(":")) {
                    ++i_;
                    ann = sort_name();
                }
                out = RawTerm{TermKind::variable, tok.text, 0, ann, {}, tok.pos};
            }
        } else if (at_sym("(")) {
            ++i_;
            out = term();
            expect_sym(")");
        } else {
            fail("a term");
        }
        --depth_;
        return out;
    }

    std::vector<Token> toks_;
    std::size_t i_ = 0;
    int depth_ = 0;
};

// Union-find over sort slots; each class may carry a fixed sort.
class SortInference
{
public:
    explicit SortInference(const SymbolTable &symbols) : symbols_(symbols) {}

    Formula run(RawFormula &f)
    {
        visit(f);
        return build(f);
    }

private:
    int fresh(bool has_var)
    {
        parent_.push_back(static_cast<int>(parent_.size()));
        fixed_.push_back(std::nullopt);
        has_var_.push_back(has_var);
        return parent_.back();
    }
    int find(int a)
    {
        while (parent_[static_cast<std::size_t>(a)] != a) {
            a = parent_[static_cast<std::size_t>(a)] = parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(a)])];
        }
        return a;
    }
    void fix(int a, Sort s, std::size_t pos, const std::string &what)
    {
        a = find(a);
        auto &cur = fixed_[static_cast<std::size_t>(a)];
        if (cur && *cur != s) {
            throw SortError("at offset " + std::to_string(pos) + ": " + what + " must be " + to_string(s)
                            + " but is " + to_string(*cur));
        }
        cur = s;
    }
    void unify(int a, int b, std::size_t pos, const std::string &what)
    {
        a = find(a);
        b = find(b);
        if (a == b) {
            return;
        }
        const auto sa = fixed_[static_cast<std::size_t>(a)], sb = fixed_[static_cast<std::size_t>(b)];
        if (sa && sb && *sa != *sb) {
            throw SortError("at offset " + std::to_string(pos) + ": " + what + " mixes " + to_string(*sa) + " and "
                            + to_string(*sb));
        }
        parent_[static_cast<std::size_t>(a)] = b;
        if (!sb) {
            fixed_[static_cast<std::size_t>(b)] = sa;
        }
        has_var_[static_cast<std::size_t>(b)] = has_var_[static_cast<std::size_t>(b)] || has_var_[static_cast<std::size_t>(a)];
    }
    Sort resolved(int slot)
    {
        const int r = find(slot);
        if (auto s = fixed_[static_cast<std::size_t>(r)]) {
            return *s;
        }
        // Unconstrained: variables default to VF, bare literals to VG.
        return has_var_[static_cast<std::size_t>(r)] ? Sort::VF : Sort::VG;
    }

    int lookup(const std::string &name)
    {
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it) {
            if (it->first == name) {
                return it->second;
            }
        }
        auto [it, inserted] = free_.emplace(name, 0);
        if (inserted) {
            it->second = fresh(true);
        }
        return it->second;
    }

    void visit(RawTerm &t)
    {
        for (auto &a : t.args) {
            visit(a);
        }
        switch (t.kind) {
            case TermKind::variable:
                t.slot = lookup(t.name);
                if (t.annotation) {
                    fix(t.slot, *t.annotation, t.pos, "variable " + t.name);
                }
                break;
            case TermKind::constant:
                t.slot = fresh(false);
                break;
            case TermKind::add:
            case TermKind::sub:
            case TermKind::mul:
                t.slot = t.args[0].slot;
                unify(t.args[0].slot, t.args[1].slot, t.pos, "arithmetic");
                break;
            case TermKind::neg:
                t.slot = t.args[0].slot;
                break;
            case TermKind::ord:
            case TermKind::ac:
                fix(t.args[0].slot, Sort::VF, t.args[0].pos, "argument of " + t.name);
                t.slot = fresh(false);
                fix(t.slot, t.kind == TermKind::ord ? Sort::VG : Sort::RF, t.pos, t.name + "(...)");
                break;
            case TermKind::apply: {
                auto it = symbols_.find(t.name);
                if (it == symbols_.end()) {
                    throw SortError("at offset " + std::to_string(t.pos) + ": unknown analytic symbol '" + t.name + "'");
                }
                if (static_cast<std::size_t>(it->second.arity) != t.args.size()) {
                    throw SortError("at offset " + std::to_string(t.pos) + ": symbol '" + t.name + "' has arity "
                                    + std::to_string(it->second.arity) + " but is applied to "
                                    + std::to_string(t.args.size()) + " argument(s)");
                }
                for (auto &a : t.args) {
                    fix(a.slot, Sort::VF, a.pos, "argument of " + t.name);
                }
                t.slot = fresh(false);
                fix(t.slot, Sort::VF, t.pos, t.name + "(...)");
                break;
            }
        }
    }

    void visit(RawFormula &f)
    {
        switch (f.kind) {
            case FormulaKind::eq:
            case FormulaKind::le:
            case FormulaKind::ge:
            case FormulaKind::lt:
                visit(f.terms[0]);
                visit(f.terms[1]);
                unify(f.terms[0].slot, f.terms[1].slot, f.pos, "comparison");
                if (f.kind != FormulaKind::eq) {
                    fix(f.terms[0].slot, Sort::VG, f.pos, "order comparison");
                }
                break;
            case FormulaKind::exists:
            case FormulaKind::forall: {
                const int slot = fresh(true);
                fix(slot, f.bound.sort, f.pos, "bound variable " + f.bound.name);
                scope_.emplace_back(f.bound.name, slot);
                visit(f.subs[0]);
                scope_.pop_back();
                break;
            }
            default:
                for (auto &s : f.subs) {
                    visit(s);
                }
        }
    }

    Term build(const RawTerm &t)
    {
        const Sort s = resolved(t.slot);
        std::vector<Term> args;
        for (const auto &a : t.args) {
            args.push_back(build(a));
        }
        try {
            switch (t.kind) {
                case TermKind::variable:
                    return Term::var(t.name, s);
                case TermKind::constant:
                    return Term::constant(t.value, s);
                case TermKind::add:
                    return Term::add(args[0], args[1]);
                case TermKind::sub:
                    return Term::sub(args[0], args[1]);
                case TermKind::mul:
                    return Term::mul(args[0], args[1]);
                case TermKind::neg:
                    return Term::neg(args[0]);
                case TermKind::ord:
                    return Term::ord(args[0]);
                case TermKind::ac:
                    return Term::ac(args[0]);
                case TermKind::apply:
                    return Term::apply(t.name, std::move(args));
            }
        } catch (const SortError &e) {
            throw SortError("at offset " + std::to_string(t.pos) + ": " + e.what());
        }
        throw SortError("unreachable term kind");
    }

    Formula build(const RawFormula &f)
    {
        try {
            switch (f.kind) {
                case FormulaKind::eq:
                    return Formula::eq(build(f.terms[0]), build(f.terms[1]));
                case FormulaKind::le:
                    return Formula::le(build(f.terms[0]), build(f.terms[1]));
                case FormulaKind::ge:
                    return Formula::ge(build(f.terms[0]), build(f.terms[1]));
                case FormulaKind::lt:
                    return Formula::lt(build(f.terms[0]), build(f.terms[1]));
                case FormulaKind::conj:
                    return Formula::conj(build(f.subs[0]), build(f.subs[1]));
                case FormulaKind::disj:
                    return Formula::disj(build(f.subs[0]), build(f.subs[1]));
                case FormulaKind::implies:
                    return Formula::implies(build(f.subs[0]), build(f.subs[1]));
                case FormulaKind::neg:
                    return Formula::negation(build(f.subs[0]));
                case FormulaKind::exists:
                    return Formula::exists(f.bound, build(f.subs[0]));
                case FormulaKind::forall:
                    return Formula::forall(f.bound, build(f.subs[0]));
            }
        } catch (const SortError &e) {
            const std::string msg = e.what();
            if (msg.find("at offset") != std::string::npos) {
                throw;
            }
            throw SortError("at offset " + std::to_string(f.pos) + ": " + msg);
        }
        throw SortError("unreachable formula kind");
    }

    const SymbolTable &symbols_;
    std::vector<int> parent_;
    std::vector<std::optional<Sort>> fixed_;
    std::vector<bool> has_var_;
    std::vector<std::pair<std::string, int>> scope_;
    std::map<std::string, int> free_;
};

} // namespace detail

inline Formula parse(std::string_view text, const SymbolTable &symbols = {})
{
    detail::Parser parser(text);
    detail::RawFormula raw = parser.parse_all();
    detail::SortInference inference(symbols);
    Formula f = inference.run(raw);
    sort_check(f, symbols);
    return f;
}

} // namespace poincare

#endif
