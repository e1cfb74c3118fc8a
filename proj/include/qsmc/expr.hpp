#pragma once

// Small expression language for plant, disturbance and reference signals.
//
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := base ('^' factor)?                 right associative
//   base   := number | 't' | 'pi' | 'x'<i> | call | '(' expr ')' | '-' base
//   call   := fn '(' expr ')' | ('min' | 'max') '(' expr ',' expr ')'
//           | 'pw' '(' cond ',' expr (',' cond ',' expr)* ',' expr ')'
//   cond   := expr ('<' | '<=' | '>' | '>=') expr
//
// pw() returns the value paired with the first condition that holds, else the
// trailing default.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "qsmc/sliding_surface.hpp"

namespace qsmc::expr {

enum class NodeKind { Number, Pi, Time, State, Neg, Add, Sub, Mul, Div, Pow, Call, Compare, Piecewise };
enum class Func { Sin, Cos, Tan, Exp, Ln, Sqrt, Abs, Sign, Min, Max };
enum class RelOp { Less, LessEq, Greater, GreaterEq };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    NodeKind kind = NodeKind::Number;
    double value = 0.0;  // Number
    int index = 0;       // State: 1-based
    Func func = Func::Sin;
    RelOp rel = RelOp::Less;
    std::vector<NodePtr> children;
};

inline bool structurally_equal(const Node& a, const Node& b) {
    if (a.kind != b.kind || a.children.size() != b.children.size()) return false;
    switch (a.kind) {
        case NodeKind::Number:
            if (a.value != b.value) return false;
            break;
        case NodeKind::State:
            if (a.index != b.index) return false;
            break;
        case NodeKind::Call:
            if (a.func != b.func) return false;
            break;
        case NodeKind::Compare:
            if (a.rel != b.rel) return false;
            break;
        default:
            break;
    }
    for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!structurally_equal(*a.children[i], *b.children[i])) return false;
    return true;
}

inline constexpr std::array<std::pair<std::string_view, Func>, 10> function_names{{
    {"sin", Func::Sin},
    {"cos", Func::Cos},
    {"tan", Func::Tan},
    {"exp", Func::Exp},
    {"ln", Func::Ln},
    {"sqrt", Func::Sqrt},
    {"abs", Func::Abs},
    {"sign", Func::Sign},
    {"min", Func::Min},
    {"max", Func::Max},
}};

inline std::string_view function_name(Func f) {
    for (const auto& [name, fn] : function_names)
        if (fn == f) return name;
    return "?";
}

inline std::size_t function_arity(Func f) {
    return (f == Func::Min || f == Func::Max) ? 2 : 1;
}

inline std::string_view relop_text(RelOp r) {
    switch (r) {
        case RelOp::Less: return "<";
        case RelOp::LessEq: return "<=";
        case RelOp::Greater: return ">";
        case RelOp::GreaterEq: return ">=";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Node builders. These enforce arity and literal rules; the parser and the
// test generators both go through them.

inline NodePtr number(double v) {
    if (!std::isfinite(v) || v < 0.0 || std::signbit(v))
        throw std::invalid_argument("literals must be finite and non-negative");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Number;
    n->value = v;
    return n;
}

inline NodePtr leaf(NodeKind kind) {
    if (kind != NodeKind::Pi && kind != NodeKind::Time)
        throw std::invalid_argument("leaf() builds only pi or t");
    auto n = std::make_shared<Node>();
    n->kind = kind;
    return n;
}

inline NodePtr state(int index) {
    if (index < 1) throw std::invalid_argument("state index must be >= 1");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::State;
    n->index = index;
    return n;
}

inline NodePtr negate(NodePtr a) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Neg;
    n->children = {std::move(a)};
    return n;
}

inline NodePtr binary(NodeKind op, NodePtr a, NodePtr b) {
    if (op != NodeKind::Add && op != NodeKind::Sub && op != NodeKind::Mul &&
        op != NodeKind::Div && op != NodeKind::Pow)
        throw std::invalid_argument("not a binary operator");
    auto n = std::make_shared<Node>();
    n->kind = op;
    n->children = {std::move(a), std::move(b)};
    return n;
}

inline NodePtr call(Func f, std::vector<NodePtr> args) {
    if (args.size() != function_arity(f))
        throw std::invalid_argument(std::string(function_name(f)) + " expects " +
                                    std::to_string(function_arity(f)) + " argument(s)");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Call;
    n->func = f;
    n->children = std::move(args);
    return n;
}

inline NodePtr compare(RelOp r, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Compare;
    n->rel = r;
    n->children = {std::move(a), std::move(b)};
    return n;
}

/// args = [cond1, value1, ..., cond_k, value_k, default], k >= 1.
inline NodePtr piecewise(std::vector<NodePtr> args) {
    if (args.size() < 3 || args.size() % 2 == 0)
        throw std::invalid_argument(
            "pw expects condition/value pairs followed by a default value");
    for (std::size_t i = 0; i < args.size(); ++i) {
        const bool is_cond = (i % 2 == 0) && (i + 1 < args.size());
        if (is_cond != (args[i]->kind == NodeKind::Compare))
            throw std::invalid_argument(
                is_cond ? "pw argument " + std::to_string(i + 1) + " must be a comparison"
                        : "pw argument " + std::to_string(i + 1) +
                              " must be a value, not a comparison");
    }
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Piecewise;
    n->children = std::move(args);
    return n;
}

// ---------------------------------------------------------------------------

inline void format_number(std::string& out, double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.append(buf.data(), end);
}

inline void pretty_into(std::string& out, const Node& n) {
    switch (n.kind) {
        case NodeKind::Number: format_number(out, n.value); return;
        case NodeKind::Pi: out += "pi"; return;
        case NodeKind::Time: out += "t"; return;
        case NodeKind::State:
            out += 'x';
            out += std::to_string(n.index);
            return;
        case NodeKind::Neg:
            out += "(-";
            pretty_into(out, *n.children[0]);
            out += ')';
            return;
        case NodeKind::Add:
        case NodeKind::Sub:
        case NodeKind::Mul:
        case NodeKind::Div:
        case NodeKind::Pow: {
            static constexpr std::string_view ops[] = {" + ", " - ", " * ", " / ", " ^ "};
            out += '(';
            pretty_into(out, *n.children[0]);
            out += ops[static_cast<int>(n.kind) - static_cast<int>(NodeKind::Add)];
            pretty_into(out, *n.children[1]);
            out += ')';
            return;
        }
        case NodeKind::Compare:
            pretty_into(out, *n.children[0]);
            out += ' ';
            out += relop_text(n.rel);
            out += ' ';
            pretty_into(out, *n.children[1]);
            return;
        case NodeKind::Call:
        case NodeKind::Piecewise:
            out += n.kind == NodeKind::Call ? function_name(n.func) : "pw";
            out += '(';
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i) out += ", ";
                pretty_into(out, *n.children[i]);
            }
            out += ')';
            return;
    }
}

inline std::string pretty(const Node& n) {
    std::string s;
    pretty_into(s, n);
    return s;
}

// ---------------------------------------------------------------------------

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int line, int column)
        : std::runtime_error("line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ": " + msg),
          line_(line),
          column_(column) {}
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

class EvalError : public std::runtime_error {
public:
    EvalError(const std::string& msg, std::string subexpression)
        : std::runtime_error(msg + " in '" + subexpression + "'"),
          subexpression_(std::move(subexpression)) {}
    const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

struct EvalContext {
    double t = 0.0;
    std::span<const double> x;
};

inline double eval_node(const Node& n, const EvalContext& ctx);

namespace detail {

inline double eval_call(const Node& n, const EvalContext& ctx) {
    const double a = eval_node(*n.children[0], ctx);
    switch (n.func) {
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Tan: return std::tan(a);
        case Func::Exp: return std::exp(a);
        case Func::Ln:
            if (!(a > 0.0)) throw EvalError("ln of non-positive argument", pretty(n));
            return std::log(a);
        case Func::Sqrt:
            if (a < 0.0) throw EvalError("sqrt of negative argument", pretty(n));
            return std::sqrt(a);
        case Func::Abs: return std::abs(a);
        case Func::Sign: return static_cast<double>(qsmc::sign(a));
        case Func::Min: return std::min(a, eval_node(*n.children[1], ctx));
        case Func::Max: return std::max(a, eval_node(*n.children[1], ctx));
    }
    return 0.0;
}

inline bool eval_compare(const Node& n, const EvalContext& ctx) {
    const double a = eval_node(*n.children[0], ctx);
    const double b = eval_node(*n.children[1], ctx);
    switch (n.rel) {
        case RelOp::Less: return a < b;
        case RelOp::LessEq: return a <= b;
        case RelOp::Greater: return a > b;
        case RelOp::GreaterEq: return a >= b;
    }
    return false;
}

}  // namespace detail

inline double eval_node(const Node& n, const EvalContext& ctx) {
    switch (n.kind) {
        case NodeKind::Number: return n.value;
        case NodeKind::Pi: return std::numbers::pi;
        case NodeKind::Time: return ctx.t;
        case NodeKind::State: {
            const auto i = static_cast<std::size_t>(n.index);
            if (i > ctx.x.size())
                throw EvalError("state vector has only " + std::to_string(ctx.x.size()) +
                                    " entries",
                                pretty(n));
            return ctx.x[i - 1];
        }
        case NodeKind::Neg: return -eval_node(*n.children[0], ctx);
        case NodeKind::Add: return eval_node(*n.children[0], ctx) + eval_node(*n.children[1], ctx);
        case NodeKind::Sub: return eval_node(*n.children[0], ctx) - eval_node(*n.children[1], ctx);
        case NodeKind::Mul: return eval_node(*n.children[0], ctx) * eval_node(*n.children[1], ctx);
        case NodeKind::Div: {
            const double num = eval_node(*n.children[0], ctx);
            const double den = eval_node(*n.children[1], ctx);
            if (den == 0.0) throw EvalError("division by zero", pretty(n));
            return num / den;
        }
        case NodeKind::Pow: {
            const double base = eval_node(*n.children[0], ctx);
            const double ex = eval_node(*n.children[1], ctx);
            const double r = std::pow(base, ex);
            if (std::isnan(r) && !std::isnan(base) && !std::isnan(ex))
                throw EvalError("power of negative base with non-integer exponent", pretty(n));
            return r;
        }
        case NodeKind::Call: return detail::eval_call(n, ctx);
        case NodeKind::Compare:
            throw EvalError("comparison used as a value", pretty(n));
        case NodeKind::Piecewise: {
            const auto& c = n.children;
            for (std::size_t i = 0; i + 1 < c.size(); i += 2)
                if (detail::eval_compare(*c[i], ctx)) return eval_node(*c[i + 1], ctx);
            return eval_node(*c.back(), ctx);
        }
    }
    return 0.0;
}

inline int max_state_index(const Node& n) {
    int m = n.kind == NodeKind::State ? n.index : 0;
    for (const auto& c : n.children) m = std::max(m, max_state_index(*c));
    return m;
}

/**
 * @brief Immutable parsed expression bound to a state dimension.
 */
class Expr {
public:
    Expr(NodePtr root, int order) : root_(std::move(root)), order_(order) {
        if (!root_) throw std::invalid_argument("null expression");
        if (order_ < 0) throw std::invalid_argument("order must be non-negative");
        if (root_->kind == NodeKind::Compare)
            throw std::invalid_argument("a comparison is not a value expression");
        if (max_state_index(*root_) > order_)
            throw std::invalid_argument("variable x" + std::to_string(max_state_index(*root_)) +
                                        " exceeds declared order " + std::to_string(order_));
    }

    double eval(const EvalContext& ctx) const {
        if (ctx.x.size() != static_cast<std::size_t>(order_))
            throw std::invalid_argument("context has " + std::to_string(ctx.x.size()) +
                                        " states, expression declared for " +
                                        std::to_string(order_));
        return eval_node(*root_, ctx);
    }
    double eval(double t, std::span<const double> x) const { return eval(EvalContext{t, x}); }

    std::string pretty() const { return expr::pretty(*root_); }
    const Node& root() const noexcept { return *root_; }
    int order() const noexcept { return order_; }

    friend bool operator==(const Expr& a, const Expr& b) {
        return a.order_ == b.order_ && structurally_equal(*a.root_, *b.root_);
    }

private:
    NodePtr root_;
    int order_;
};

// ---------------------------------------------------------------------------

namespace detail {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, Rel, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0.0;
    RelOp rel = RelOp::Less;
    int line = 1;
    int column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_space();
        Token tok;
        tok.line = line_;
        tok.column = column_;
        if (pos_ >= src_.size()) return tok;
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return lex_number(tok);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t end = pos_;
            while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) ||
                                         src_[end] == '_'))
                ++end;
            tok.kind = Tok::Ident;
            tok.text = std::string(src_.substr(pos_, end - pos_));
            advance(end - pos_);
            return tok;
        }
        auto single = [&](Tok k) {
            tok.kind = k;
            tok.text = std::string(1, c);
            advance(1);
            return tok;
        };
        switch (c) {
            case '+': return single(Tok::Plus);
            case '-': return single(Tok::Minus);
            case '*': return single(Tok::Star);
            case '/': return single(Tok::Slash);
            case '^': return single(Tok::Caret);
            case '(': return single(Tok::LParen);
            case ')': return single(Tok::RParen);
            case ',': return single(Tok::Comma);
            case '<':
            case '>': {
                const bool eq = pos_ + 1 < src_.size() && src_[pos_ + 1] == '=';
                tok.kind = Tok::Rel;
                tok.rel = c == '<' ? (eq ? RelOp::LessEq : RelOp::Less)
                                   : (eq ? RelOp::GreaterEq : RelOp::Greater);
                tok.text = std::string(relop_text(tok.rel));
                advance(eq ? 2 : 1);
                return tok;
            }
            default:
                throw ParseError(std::string("unexpected character '") + c + "'", line_, column_);
        }
    }

private:
    void advance(std::size_t n) {
        for (std::size_t i = 0; i < n; ++i, ++pos_) {
            if (src_[pos_] == '\n') {
                ++line_;
                column_ = 1;
            } else {
                ++column_;
            }
        }
    }

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            advance(1);
    }

    Token lex_number(Token tok) {
        std::size_t end = pos_;
        auto digits = [&] {
            while (end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[end]))) ++end;
        };
        digits();
        if (end < src_.size() && src_[end] == '.') {
            ++end;
            digits();
        }
        if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
            std::size_t exp_end = end + 1;
            if (exp_end < src_.size() && (src_[exp_end] == '+' || src_[exp_end] == '-')) ++exp_end;
            if (exp_end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[exp_end]))) {
                end = exp_end;
                digits();
            }
        }
        const auto text = src_.substr(pos_, end - pos_);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
            throw ParseError("malformed number '" + std::string(text) + "'", tok.line, tok.column);
        tok.kind = Tok::Number;
        tok.number = v;
        tok.text = std::string(text);
        advance(end - pos_);
        return tok;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

class Parser {
public:
    Parser(std::string_view src, int order) : lexer_(src), order_(order) { cur_ = lexer_.next(); }

    NodePtr parse_all() {
        auto e = parse_expr();
        if (cur_.kind == Tok::Rel)
            throw error("comparison is only allowed as a pw() condition", cur_);
        if (cur_.kind != Tok::End) throw error("unexpected '" + cur_.text + "'", cur_);
        return e;
    }

private:
    ParseError error(const std::string& msg, const Token& at) const {
        return ParseError(msg, at.line, at.column);
    }

    Token take() {
        Token t = cur_;
        cur_ = lexer_.next();
        return t;
    }

    void expect(Tok kind, std::string_view what) {
        if (cur_.kind != kind)
            throw error("expected " + std::string(what) +
                            (cur_.kind == Tok::End ? " at end of input"
                                                   : " before '" + cur_.text + "'"),
                        cur_);
        take();
    }

    NodePtr parse_expr() {
        auto lhs = parse_term();
        while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
            const auto op = take().kind == Tok::Plus ? NodeKind::Add : NodeKind::Sub;
            lhs = binary(op, std::move(lhs), parse_term());
        }
        return lhs;
    }

    NodePtr parse_term() {
        auto lhs = parse_factor();
        while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
            const auto op = take().kind == Tok::Star ? NodeKind::Mul : NodeKind::Div;
            lhs = binary(op, std::move(lhs), parse_factor());
        }
        return lhs;
    }

    NodePtr parse_factor() {
        auto base = parse_base();
        if (cur_.kind == Tok::Caret) {
            take();
            return binary(NodeKind::Pow, std::move(base), parse_factor());
        }
        return base;
    }

    NodePtr parse_base() {
        const Token tok = cur_;
        switch (tok.kind) {
            case Tok::Number: take(); return number(tok.number);
            case Tok::Minus: take(); return negate(parse_base());
            case Tok::LParen: {
                take();
                auto e = parse_expr();
                expect(Tok::RParen, "')'");
                return e;
            }
            case Tok::Ident: take(); return parse_identifier(tok);
            case Tok::End: throw error("unexpected end of input", tok);
            default: throw error("unexpected '" + tok.text + "'", tok);
        }
    }

    NodePtr parse_identifier(const Token& tok) {
        const std::string& id = tok.text;
        if (id == "t") return leaf(NodeKind::Time);
        if (id == "pi") return leaf(NodeKind::Pi);
        if (id.size() > 1 && id[0] == 'x' &&
            id.find_first_not_of("0123456789", 1) == std::string::npos) {
            int idx = 0;
            auto [ptr, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), idx);
            if (ec != std::errc() || idx < 1 || idx > order_)
                throw error("variable " + id + " out of range (order is " +
                                std::to_string(order_) + ")",
                            tok);
            return state(idx);
        }
        if (id == "pw") return parse_piecewise(tok);
        for (const auto& [name, fn] : function_names) {
            if (id != name) continue;
            auto args = parse_args(tok, false);
            if (args.size() != function_arity(fn))
                throw error(id + " expects " + std::to_string(function_arity(fn)) +
                                " argument(s), got " + std::to_string(args.size()),
                            tok);
            return call(fn, std::move(args));
        }
        throw error("unknown identifier '" + id + "'", tok);
    }

    std::vector<NodePtr> parse_args(const Token& fn, bool allow_conditions) {
        if (cur_.kind != Tok::LParen) throw error("expected '(' after " + fn.text, cur_);
        take();
        std::vector<NodePtr> args;
        if (cur_.kind == Tok::RParen) {
            take();
            return args;
        }
        for (;;) {
            auto arg = parse_expr();
            if (cur_.kind == Tok::Rel) {
                const Token rel = take();
                if (!allow_conditions)
                    throw error("comparison is only allowed as a pw() condition", rel);
                arg = compare(rel.rel, std::move(arg), parse_expr());
            }
            args.push_back(std::move(arg));
            if (cur_.kind == Tok::Comma) {
                take();
                continue;
            }
            expect(Tok::RParen, "',' or ')'");
            return args;
        }
    }

    NodePtr parse_piecewise(const Token& tok) {
        auto args = parse_args(tok, true);
        try {
            return piecewise(std::move(args));
        } catch (const std::invalid_argument& e) {
            throw error(e.what(), tok);
        }
    }

    Lexer lexer_;
    Token cur_;
    int order_;
};

}  // namespace detail

/// Parse source text for a plant of the given order (variables x1..x<order>).
inline Expr parse(std::string_view source, int order) {
    if (source.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw ParseError("empty expression", 1, 1);
    detail::Parser p(source, order);
    return Expr(p.parse_all(), order);
}

}  // namespace qsmc::expr
