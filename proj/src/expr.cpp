#include "filippov/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "filippov/errors.hpp"

namespace filippov {

namespace {

ExprNodePtr make_node(ExprNode n) {
    return std::make_shared<const ExprNode>(std::move(n));
}

bool is_number(const ExprNodePtr& n, double v) {
    return n && n->kind == ExprKind::Number && n->value == v;
}

Expr share(const ExprNodePtr& p) { return Expr::from_root(p); }

}  // namespace

Expr Expr::number(double v) {
    ExprNode n;
    n.kind = ExprKind::Number;
    n.value = v;
    return from_root(make_node(std::move(n)));
}

Expr Expr::named(const std::string& name) {
    ExprNode n;
    n.kind = ExprKind::NamedConst;
    n.name = name;
    if (name == "pi") {
        n.value = M_PI;
    } else if (name == "sqrt3") {
        n.value = std::sqrt(3.0);
    } else {
        throw ParseError("unknown named constant '" + name + "'", 0);
    }
    return from_root(make_node(std::move(n)));
}

Expr Expr::variable(Var v) {
    ExprNode n;
    n.kind = ExprKind::Var;
    n.var = v;
    return from_root(make_node(std::move(n)));
}

Expr Expr::neg(const Expr& e) {
    if (is_number(e.root_, 0.0)) return number(0.0);
    if (e.root_ && e.root_->kind == ExprKind::Neg) return share(e.root_->a);
    ExprNode n;
    n.kind = ExprKind::Neg;
    n.a = e.root_;
    return from_root(make_node(std::move(n)));
}

Expr Expr::sin(const Expr& e) {
    ExprNode n;
    n.kind = ExprKind::Sin;
    n.a = e.root_;
    return from_root(make_node(std::move(n)));
}

Expr Expr::cos(const Expr& e) {
    ExprNode n;
    n.kind = ExprKind::Cos;
    n.a = e.root_;
    return from_root(make_node(std::move(n)));
}

Expr Expr::sqrt(const Expr& e) {
    ExprNode n;
    n.kind = ExprKind::Sqrt;
    n.a = e.root_;
    return from_root(make_node(std::move(n)));
}

Expr Expr::abs(const Expr& e) {
    ExprNode n;
    n.kind = ExprKind::Abs;
    n.a = e.root_;
    return from_root(make_node(std::move(n)));
}

Expr Expr::add(const Expr& l, const Expr& r) {
    if (is_number(l.root_, 0.0)) return r;
    if (is_number(r.root_, 0.0)) return l;
    ExprNode n;
    n.kind = ExprKind::Add;
    n.a = l.root_;
    n.b = r.root_;
    return from_root(make_node(std::move(n)));
}

Expr Expr::sub(const Expr& l, const Expr& r) {
    if (is_number(r.root_, 0.0)) return l;
    if (is_number(l.root_, 0.0)) return neg(r);
    ExprNode n;
    n.kind = ExprKind::Sub;
    n.a = l.root_;
    n.b = r.root_;
    return from_root(make_node(std::move(n)));
}

Expr Expr::mul(const Expr& l, const Expr& r) {
    if (is_number(l.root_, 0.0) || is_number(r.root_, 0.0)) return number(0.0);
    if (is_number(l.root_, 1.0)) return r;
    if (is_number(r.root_, 1.0)) return l;
    ExprNode n;
    n.kind = ExprKind::Mul;
    n.a = l.root_;
    n.b = r.root_;
    return from_root(make_node(std::move(n)));
}

Expr Expr::div(const Expr& l, const Expr& r) {
    if (is_number(l.root_, 0.0)) return number(0.0);
    if (is_number(r.root_, 1.0)) return l;
    ExprNode n;
    n.kind = ExprKind::Div;
    n.a = l.root_;
    n.b = r.root_;
    return from_root(make_node(std::move(n)));
}

Expr Expr::pow(const Expr& base, int exponent) {
    if (exponent == 0) return number(1.0);
    if (exponent == 1) return base;
    ExprNode n;
    n.kind = ExprKind::Pow;
    n.exponent = exponent;
    n.a = base.root_;
    return from_root(make_node(std::move(n)));
}

// -----------------------------------------------------------------------------
// Evaluation
// -----------------------------------------------------------------------------

namespace {

double eval_node(const ExprNode* n, double x, double y) {
    switch (n->kind) {
        case ExprKind::Number:
        case ExprKind::NamedConst:
            return n->value;
        case ExprKind::Var:
            return n->var == Var::X ? x : y;
        case ExprKind::Neg:
            return -eval_node(n->a.get(), x, y);
        case ExprKind::Sin:
            return std::sin(eval_node(n->a.get(), x, y));
        case ExprKind::Cos:
            return std::cos(eval_node(n->a.get(), x, y));
        case ExprKind::Sqrt: {
            double v = eval_node(n->a.get(), x, y);
            if (v < 0.0) throw EvalError("sqrt of negative value");
            return std::sqrt(v);
        }
        case ExprKind::Abs:
            return std::fabs(eval_node(n->a.get(), x, y));
        case ExprKind::Add:
            return eval_node(n->a.get(), x, y) + eval_node(n->b.get(), x, y);
        case ExprKind::Sub:
            return eval_node(n->a.get(), x, y) - eval_node(n->b.get(), x, y);
        case ExprKind::Mul:
            return eval_node(n->a.get(), x, y) * eval_node(n->b.get(), x, y);
        case ExprKind::Div: {
            double denom = eval_node(n->b.get(), x, y);
            if (denom == 0.0) throw EvalError("division by zero");
            return eval_node(n->a.get(), x, y) / denom;
        }
        case ExprKind::Pow: {
            double base = eval_node(n->a.get(), x, y);
            double r = 1.0;
            for (int i = 0; i < n->exponent; ++i) r *= base;
            return r;
        }
    }
    throw EvalError("corrupt expression node");
}

}  // namespace

double Expr::eval(const Point& pt) const {
    if (!root_) throw EvalError("empty expression");
    return eval_node(root_.get(), pt.x, pt.y);
}

// -----------------------------------------------------------------------------
// Differentiation
// -----------------------------------------------------------------------------

namespace {

Expr diff_node(const ExprNode* n, Var v) {
    switch (n->kind) {
        case ExprKind::Number:
        case ExprKind::NamedConst:
            return Expr::number(0.0);
        case ExprKind::Var:
            return Expr::number(n->var == v ? 1.0 : 0.0);
        case ExprKind::Neg:
            return Expr::neg(diff_node(n->a.get(), v));
        case ExprKind::Sin:
            return Expr::mul(Expr::cos(share(n->a)), diff_node(n->a.get(), v));
        case ExprKind::Cos:
            return Expr::neg(Expr::mul(Expr::sin(share(n->a)), diff_node(n->a.get(), v)));
        case ExprKind::Sqrt:
            return Expr::div(diff_node(n->a.get(), v),
                             Expr::mul(Expr::number(2.0), Expr::sqrt(share(n->a))));
        case ExprKind::Abs:
            throw DerivativeError("abs is not differentiable");
        case ExprKind::Add:
            return Expr::add(diff_node(n->a.get(), v), diff_node(n->b.get(), v));
        case ExprKind::Sub:
            return Expr::sub(diff_node(n->a.get(), v), diff_node(n->b.get(), v));
        case ExprKind::Mul:
            return Expr::add(Expr::mul(diff_node(n->a.get(), v), share(n->b)),
                             Expr::mul(share(n->a), diff_node(n->b.get(), v)));
        case ExprKind::Div:
            return Expr::div(
                Expr::sub(Expr::mul(diff_node(n->a.get(), v), share(n->b)),
                          Expr::mul(share(n->a), diff_node(n->b.get(), v))),
                Expr::pow(share(n->b), 2));
        case ExprKind::Pow:
            return Expr::mul(
                Expr::mul(Expr::number(static_cast<double>(n->exponent)),
                          Expr::pow(share(n->a), n->exponent - 1)),
                diff_node(n->a.get(), v));
    }
    throw DerivativeError("corrupt expression node");
}

bool node_contains_abs(const ExprNode* n) {
    if (!n) return false;
    if (n->kind == ExprKind::Abs) return true;
    return node_contains_abs(n->a.get()) || node_contains_abs(n->b.get());
}

bool node_contains_var(const ExprNode* n) {
    if (!n) return false;
    if (n->kind == ExprKind::Var) return true;
    return node_contains_var(n->a.get()) || node_contains_var(n->b.get());
}

}  // namespace

Expr Expr::derivative(Var v) const {
    if (!root_) throw DerivativeError("empty expression");
    return diff_node(root_.get(), v);
}

bool Expr::contains_abs() const { return node_contains_abs(root_.get()); }

bool Expr::is_constant() const { return !node_contains_var(root_.get()); }

// -----------------------------------------------------------------------------
// Printing
// -----------------------------------------------------------------------------

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

// Binding strength used by the printer when deciding on parentheses. A
// negative literal prints as a leading '-', so it binds like a negation.
int precedence(const ExprNode* n) {
    switch (n->kind) {
        case ExprKind::Add:
        case ExprKind::Sub:
            return 1;
        case ExprKind::Mul:
        case ExprKind::Div:
            return 2;
        case ExprKind::Neg:
            return 3;
        case ExprKind::Pow:
            return 4;
        default:
            return n->kind == ExprKind::Number && n->value < 0.0 ? 3 : 5;
    }
}

void print_node(const ExprNode* n, std::string& out);

void print_child(const ExprNode* child, int parent_prec, bool force_parens,
                 std::string& out) {
    bool parens = force_parens || precedence(child) < parent_prec;
    if (parens) out += '(';
    print_node(child, out);
    if (parens) out += ')';
}

void print_node(const ExprNode* n, std::string& out) {
    switch (n->kind) {
        case ExprKind::Number:
            out += format_double(n->value);
            return;
        case ExprKind::NamedConst:
            out += n->name;
            return;
        case ExprKind::Var:
            out += static_cast<char>(n->var);
            return;
        case ExprKind::Neg:
            out += '-';
            print_child(n->a.get(), 4, false, out);
            return;
        case ExprKind::Sin:
        case ExprKind::Cos:
        case ExprKind::Sqrt:
        case ExprKind::Abs: {
            const char* f = n->kind == ExprKind::Sin    ? "sin"
                            : n->kind == ExprKind::Cos  ? "cos"
                            : n->kind == ExprKind::Sqrt ? "sqrt"
                                                        : "abs";
            out += f;
            out += '(';
            print_node(n->a.get(), out);
            out += ')';
            return;
        }
        case ExprKind::Add:
            print_child(n->a.get(), 1, false, out);
            out += '+';
            print_child(n->b.get(), 2, false, out);
            return;
        case ExprKind::Sub:
            print_child(n->a.get(), 1, false, out);
            out += '-';
            print_child(n->b.get(), 2, false, out);
            return;
        case ExprKind::Mul:
            print_child(n->a.get(), 2, false, out);
            out += '*';
            print_child(n->b.get(), 3, false, out);
            return;
        case ExprKind::Div:
            print_child(n->a.get(), 2, false, out);
            out += '/';
            print_child(n->b.get(), 3, false, out);
            return;
        case ExprKind::Pow:
            // ^ binds tighter than unary minus; parenthesize any operator child.
            print_child(n->a.get(), 5, false, out);
            out += '^';
            out += std::to_string(n->exponent);
            return;
    }
}

}  // namespace

std::string Expr::to_string() const {
    if (!root_) return "";
    std::string out;
    print_node(root_.get(), out);
    return out;
}

// -----------------------------------------------------------------------------
// Parser: tokenizer + recursive descent
// -----------------------------------------------------------------------------

namespace {

enum class TokKind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
    TokKind kind;
    std::size_t offset;
    double number = 0.0;
    bool number_is_int = false;
    long int_value = 0;
    std::string text;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
        Token t;
        t.offset = pos_;
        if (pos_ >= src_.size()) {
            t.kind = TokKind::End;
            return t;
        }
        char c = src_[pos_];
        switch (c) {
            case '+': t.kind = TokKind::Plus; ++pos_; return t;
            case '-': t.kind = TokKind::Minus; ++pos_; return t;
            case '*': t.kind = TokKind::Star; ++pos_; return t;
            case '/': t.kind = TokKind::Slash; ++pos_; return t;
            case '^': t.kind = TokKind::Caret; ++pos_; return t;
            case '(': t.kind = TokKind::LParen; ++pos_; return t;
            case ')': t.kind = TokKind::RParen; ++pos_; return t;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t start = pos_;
            bool is_int = true;
            while (pos_ < src_.size() &&
                   (std::isdigit(static_cast<unsigned char>(src_[pos_])) ||
                    src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E' ||
                    ((src_[pos_] == '+' || src_[pos_] == '-') && pos_ > start &&
                     (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E')))) {
                if (!std::isdigit(static_cast<unsigned char>(src_[pos_]))) is_int = false;
                ++pos_;
            }
            std::string text = src_.substr(start, pos_ - start);
            t.kind = TokKind::Number;
            char* end = nullptr;
            t.number = std::strtod(text.c_str(), &end);
            if (end == text.c_str() || *end != '\0')
                throw ParseError("malformed number '" + text + "'", start, "number");
            t.number_is_int = is_int && text.size() <= 9;
            if (t.number_is_int) t.int_value = std::strtol(text.c_str(), nullptr, 10);
            t.text = std::move(text);
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            t.kind = TokKind::Ident;
            t.text = src_.substr(start, pos_ - start);
            return t;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos_,
                         "number, identifier, operator or parenthesis");
    }

private:
    const std::string& src_;
    std::size_t pos_ = 0;
};

class Parser {
public:
    explicit Parser(const std::string& src) : lex_(src) { advance(); }

    Expr parse() {
        Expr e = parse_sum();
        expect(TokKind::End, "end of input");
        return e;
    }

private:
    void advance() { cur_ = lex_.next(); }

    void expect(TokKind k, const std::string& what) {
        if (cur_.kind != k)
            throw ParseError("unexpected token at offset " + std::to_string(cur_.offset),
                             cur_.offset, what);
    }

    Expr parse_sum() {
        Expr e = parse_term();
        while (cur_.kind == TokKind::Plus || cur_.kind == TokKind::Minus) {
            bool plus = cur_.kind == TokKind::Plus;
            advance();
            Expr rhs = parse_term();
            e = plus ? Expr::add(e, rhs) : Expr::sub(e, rhs);
        }
        return e;
    }

    Expr parse_term() {
        Expr e = parse_unary();
        while (cur_.kind == TokKind::Star || cur_.kind == TokKind::Slash) {
            bool mul = cur_.kind == TokKind::Star;
            advance();
            Expr rhs = parse_unary();
            e = mul ? Expr::mul(e, rhs) : Expr::div(e, rhs);
        }
        return e;
    }

    Expr parse_unary() {
        if (cur_.kind == TokKind::Minus) {
            advance();
            return Expr::neg(parse_unary());
        }
        if (cur_.kind == TokKind::Plus) {
            advance();
            return parse_unary();
        }
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_atom();
        while (cur_.kind == TokKind::Caret) {
            std::size_t off = cur_.offset;
            advance();
            if (cur_.kind != TokKind::Number || !cur_.number_is_int)
                throw ParseError("exponent must be an unsigned integer literal",
                                 cur_.kind == TokKind::End ? off : cur_.offset,
                                 "integer literal");
            base = Expr::pow(base, static_cast<int>(cur_.int_value));
            advance();
        }
        return base;
    }

    Expr parse_atom() {
        switch (cur_.kind) {
            case TokKind::Number: {
                Expr e = Expr::number(cur_.number);
                advance();
                return e;
            }
            case TokKind::LParen: {
                advance();
                Expr e = parse_sum();
                expect(TokKind::RParen, "')'");
                advance();
                return e;
            }
            case TokKind::Ident: {
                std::string name = cur_.text;
                std::size_t off = cur_.offset;
                advance();
                if (name == "x") return Expr::variable(Var::X);
                if (name == "y") return Expr::variable(Var::Y);
                if (name == "pi" || name == "sqrt3") return Expr::named(name);
                if (name == "sin" || name == "cos" || name == "sqrt" || name == "abs") {
                    expect(TokKind::LParen, "'(' after function name");
                    advance();
                    Expr arg = parse_sum();
                    expect(TokKind::RParen, "')'");
                    advance();
                    if (name == "sin") return Expr::sin(arg);
                    if (name == "cos") return Expr::cos(arg);
                    if (name == "sqrt") return Expr::sqrt(arg);
                    return Expr::abs(arg);
                }
                throw ParseError("unknown identifier '" + name + "'", off,
                                 "x, y, pi, sqrt3, sin, cos, sqrt or abs");
            }
            default:
                throw ParseError("unexpected token at offset " + std::to_string(cur_.offset),
                                 cur_.offset, "number, identifier or '('");
        }
    }

    Lexer lex_;
    Token cur_;
};

}  // namespace

Expr parse_expr(const std::string& src) { return Parser(src).parse(); }

double central_difference(const Expr& e, Var v, const Point& pt, double step) {
    Point lo = pt, hi = pt;
    if (v == Var::X) {
        lo.x -= step;
        hi.x += step;
    } else {
        lo.y -= step;
        hi.y += step;
    }
    return (e.eval(hi) - e.eval(lo)) / (2.0 * step);
}

}  // namespace filippov
