#pragma once

// =============================================================================
// Small deterministic expression language for scalar fields and vector-field
// components. Immutable ASTs over x/y, the named constants pi and sqrt3,
// unary {-, sin, cos, sqrt, abs} and binary {+, -, *, /, ^int}. Supports
// exact-structure differentiation so nested Lie derivatives carry no
// truncation error.
// =============================================================================

#include <memory>
#include <string>

#include "filippov/geometry.hpp"

namespace filippov {

enum class ExprKind {
    Number,
    NamedConst,  // pi, sqrt3
    Var,         // x or y
    Neg,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Add,
    Sub,
    Mul,
    Div,
    Pow,  // integer exponent
};

enum class Var : char { X = 'x', Y = 'y' };

struct ExprNode;
using ExprNodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    ExprKind kind;
    double value = 0.0;        // Number / NamedConst
    std::string name;          // NamedConst
    Var var = Var::X;          // Var
    int exponent = 0;          // Pow
    ExprNodePtr a;             // unary operand / binary lhs
    ExprNodePtr b;             // binary rhs
};

// Immutable expression value; cheap to copy and safe to share across threads.
class Expr {
public:
    Expr() = default;

    static Expr number(double v);
    static Expr named(const std::string& name);
    static Expr variable(Var v);
    static Expr neg(const Expr& e);
    static Expr sin(const Expr& e);
    static Expr cos(const Expr& e);
    static Expr sqrt(const Expr& e);
    static Expr abs(const Expr& e);
    static Expr add(const Expr& l, const Expr& r);
    static Expr sub(const Expr& l, const Expr& r);
    static Expr mul(const Expr& l, const Expr& r);
    static Expr div(const Expr& l, const Expr& r);
    static Expr pow(const Expr& base, int exponent);
    static Expr from_root(ExprNodePtr root) { return Expr(std::move(root)); }

    bool empty() const { return root_ == nullptr; }
    const ExprNode* root() const { return root_.get(); }

    double eval(const Point& pt) const;  // throws EvalError on domain faults
    Expr derivative(Var v) const;        // throws DerivativeError on abs
    bool contains_abs() const;
    bool is_constant() const;            // no x/y anywhere

    std::string to_string() const;

private:
    explicit Expr(ExprNodePtr root) : root_(std::move(root)) {}
    ExprNodePtr root_;
};

// Parses the documented grammar (see docs/expressions.md). Throws ParseError
// with a byte offset and an expected-token description.
Expr parse_expr(const std::string& src);

// Central finite difference, the oracle differentiation is tested against.
double central_difference(const Expr& e, Var v, const Point& pt, double step);

std::string format_double(double v);  // shortest round-trip decimal form

}  // namespace filippov
