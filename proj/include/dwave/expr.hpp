#pragma once

#include <cctype>
#include <memory>
#include <string>

#include "dwave/core.hpp"

namespace dwave {

// Tiny arithmetic expression parser for config-defined fields. Variables
// x1, x2, t; operators + - * / ^; functions sin cos tan exp log sqrt abs tanh;
// constant pi. Grammar: expr := term (('+'|'-') term)*, term := factor
// (('*'|'/') factor)*, factor := unary ('^' factor)?, unary := '-'? primary.
class Expr {
public:
    static Expr parse(const std::string& text) {
        Parser p{text, 0};
        Expr e;
        e.root_ = p.parse_expr();
        p.skip_ws();
        if (p.pos != text.size())
            throw InvalidParameter("expr: trailing characters at position " + std::to_string(p.pos) +
                                   " in '" + text + "'");
        return e;
    }

    double operator()(double t, double x1, double x2) const { return root_->eval(t, x1, x2); }

private:
    struct Node {
        virtual ~Node() = default;
        virtual double eval(double t, double x1, double x2) const = 0;
    };
    using NodePtr = std::shared_ptr<const Node>;

    struct Const : Node {
        double v;
        explicit Const(double x) : v(x) {}
        double eval(double, double, double) const override { return v; }
    };
    struct Var : Node {
        int which; // 0 = t, 1 = x1, 2 = x2
        explicit Var(int w) : which(w) {}
        double eval(double t, double x1, double x2) const override {
            return which == 0 ? t : (which == 1 ? x1 : x2);
        }
    };
    struct Unary : Node {
        int fn; // 0 neg, 1 sin, 2 cos, 3 tan, 4 exp, 5 log, 6 sqrt, 7 abs, 8 tanh
        NodePtr a;
        Unary(int f, NodePtr x) : fn(f), a(std::move(x)) {}
        double eval(double t, double x1, double x2) const override {
            double v = a->eval(t, x1, x2);
            switch (fn) {
            case 0: return -v;
            case 1: return std::sin(v);
            case 2: return std::cos(v);
            case 3: return std::tan(v);
            case 4: return std::exp(v);
            case 5: return std::log(v);
            case 6: return std::sqrt(v);
            case 7: return std::abs(v);
            default: return std::tanh(v);
            }
        }
    };
    struct Binary : Node {
        char op;
        NodePtr a, b;
        Binary(char o, NodePtr x, NodePtr y) : op(o), a(std::move(x)), b(std::move(y)) {}
        double eval(double t, double x1, double x2) const override {
            double u = a->eval(t, x1, x2), v = b->eval(t, x1, x2);
            switch (op) {
            case '+': return u + v;
            case '-': return u - v;
            case '*': return u * v;
            case '/': return u / v;
            default: return std::pow(u, v);
            }
        }
    };

    struct Parser {
        const std::string& s;
        std::size_t pos;

        void skip_ws() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool eat(char c) {
            skip_ws();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        NodePtr parse_expr() {
            NodePtr a = parse_term();
            for (;;) {
                if (eat('+'))
                    a = std::make_shared<Binary>('+', a, parse_term());
                else if (eat('-'))
                    a = std::make_shared<Binary>('-', a, parse_term());
                else
                    return a;
            }
        }
        NodePtr parse_term() {
            NodePtr a = parse_factor();
            for (;;) {
                if (eat('*'))
                    a = std::make_shared<Binary>('*', a, parse_factor());
                else if (eat('/'))
                    a = std::make_shared<Binary>('/', a, parse_factor());
                else
                    return a;
            }
        }
        NodePtr parse_factor() {
            NodePtr a = parse_unary();
            if (eat('^')) return std::make_shared<Binary>('^', a, parse_factor());
            return a;
        }
        NodePtr parse_unary() {
            if (eat('-')) return std::make_shared<Unary>(0, parse_unary());
            return parse_primary();
        }
        NodePtr parse_primary() {
            skip_ws();
            if (pos >= s.size()) throw InvalidParameter("expr: unexpected end in '" + s + "'");
            char c = s[pos];
            if (c == '(') {
                ++pos;
                NodePtr a = parse_expr();
                if (!eat(')')) throw InvalidParameter("expr: missing ')' in '" + s + "'");
                return a;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                std::size_t used = 0;
                double v = std::stod(s.substr(pos), &used);
                pos += used;
                return std::make_shared<Const>(v);
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                std::size_t start = pos;
                while (pos < s.size() &&
                       (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
                    ++pos;
                std::string name = s.substr(start, pos - start);
                if (name == "t") return std::make_shared<Var>(0);
                if (name == "x1") return std::make_shared<Var>(1);
                if (name == "x2") return std::make_shared<Var>(2);
                if (name == "pi") return std::make_shared<Const>(pi);
                static const std::pair<const char*, int> fns[] = {
                    {"sin", 1}, {"cos", 2}, {"tan", 3}, {"exp", 4},
                    {"log", 5}, {"sqrt", 6}, {"abs", 7}, {"tanh", 8}};
                for (auto [fname, id] : fns)
                    if (name == fname) {
                        if (!eat('(')) throw InvalidParameter("expr: expected '(' after " + name);
                        NodePtr a = parse_expr();
                        if (!eat(')')) throw InvalidParameter("expr: missing ')' after " + name);
                        return std::make_shared<Unary>(id, a);
                    }
                throw InvalidParameter("expr: unknown name '" + name + "' in '" + s + "'");
            }
            throw InvalidParameter(std::string("expr: unexpected character '") + c + "' in '" + s + "'");
        }
    };

    NodePtr root_;
};

} // namespace dwave
