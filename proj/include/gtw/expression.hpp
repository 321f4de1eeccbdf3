#pragma once
/**
 * Arithmetic expressions over named variables, used for user-defined systems,
 * forces, constraint sources and initial data in experiment configs.
 *
 *   expr    := term (('+' | '-') term)*
 *   term    := unary (('*' | '/') unary)*
 *   unary   := ('+' | '-') unary | power
 *   power   := primary ('^' unary)?
 *   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
 */

#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gtw/errors.hpp"

namespace gtw {

class Expression {
public:
    Expression() = default;

    static Expression parse(std::string_view text, const std::vector<std::string>& variables) {
        Parser p{text, variables, 0};
        Expression e;
        e.root_ = p.expr();
        p.skip();
        if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
        e.text_ = std::string(text);
        e.arity_ = variables.size();
        return e;
    }

    double operator()(std::span<const double> vars) const {
        if (!root_) throw ConfigError("evaluating an empty expression");
        return root_->eval(vars);
    }

    const std::string& text() const { return text_; }
    bool empty() const { return !root_; }
    std::size_t arity() const { return arity_; }

private:
    enum class Op { number, variable, neg, add, sub, mul, div, pow, call };

    struct Node {
        Op op = Op::number;
        double value = 0.0;
        std::size_t index = 0;
        std::string fn;
        std::vector<std::shared_ptr<const Node>> kids;

        double eval(std::span<const double> v) const {
            switch (op) {
                case Op::number: return value;
                case Op::variable: return v[index];
                case Op::neg: return -kids[0]->eval(v);
                case Op::add: return kids[0]->eval(v) + kids[1]->eval(v);
                case Op::sub: return kids[0]->eval(v) - kids[1]->eval(v);
                case Op::mul: return kids[0]->eval(v) * kids[1]->eval(v);
                case Op::div: return kids[0]->eval(v) / kids[1]->eval(v);
                case Op::pow: return std::pow(kids[0]->eval(v), kids[1]->eval(v));
                case Op::call: return call(v);
            }
            return 0.0;
        }

        double call(std::span<const double> v) const {
            const double a = kids[0]->eval(v);
            if (fn == "sqrt") return std::sqrt(a);
            if (fn == "exp") return std::exp(a);
            if (fn == "log") return std::log(a);
            if (fn == "sin") return std::sin(a);
            if (fn == "cos") return std::cos(a);
            if (fn == "tan") return std::tan(a);
            if (fn == "tanh") return std::tanh(a);
            if (fn == "sinh") return std::sinh(a);
            if (fn == "cosh") return std::cosh(a);
            if (fn == "atan") return std::atan(a);
            if (fn == "abs") return std::abs(a);
            const double b = kids[1]->eval(v);
            if (fn == "pow") return std::pow(a, b);
            if (fn == "min") return std::min(a, b);
            if (fn == "max") return std::max(a, b);
            return std::nan("");
        }
    };
    using NodePtr = std::shared_ptr<const Node>;

    static std::size_t function_arity(const std::string& name) {
        static const char* unary[] = {"sqrt", "exp", "log", "sin", "cos", "tan", "tanh", "sinh", "cosh", "atan", "abs"};
        for (const char* u : unary)
            if (name == u) return 1;
        if (name == "pow" || name == "min" || name == "max") return 2;
        return 0;
    }

    struct Parser {
        std::string_view s;
        const std::vector<std::string>& vars;
        std::size_t pos;

        [[noreturn]] void fail(const std::string& what) const {
            throw ConfigError("expression '" + std::string(s) + "' at column " + std::to_string(pos + 1) + ": " + what);
        }
        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool accept(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        static NodePtr binary(Op op, NodePtr a, NodePtr b) {
            auto n = std::make_shared<Node>();
            n->op = op;
            n->kids = {std::move(a), std::move(b)};
            return n;
        }

        NodePtr expr() {
            NodePtr lhs = term();
            for (;;) {
                if (accept('+')) lhs = binary(Op::add, lhs, term());
                else if (accept('-')) lhs = binary(Op::sub, lhs, term());
                else return lhs;
            }
        }
        NodePtr term() {
            NodePtr lhs = unary();
            for (;;) {
                if (accept('*')) lhs = binary(Op::mul, lhs, unary());
                else if (accept('/')) lhs = binary(Op::div, lhs, unary());
                else return lhs;
            }
        }
        NodePtr unary() {
            if (accept('-')) {
                auto n = std::make_shared<Node>();
                n->op = Op::neg;
                n->kids = {unary()};
                return n;
            }
            if (accept('+')) return unary();
            return power();
        }
        NodePtr power() {
            NodePtr base = primary();
            if (accept('^')) return binary(Op::pow, base, unary());
            return base;
        }
        NodePtr primary() {
            skip();
            if (pos >= s.size()) fail("unexpected end of input");
            const char c = s[pos];
            if (accept('(')) {
                NodePtr inner = expr();
                if (!accept(')')) fail("expected ')'");
                return inner;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                double v = 0.0;
                const char* first = s.data() + pos;
                auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
                if (ec != std::errc()) fail("malformed number");
                pos += static_cast<std::size_t>(ptr - first);
                auto n = std::make_shared<Node>();
                n->value = v;
                return n;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                const std::size_t start = pos;
                while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
                const std::string name(s.substr(start, pos - start));
                if (accept('(')) {
                    const std::size_t arity = function_arity(name);
                    if (arity == 0) fail("unknown function '" + name + "'");
                    auto n = std::make_shared<Node>();
                    n->op = Op::call;
                    n->fn = name;
                    n->kids.push_back(expr());
                    while (accept(',')) n->kids.push_back(expr());
                    if (!accept(')')) fail("expected ')' after arguments of '" + name + "'");
                    if (n->kids.size() != arity)
                        fail("'" + name + "' takes " + std::to_string(arity) + " argument(s)");
                    return n;
                }
                for (std::size_t i = 0; i < vars.size(); ++i)
                    if (vars[i] == name) {
                        auto n = std::make_shared<Node>();
                        n->op = Op::variable;
                        n->index = i;
                        return n;
                    }
                if (name == "pi") {
                    auto n = std::make_shared<Node>();
                    n->value = 3.14159265358979323846;
                    return n;
                }
                pos = start;
                fail("unknown variable '" + name + "'");
            }
            fail("unexpected '" + std::string(1, c) + "'");
        }
    };

    NodePtr root_;
    std::string text_;
    std::size_t arity_ = 0;
};

}  // namespace gtw
