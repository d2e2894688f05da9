#include "degdiff/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "degdiff/errors.hpp"

namespace degdiff {

struct Expression::Node {
    enum class Op { Number, Var, Add, Sub, Mul, Div, Pow, Neg } op = Op::Number;
    double value = 0.0;
    int index = 0;
};

namespace {

using Node = Expression::Node;
using Op = Node::Op;

class Parser {
public:
    Parser(std::string_view s, int dim) : s_(s), dim_(dim) {}

    std::vector<Node> run() {
        expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected character");
        return std::move(out_);
    }

private:
    [[noreturn]] void fail(const char* what) const {
        throw ModelError(fmt::format("expression '{}': {} at position {}", s_, what, pos_));
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expr() {
        term();
        for (;;) {
            if (eat('+')) {
                term();
                out_.push_back({Op::Add});
            } else if (eat('-')) {
                term();
                out_.push_back({Op::Sub});
            } else {
                return;
            }
        }
    }
    void term() {
        unary();
        for (;;) {
            if (eat('*')) {
                unary();
                out_.push_back({Op::Mul});
            } else if (eat('/')) {
                unary();
                out_.push_back({Op::Div});
            } else {
                return;
            }
        }
    }
    void unary() {
        if (eat('-')) {
            unary();
            out_.push_back({Op::Neg});
        } else if (eat('+')) {
            unary();
        } else {
            power();
        }
    }
    void power() {
        primary();
        if (eat('^')) {
            unary();  // right-associative, allows 2^-1
            out_.push_back({Op::Pow});
        }
    }
    void primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            expr();
            if (!eat(')')) fail("missing ')'");
            return;
        }
        if (c == 'x') {
            ++pos_;
            const std::size_t start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            if (start == pos_) fail("coordinate needs an index, e.g. x1");
            const int idx = std::atoi(std::string(s_.substr(start, pos_ - start)).c_str());
            if (idx < 1 || idx > dim_) fail("coordinate index out of range");
            out_.push_back({Op::Var, 0.0, idx - 1});
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const std::string rest(s_.substr(pos_));
            char* end = nullptr;
            const double v = std::strtod(rest.c_str(), &end);
            if (end == rest.c_str()) fail("bad number");
            pos_ += static_cast<std::size_t>(end - rest.c_str());
            out_.push_back({Op::Number, v, 0});
            return;
        }
        fail("unexpected character");
    }

    std::string_view s_;
    int dim_;
    std::size_t pos_ = 0;
    std::vector<Node> out_;
};

}  // namespace

Expression Expression::parse(std::string_view text, int dimension) {
    if (dimension < 1) throw ModelError("expression dimension must be >= 1");
    Expression e;
    e.text_ = std::string(text);
    e.dim_ = dimension;
    std::vector<Node> prog = Parser(text, dimension).run();
    int depth = 0;
    for (const Node& n : prog) {
        if (n.op == Op::Number || n.op == Op::Var) ++depth;
        else if (n.op != Op::Neg) --depth;
        if (depth > 64) throw ModelError(fmt::format("expression '{}' is nested too deeply", text));
    }
    e.nodes_ = std::make_shared<const std::vector<Node>>(std::move(prog));
    return e;
}

double Expression::operator()(std::span<const double> x) const {
    if (static_cast<int>(x.size()) < dim_) throw DomainError("expression evaluated with too few coordinates");
    double stack[64];
    int top = 0;
    for (const Node& n : *nodes_) {
        switch (n.op) {
            case Op::Number:
                stack[top++] = n.value;
                break;
            case Op::Var:
                stack[top++] = x[static_cast<std::size_t>(n.index)];
                break;
            case Op::Neg:
                stack[top - 1] = -stack[top - 1];
                break;
            default: {
                const double b = stack[--top];
                double& a = stack[top - 1];
                switch (n.op) {
                    case Op::Add:
                        a += b;
                        break;
                    case Op::Sub:
                        a -= b;
                        break;
                    case Op::Mul:
                        a *= b;
                        break;
                    case Op::Div:
                        a /= b;
                        break;
                    case Op::Pow:
                        a = (b == 2.0) ? a * a : std::pow(a, b);
                        break;
                    default:
                        break;
                }
            }
        }
    }
    return stack[0];
}

}  // namespace degdiff
