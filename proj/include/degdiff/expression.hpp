#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace degdiff {

/// Arithmetic expression over the coordinates x1..xn: numbers, + - * / ^,
/// parentheses and unary minus. '^' is right-associative and binds tighter
/// than unary minus, so -x1^2 means -(x1^2).
class Expression {
public:
    /// Throws ModelError with the offending position on a syntax error or a
    /// coordinate index above `dimension`.
    static Expression parse(std::string_view text, int dimension);

    double operator()(std::span<const double> x) const;
    const std::string& text() const noexcept { return text_; }
    int dimension() const noexcept { return dim_; }

    struct Node;

private:
    std::string text_;
    int dim_ = 0;
    std::shared_ptr<const std::vector<Node>> nodes_;  // postfix program
};

}  // namespace degdiff
