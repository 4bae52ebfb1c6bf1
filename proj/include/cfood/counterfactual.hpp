#pragma once

#include "cfood/nn_index.hpp"

#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

namespace cfood {

enum class Method { Nnce, Nice };

Method parse_method(std::string_view name);
const char* to_string(Method method);

struct Counterfactual {
    ClassLabel target_class = -1;
    Vector point;
    double distance = 0;          // Euclidean, to the query
    RowIndex source_index = -1;   // training row the search anchored on
    std::optional<std::vector<Eigen::Index>> substituted_features;   // NICE only, ascending
};

/// Sum of squared differences accumulated in index order. Every distance in the
/// toolkit goes through this order so that results are reproducible bit for bit.
template <typename DerivedA, typename DerivedB>
double squared_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    if (a.size() != b.size())
        throw Error(ErrorKind::DimensionMismatch, "cannot compare vectors of length " + std::to_string(a.size())
                                                      + " and " + std::to_string(b.size()));
    double acc = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        const double t = static_cast<double>(a(j)) - static_cast<double>(b(j));
        acc += t * t;
    }
    return acc;
}

template <typename DerivedA, typename DerivedB>
double get_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    return std::sqrt(squared_distance(a, b));
}

/// Nearest indexed training row of the target class.
Counterfactual nnce(const ClassIndex& idx, const Eigen::Ref<const Vector>& z, ClassLabel target);

/// Greedy feature substitution from the query toward its nearest unlike
/// neighbour (the NNCE point of `target`). Each step substitutes the position
/// that most increases logit(target) - logit(predicted) and the search stops at
/// the first candidate the head assigns to `target`.
Counterfactual nice(const ClassIndex& idx, const LinearHead& head, const Eigen::Ref<const Vector>& z,
                    ClassLabel target);

Counterfactual find_counterfactual(Method method, const ClassIndex& idx, const LinearHead& head,
                                   const Eigen::Ref<const Vector>& z, ClassLabel target);

} // namespace cfood
