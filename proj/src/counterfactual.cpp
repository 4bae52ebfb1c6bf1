#include "cfood/counterfactual.hpp"

#include <algorithm>
#include <numeric>

namespace cfood {

Method parse_method(std::string_view name)
{
    if (name == "nnce")
        return Method::Nnce;
    if (name == "nice")
        return Method::Nice;
    throw Error(ErrorKind::InvalidArgument, "unknown counterfactual method '" + std::string(name) + "'");
}

const char* to_string(Method method) { return method == Method::Nnce ? "nnce" : "nice"; }

Counterfactual nnce(const ClassIndex& idx, const Eigen::Ref<const Vector>& z, ClassLabel target)
{
    const Neighbour nn = nearest_in_class(idx, z, target);
    Counterfactual cf;
    cf.target_class = target;
    cf.point = idx.point(nn.index);
    cf.distance = std::sqrt(nn.squared_distance);
    cf.source_index = nn.index;
    return cf;
}

Counterfactual nice(const ClassIndex& idx, const LinearHead& head, const Eigen::Ref<const Vector>& z,
                    ClassLabel target)
{
    Vector current_logits = logits(head, z);
    const ClassLabel predicted = argmax(current_logits);
    if (predicted == target)
        throw Error(ErrorKind::InvalidArgument,
                    "target class " + std::to_string(target) + " is already the predicted class");

    const Counterfactual anchor = nnce(idx, z, target);
    const Eigen::Index dim = z.size();

    // For a linear head, substituting position j shifts the margin by the same
    // amount whatever else has been substituted, so the greedy order is fixed
    // up front.
    std::vector<Eigen::Index> order;
    std::vector<double> gain(static_cast<std::size_t>(dim), 0.0);
    for (Eigen::Index j = 0; j < dim; ++j) {
        const double delta = anchor.point(j) - z(j);
        if (delta == 0.0)
            continue;
        gain[static_cast<std::size_t>(j)] =
            (static_cast<double>(head.weights(target, j)) - static_cast<double>(head.weights(predicted, j))) * delta;
        order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return gain[static_cast<std::size_t>(a)] > gain[static_cast<std::size_t>(b)];
    });

    Vector candidate = z;
    std::vector<Eigen::Index> substituted;
    substituted.reserve(order.size());
    bool flipped = false;
    for (Eigen::Index j : order) {
        const double delta = anchor.point(j) - candidate(j);
        candidate(j) = anchor.point(j);
        current_logits += head.weights.col(j).cast<double>() * delta;
        substituted.push_back(j);
        if (argmax(current_logits) == target && predict(head, candidate) == target) {
            flipped = true;
            break;
        }
    }
    if (!flipped && predict(head, candidate) != target)
        throw Error(ErrorKind::InvalidArgument,
                    "NICE could not reach class " + std::to_string(target) + ": the head does not assign training row "
                        + std::to_string(anchor.source_index)
                        + " to its own label (build the index with misclassification filtering)");

    std::sort(substituted.begin(), substituted.end());
    Counterfactual cf;
    cf.target_class = target;
    cf.distance = get_distance(z, candidate);
    cf.point = std::move(candidate);
    cf.source_index = anchor.source_index;
    cf.substituted_features = std::move(substituted);
    return cf;
}

Counterfactual find_counterfactual(Method method, const ClassIndex& idx, const LinearHead& head,
                                   const Eigen::Ref<const Vector>& z, ClassLabel target)
{
    return method == Method::Nnce ? nnce(idx, z, target) : nice(idx, head, z, target);
}

} // namespace cfood
