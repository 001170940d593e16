#include "agps/dsl/context.hpp"

#include <algorithm>

#include "agps/errors.hpp"

namespace agps::dsl {

PartContext::PartContext(std::vector<int> neighbor_indices, std::vector<OperantId> operants,
                         std::vector<Eigen::MatrixXd> base_mats)
    : neighbors_(std::move(neighbor_indices)) {
    rows_ = static_cast<int>(neighbors_.size());
    names_.reserve(operants.size());
    mats_.reserve(operants.size());
    for (const OperantId& op : operants) {
        Eigen::MatrixXd m = materialize_operant(op, base_mats);
        if (m.rows() != rows_)
            throw Error("operant " + op.name + " row count disagrees with neighbor count");
        dims_[op.name] = static_cast<int>(m.cols());
        names_.push_back(op.name);
        mats_.push_back(std::move(m));
    }
}

const Eigen::MatrixXd& PartContext::operant(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return mats_[i];
    throw ShapeError("context", "unknown operant " + name);
}

std::vector<int> sample_part_neighbors(const Eigen::MatrixXd& positions,
                                       const std::vector<int>& part_labels, int target,
                                       double radius, int n_samples, Rng& rng) {
    if (radius <= 0.0) throw Error("neighbor radius must be positive");
    if (n_samples < 1) throw Error("n_samples must be at least 1");
    const int n = static_cast<int>(positions.rows());
    const int label = part_labels[static_cast<std::size_t>(target)];
    const double r2 = radius * radius;
    const Eigen::RowVector3d center = positions.row(target);

    std::vector<int> candidates;
    for (int i = 0; i < n; ++i) {
        if (part_labels[static_cast<std::size_t>(i)] != label) continue;
        if ((positions.row(i) - center).squaredNorm() <= r2) candidates.push_back(i);
    }

    std::vector<int> out(static_cast<std::size_t>(n_samples));
    const int m = static_cast<int>(candidates.size());
    if (m < n_samples) {
        for (int i = 0; i < n_samples; ++i)
            out[static_cast<std::size_t>(i)] =
                candidates[static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(m)))];
        return out;
    }
    // Partial Fisher-Yates: the first n_samples slots of a uniform shuffle.
    std::vector<int> pool = candidates;
    for (int i = 0; i < n_samples; ++i) {
        const int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(m - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        out[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(i)];
    }
    return out;
}

PartContext build_context(const std::vector<Eigen::MatrixXd>& channels,
                          const std::vector<int>& neighbor_indices,
                          const std::vector<OperantId>& operants) {
    std::vector<Eigen::MatrixXd> gathered;
    gathered.reserve(channels.size());
    const int k = static_cast<int>(neighbor_indices.size());
    for (const Eigen::MatrixXd& ch : channels) {
        Eigen::MatrixXd g(k, ch.cols());
        for (int i = 0; i < k; ++i) g.row(i) = ch.row(neighbor_indices[static_cast<std::size_t>(i)]);
        gathered.push_back(std::move(g));
    }
    return PartContext(neighbor_indices, operants, gathered);
}

}  // namespace agps::dsl
