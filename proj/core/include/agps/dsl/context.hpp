#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "agps/dsl/ops.hpp"
#include "agps/rng.hpp"

namespace agps::dsl {

// Part-aware feature matrices for one target point: every operant matrix has
// one row per sampled same-part neighbor, rows aligned across operants.
// Immutable after construction, safe to share across threads.
class PartContext {
  public:
    PartContext(std::vector<int> neighbor_indices, std::vector<OperantId> operants,
                std::vector<Eigen::MatrixXd> base_mats);

    int rows() const { return rows_; }
    const std::vector<int>& neighbor_indices() const { return neighbors_; }
    const Eigen::MatrixXd& operant(const std::string& name) const;
    const std::map<std::string, int>& operant_dims() const { return dims_; }

  private:
    std::vector<int> neighbors_;
    std::vector<std::string> names_;
    std::vector<Eigen::MatrixXd> mats_;
    std::map<std::string, int> dims_;
    int rows_ = 0;
};

// Uniform draw of n_samples same-part indices within `radius` of point
// `target` (the target itself qualifies at distance 0): without replacement
// when enough candidates exist, with replacement otherwise.
std::vector<int> sample_part_neighbors(const Eigen::MatrixXd& positions,
                                       const std::vector<int>& part_labels, int target,
                                       double radius, int n_samples, Rng& rng);

// Gathers rows of per-point channels (k x 3 each) for the given neighbors and
// materializes the full operant set.
PartContext build_context(const std::vector<Eigen::MatrixXd>& channels,
                          const std::vector<int>& neighbor_indices,
                          const std::vector<OperantId>& operants);

}  // namespace agps::dsl
