#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "agps/dsl/tree.hpp"
#include "agps/eval/model.hpp"

namespace agps::eval {

std::vector<std::string> task_channels(synth::Task task);
std::vector<dsl::OperantId> task_operants(synth::Task task);

// Raw (unstandardized) per-point tree outputs, one matrix per prepared shape.
struct SupervisionTargets {
    std::string tree_text;
    int dim = 0;
    std::vector<Eigen::MatrixXd> per_shape;
};

// Evaluation failures surface as SupervisionError carrying the tree text.
SupervisionTargets compute_targets(const dsl::TreePtr& tree, const PreparedDataset& pd);

// Keyed by canonical tree text; shared across folds, epochs and selection
// stages. Thread safe.
class TargetCache {
  public:
    std::shared_ptr<const SupervisionTargets> get(const dsl::TreePtr& tree,
                                                  const PreparedDataset& pd);

  private:
    std::map<std::string, std::shared_ptr<const SupervisionTargets>> map_;
    std::mutex mu_;
};

struct Standardizer {
    Eigen::RowVectorXd mu;
    Eigen::RowVectorXd sigma;  // floored at 1e-8 -> 1
};

Standardizer fit_standardizer(const SupervisionTargets& t, const std::vector<int>& shape_idx);
Eigen::MatrixXd standardize(const Standardizer& st, const Eigen::MatrixXd& G);

struct FoldResult {
    double val = 0.0;
    double train = 0.0;
    double gap = 0.0;
};

struct GapReward {
    double gap = 0.0;
    double val_metric = 0.0;
    double train_metric = 0.0;
    std::vector<FoldResult> per_split;
};

// Leave-one-domain-out: per fold a fresh model seeded by (base_seed, fold),
// supervision targets standardized on that fold's train split, metrics taken
// at the best validation epoch. single_split keeps only fold 0.
GapReward cross_val_gap(const std::vector<dsl::TreePtr>& trees, const PreparedDataset& pd,
                        const TrainConfig& tcfg, bool single_split, std::uint64_t base_seed,
                        TargetCache* cache = nullptr);

}  // namespace agps::eval
