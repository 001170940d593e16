#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "agps/errors.hpp"
#include "agps/eval/descriptor.hpp"

namespace agps::eval {

struct TrainConfig {
    int epochs = 1;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    double lambda_sup = 1.0;
};

// One optimizer batch: a whole shape plus per-head supervision targets
// (standardized, row count = point count). targets may be empty.
struct Batch {
    const Eigen::MatrixXd* X = nullptr;
    const std::vector<int>* y = nullptr;
    std::vector<const Eigen::MatrixXd*> targets;
};

// Two tanh hidden layers, a linear segmentation head and one linear head per
// supervision. Parameters are drawn backbone first, then the seg head, then
// sup heads in order, all from one stream, so adding heads never reshuffles
// the shared initialization.
class EvalModel {
  public:
    EvalModel(int in_dim, int n_classes, const std::vector<int>& sup_dims, std::uint64_t seed);

    Eigen::MatrixXd seg_logits(const Eigen::MatrixXd& X) const;
    std::vector<int> predict(const Eigen::MatrixXd& X) const;

    double loss(const Batch& b, double lambda) const;
    double adam_step(const Batch& b, const TrainConfig& cfg);
    double sgd_step(const Batch& b, double lr, double lambda);

    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& theta);
    // Pure loss gradient (no weight decay), flattened like flatten().
    std::pair<double, Eigen::VectorXd> loss_and_grad(const Batch& b, double lambda) const;

    int in_dim() const { return in_dim_; }
    int n_classes() const { return n_classes_; }
    const std::vector<int>& sup_dims() const { return sup_dims_; }
    int n_layers() const { return static_cast<int>(W_.size()); }

  private:
    struct Grads {
        std::vector<Eigen::MatrixXd> W;
        std::vector<Eigen::VectorXd> b;
    };
    Grads backward(const Batch& b, double lambda, double& loss_out) const;
    void check_batch(const Batch& b) const;

    int in_dim_;
    int n_classes_;
    std::vector<int> sup_dims_;
    std::vector<Eigen::MatrixXd> W_;  // backbone(2), seg, sup heads
    std::vector<Eigen::VectorXd> b_;
    std::vector<Eigen::MatrixXd> mW_, vW_;
    std::vector<Eigen::VectorXd> mb_, vb_;
    long step_ = 0;
};

struct ShapeBatch {
    const PreparedShape* shape = nullptr;
    std::vector<const Eigen::MatrixXd*> targets;
};

struct TrainReport {
    std::vector<double> epoch_loss;
    std::vector<double> train_miou;  // -1 on epochs where val did not improve
    std::vector<double> val_miou;
    int best_epoch = 0;  // 0-based; earliest epoch on val ties
    double best_val = 0.0;
    double train_at_best = 0.0;
};

// Fixed dataset-order epochs (no shuffling). Validation MIoU every epoch;
// train MIoU only when validation improves (that is the only epoch whose
// train metric is ever consumed). Ends with best-val parameters restored.
TrainReport train(EvalModel& model, const std::vector<ShapeBatch>& train_set,
                  const std::vector<ShapeBatch>& val_set, const TrainConfig& cfg);

double miou(const EvalModel& model, const std::vector<const PreparedShape*>& shapes);

}  // namespace agps::eval
