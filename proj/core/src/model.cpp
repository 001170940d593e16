#include "agps/eval/model.hpp"

#include <cmath>

#include "agps/rng.hpp"

namespace agps::eval {

namespace {

constexpr int kHidden = 64;

Eigen::MatrixXd xavier(int rows, int cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    Eigen::MatrixXd W(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) W(r, c) = rng.uniform(-limit, limit);
    return W;
}

// Row-wise stable softmax.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd P = logits;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        const double m = P.row(i).maxCoeff();
        P.row(i) = (P.row(i).array() - m).exp();
        P.row(i) /= P.row(i).sum();
    }
    return P;
}

}  // namespace

EvalModel::EvalModel(int in_dim, int n_classes, const std::vector<int>& sup_dims,
                     std::uint64_t seed)
    : in_dim_(in_dim), n_classes_(n_classes), sup_dims_(sup_dims) {
    Rng rng(seed);
    W_.push_back(xavier(in_dim, kHidden, rng));
    W_.push_back(xavier(kHidden, kHidden, rng));
    W_.push_back(xavier(kHidden, n_classes, rng));
    for (int s : sup_dims_) W_.push_back(xavier(kHidden, s, rng));
    for (const auto& W : W_) b_.emplace_back(Eigen::VectorXd::Zero(W.cols()));
    for (const auto& W : W_) {
        mW_.emplace_back(Eigen::MatrixXd::Zero(W.rows(), W.cols()));
        vW_.emplace_back(Eigen::MatrixXd::Zero(W.rows(), W.cols()));
    }
    for (const auto& bias : b_) {
        mb_.emplace_back(Eigen::VectorXd::Zero(bias.size()));
        vb_.emplace_back(Eigen::VectorXd::Zero(bias.size()));
    }
}

Eigen::MatrixXd EvalModel::seg_logits(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd H1 = ((X * W_[0]).rowwise() + b_[0].transpose()).array().tanh();
    const Eigen::MatrixXd H2 = ((H1 * W_[1]).rowwise() + b_[1].transpose()).array().tanh();
    return (H2 * W_[2]).rowwise() + b_[2].transpose();
}

std::vector<int> EvalModel::predict(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd logits = seg_logits(X);
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best;
        logits.row(i).maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

void EvalModel::check_batch(const Batch& b) const {
    if (b.targets.size() != sup_dims_.size())
        throw DimMismatch("batch carries " + std::to_string(b.targets.size()) +
                          " supervision targets for " + std::to_string(sup_dims_.size()) +
                          " heads");
    for (std::size_t j = 0; j < b.targets.size(); ++j) {
        if (b.targets[j]->cols() != sup_dims_[j])
            throw DimMismatch("supervision target " + std::to_string(j) + " has dim " +
                              std::to_string(b.targets[j]->cols()) + ", head expects " +
                              std::to_string(sup_dims_[j]));
        if (b.targets[j]->rows() != b.X->rows())
            throw DimMismatch("supervision target " + std::to_string(j) + " row count " +
                              std::to_string(b.targets[j]->rows()) + " != batch rows " +
                              std::to_string(b.X->rows()));
    }
}

EvalModel::Grads EvalModel::backward(const Batch& b, double lambda, double& loss_out) const {
    check_batch(b);
    const Eigen::MatrixXd& X = *b.X;
    const auto n = X.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    const Eigen::MatrixXd H1 = ((X * W_[0]).rowwise() + b_[0].transpose()).array().tanh();
    const Eigen::MatrixXd H2 = ((H1 * W_[1]).rowwise() + b_[1].transpose()).array().tanh();
    const Eigen::MatrixXd logits = (H2 * W_[2]).rowwise() + b_[2].transpose();

    const Eigen::MatrixXd P = softmax_rows(logits);
    double ce = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        ce += lse - logits(i, (*b.y)[static_cast<std::size_t>(i)]);
    }
    ce *= inv_n;

    Eigen::MatrixXd dlogits = P * inv_n;
    for (Eigen::Index i = 0; i < n; ++i) dlogits(i, (*b.y)[static_cast<std::size_t>(i)]) -= inv_n;

    Grads g;
    g.W.resize(W_.size());
    g.b.resize(b_.size());

    double mse_total = 0.0;
    Eigen::MatrixXd dH2 = dlogits * W_[2].transpose();
    for (std::size_t j = 0; j < sup_dims_.size(); ++j) {
        const std::size_t li = 3 + j;
        const Eigen::MatrixXd out = (H2 * W_[li]).rowwise() + b_[li].transpose();
        const Eigen::MatrixXd diff = out - *b.targets[j];
        const double denom = static_cast<double>(n) * static_cast<double>(sup_dims_[j]);
        mse_total += diff.squaredNorm() / denom;
        const Eigen::MatrixXd dout = diff * (2.0 * lambda / denom);
        g.W[li] = H2.transpose() * dout;
        g.b[li] = dout.colwise().sum().transpose();
        dH2 += dout * W_[li].transpose();
    }
    loss_out = ce + lambda * mse_total;

    g.W[2] = H2.transpose() * dlogits;
    g.b[2] = dlogits.colwise().sum().transpose();

    const Eigen::MatrixXd dA2 = dH2.array() * (1.0 - H2.array().square());
    g.W[1] = H1.transpose() * dA2;
    g.b[1] = dA2.colwise().sum().transpose();

    const Eigen::MatrixXd dA1 =
        (dA2 * W_[1].transpose()).array() * (1.0 - H1.array().square());
    g.W[0] = X.transpose() * dA1;
    g.b[0] = dA1.colwise().sum().transpose();
    return g;
}

double EvalModel::loss(const Batch& b, double lambda) const {
    double l = 0.0;
    backward(b, lambda, l);
    return l;
}

double EvalModel::adam_step(const Batch& b, const TrainConfig& cfg) {
    double l = 0.0;
    Grads g = backward(b, cfg.lambda_sup, l);
    if (!std::isfinite(l))
        throw NonFiniteLoss("loss became non-finite at step " + std::to_string(step_ + 1));
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < W_.size(); ++i) {
        g.W[i] += cfg.weight_decay * W_[i];
        mW_[i] = cfg.beta1 * mW_[i] + (1.0 - cfg.beta1) * g.W[i];
        vW_[i] = cfg.beta2 * vW_[i] + (1.0 - cfg.beta2) * g.W[i].array().square().matrix();
        W_[i].array() -=
            cfg.lr * (mW_[i].array() / bc1) / ((vW_[i].array() / bc2).sqrt() + cfg.eps);
        g.b[i] += cfg.weight_decay * b_[i];
        mb_[i] = cfg.beta1 * mb_[i] + (1.0 - cfg.beta1) * g.b[i];
        vb_[i] = cfg.beta2 * vb_[i] + (1.0 - cfg.beta2) * g.b[i].array().square().matrix();
        b_[i].array() -=
            cfg.lr * (mb_[i].array() / bc1) / ((vb_[i].array() / bc2).sqrt() + cfg.eps);
    }
    return l;
}

double EvalModel::sgd_step(const Batch& b, double lr, double lambda) {
    double l = 0.0;
    Grads g = backward(b, lambda, l);
    if (!std::isfinite(l)) throw NonFiniteLoss("loss became non-finite");
    for (std::size_t i = 0; i < W_.size(); ++i) {
        W_[i] -= lr * g.W[i];
        b_[i] -= lr * g.b[i];
    }
    return l;
}

Eigen::VectorXd EvalModel::flatten() const {
    Eigen::Index total = 0;
    for (std::size_t i = 0; i < W_.size(); ++i) total += W_[i].size() + b_[i].size();
    Eigen::VectorXd theta(total);
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < W_.size(); ++i) {
        theta.segment(at, W_[i].size()) = Eigen::Map<const Eigen::VectorXd>(W_[i].data(), W_[i].size());
        at += W_[i].size();
        theta.segment(at, b_[i].size()) = b_[i];
        at += b_[i].size();
    }
    return theta;
}

void EvalModel::unflatten(const Eigen::VectorXd& theta) {
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < W_.size(); ++i) {
        Eigen::Map<Eigen::VectorXd>(W_[i].data(), W_[i].size()) = theta.segment(at, W_[i].size());
        at += W_[i].size();
        b_[i] = theta.segment(at, b_[i].size());
        at += b_[i].size();
    }
}

std::pair<double, Eigen::VectorXd> EvalModel::loss_and_grad(const Batch& b,
                                                            double lambda) const {
    double l = 0.0;
    Grads g = backward(b, lambda, l);
    Eigen::Index total = 0;
    for (std::size_t i = 0; i < W_.size(); ++i) total += W_[i].size() + b_[i].size();
    Eigen::VectorXd flat(total);
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < W_.size(); ++i) {
        flat.segment(at, g.W[i].size()) = Eigen::Map<const Eigen::VectorXd>(g.W[i].data(), g.W[i].size());
        at += g.W[i].size();
        flat.segment(at, g.b[i].size()) = g.b[i];
        at += g.b[i].size();
    }
    return {l, std::move(flat)};
}

namespace {

double shape_iou(const std::vector<int>& gt, const std::vector<int>& pred, int n_classes) {
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < n_classes; ++c) {
        int inter = 0, uni = 0;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            const bool a = gt[i] == c, b = pred[i] == c;
            inter += a && b;
            uni += a || b;
        }
        if (uni == 0) continue;
        sum += static_cast<double>(inter) / static_cast<double>(uni);
        ++counted;
    }
    return counted == 0 ? 0.0 : sum / counted;
}

}  // namespace

double miou(const EvalModel& model, const std::vector<const PreparedShape*>& shapes) {
    if (shapes.empty()) return 0.0;
    double sum = 0.0;
    for (const PreparedShape* ps : shapes)
        sum += shape_iou(ps->y, model.predict(ps->X), model.n_classes());
    return sum / static_cast<double>(shapes.size());
}

TrainReport train(EvalModel& model, const std::vector<ShapeBatch>& train_set,
                  const std::vector<ShapeBatch>& val_set, const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
    std::vector<const PreparedShape*> train_shapes, val_shapes;
    for (const auto& sb : train_set) train_shapes.push_back(sb.shape);
    for (const auto& sb : val_set) val_shapes.push_back(sb.shape);
    TrainReport rep;
    rep.best_val = -1.0;
    Eigen::VectorXd best_params;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (const auto& sb : train_set) {
            Batch b;
            b.X = &sb.shape->X;
            b.y = &sb.shape->y;
            b.targets = sb.targets;
            loss_sum += model.adam_step(b, cfg);
        }
        rep.epoch_loss.push_back(loss_sum / static_cast<double>(train_set.size()));
        if (val_set.empty()) {
            // No validation: full curves, final epoch wins.
            rep.train_miou.push_back(miou(model, train_shapes));
            rep.val_miou.push_back(0.0);
            rep.best_epoch = epoch;
            rep.best_val = 0.0;
            rep.train_at_best = rep.train_miou.back();
            continue;
        }
        rep.val_miou.push_back(miou(model, val_shapes));
        // Train-set MIoU only matters at the best-val epoch; skipped epochs
        // record -1 in the curve.
        if (rep.val_miou.back() > rep.best_val) {
            rep.best_val = rep.val_miou.back();
            rep.best_epoch = epoch;
            rep.train_at_best = miou(model, train_shapes);
            rep.train_miou.push_back(rep.train_at_best);
            best_params = model.flatten();
        } else {
            rep.train_miou.push_back(-1.0);
        }
    }
    // Inference uses the best-val epoch, so leave the model there.
    if (best_params.size() > 0) model.unflatten(best_params);
    return rep;
}

}  // namespace agps::eval
