#include "agps/eval/crossval.hpp"

#include <cmath>

#include "agps/dsl/context.hpp"
#include "agps/dsl/eval.hpp"
#include "agps/rng.hpp"

namespace agps::eval {

std::vector<std::string> task_channels(synth::Task task) {
    return task == synth::Task::Primitive ? std::vector<std::string>{"P", "N"}
                                          : std::vector<std::string>{"P", "F"};
}

std::vector<dsl::OperantId> task_operants(synth::Task task) {
    return dsl::build_operant_set(task_channels(task));
}

SupervisionTargets compute_targets(const dsl::TreePtr& tree, const PreparedDataset& pd) {
    SupervisionTargets out;
    out.tree_text = dsl::print_tree(tree);
    const std::vector<dsl::OperantId> operants = task_operants(pd.task);
    try {
        std::map<std::string, int> dims;
        for (const auto& op : operants) dims[op.name] = op.dim;
        out.dim = dsl::infer_shape(tree, dims, pd.n_rows).dim;
        for (const auto& ps : pd.shapes) {
            const synth::Shape& sh = *ps.src;
            const Eigen::MatrixX3d& second =
                pd.task == synth::Task::Primitive ? sh.normals : sh.flow;
            Eigen::MatrixXd G(sh.n_points(), out.dim);
            std::vector<int> rows(static_cast<std::size_t>(pd.n_rows));
            for (Eigen::Index i = 0; i < sh.n_points(); ++i) {
                for (int r = 0; r < pd.n_rows; ++r) rows[static_cast<std::size_t>(r)] = ps.contexts(i, r);
                Eigen::MatrixX3d P(pd.n_rows, 3), S(pd.n_rows, 3);
                for (int r = 0; r < pd.n_rows; ++r) {
                    P.row(r) = sh.positions.row(rows[static_cast<std::size_t>(r)]);
                    S.row(r) = second.row(rows[static_cast<std::size_t>(r)]);
                }
                const dsl::PartContext ctx(rows, operants, {P, S});
                G.row(i) = dsl::evaluate_tree(tree, ctx).transpose();
            }
            out.per_shape.push_back(std::move(G));
        }
    } catch (const SupervisionError&) {
        throw;
    } catch (const Error& e) {
        throw SupervisionError(out.tree_text, e.what());
    }
    return out;
}

std::shared_ptr<const SupervisionTargets> TargetCache::get(const dsl::TreePtr& tree,
                                                           const PreparedDataset& pd) {
    const std::string key = dsl::print_tree(tree);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = map_.find(key);
        if (it != map_.end()) return it->second;
    }
    auto computed = std::make_shared<const SupervisionTargets>(compute_targets(tree, pd));
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = map_.emplace(key, std::move(computed));
    return it->second;
}

Standardizer fit_standardizer(const SupervisionTargets& t, const std::vector<int>& shape_idx) {
    const int d = t.dim;
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(d);
    Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(d);
    double n = 0.0;
    for (int si : shape_idx) {
        const Eigen::MatrixXd& G = t.per_shape[static_cast<std::size_t>(si)];
        sum += G.colwise().sum();
        sq += G.array().square().matrix().colwise().sum();
        n += static_cast<double>(G.rows());
    }
    Standardizer st;
    st.mu = sum / n;
    st.sigma = ((sq / n) - st.mu.array().square().matrix()).cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index j = 0; j < st.sigma.size(); ++j)
        if (st.sigma[j] < 1e-8) st.sigma[j] = 1.0;
    return st;
}

Eigen::MatrixXd standardize(const Standardizer& st, const Eigen::MatrixXd& G) {
    return (G.rowwise() - st.mu).array().rowwise() / st.sigma.array();
}

GapReward cross_val_gap(const std::vector<dsl::TreePtr>& trees, const PreparedDataset& pd,
                        const TrainConfig& tcfg, bool single_split, std::uint64_t base_seed,
                        TargetCache* cache) {
    const int n_domains = static_cast<int>(pd.domain_names.size());
    if (n_domains < 2) throw SpecError("cross-validation needs at least 2 domains");

    std::vector<std::shared_ptr<const SupervisionTargets>> targets;
    TargetCache local;
    TargetCache& tc = cache ? *cache : local;
    std::vector<int> sup_dims;
    for (const auto& tree : trees) {
        targets.push_back(tc.get(tree, pd));
        sup_dims.push_back(targets.back()->dim);
    }

    const int folds = single_split ? 1 : n_domains;
    GapReward out;
    for (int f = 0; f < folds; ++f) {
        std::vector<int> train_idx, val_idx;
        for (std::size_t s = 0; s < pd.shapes.size(); ++s)
            (pd.shapes[s].domain == f ? val_idx : train_idx).push_back(static_cast<int>(s));

        // Standardization is fit on this fold's train split only.
        std::vector<std::vector<Eigen::MatrixXd>> std_targets(targets.size());
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const Standardizer st = fit_standardizer(*targets[t], train_idx);
            std_targets[t].resize(pd.shapes.size());
            for (int si : train_idx)
                std_targets[t][static_cast<std::size_t>(si)] =
                    standardize(st, targets[t]->per_shape[static_cast<std::size_t>(si)]);
        }

        std::vector<ShapeBatch> train_set, val_set;
        for (int si : train_idx) {
            ShapeBatch sb;
            sb.shape = &pd.shapes[static_cast<std::size_t>(si)];
            for (std::size_t t = 0; t < targets.size(); ++t)
                sb.targets.push_back(&std_targets[t][static_cast<std::size_t>(si)]);
            train_set.push_back(std::move(sb));
        }
        for (int si : val_idx) {
            ShapeBatch sb;
            sb.shape = &pd.shapes[static_cast<std::size_t>(si)];
            val_set.push_back(std::move(sb));
        }

        EvalModel model(kDescriptorDim, n_classes(pd.task), sup_dims,
                        derive_seed(base_seed, {static_cast<std::uint64_t>(f)}));
        const TrainReport rep = train(model, train_set, val_set, tcfg);
        FoldResult fr;
        fr.val = rep.best_val;
        fr.train = rep.train_at_best;
        fr.gap = fr.val - fr.train;
        out.per_split.push_back(fr);
    }
    for (const auto& fr : out.per_split) {
        out.gap += fr.gap;
        out.val_metric += fr.val;
        out.train_metric += fr.train;
    }
    const double nf = static_cast<double>(out.per_split.size());
    out.gap /= nf;
    out.val_metric /= nf;
    out.train_metric /= nf;
    return out;
}

}  // namespace agps::eval
