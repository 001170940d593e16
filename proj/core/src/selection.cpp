#include "agps/search/selection.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "agps/errors.hpp"
#include "agps/rng.hpp"

namespace agps::search {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Order-independent identity of a candidate set.
std::string set_key(const std::vector<dsl::TreePtr>& trees) {
    std::vector<std::string> texts;
    texts.reserve(trees.size());
    for (const auto& t : trees) texts.push_back(dsl::print_tree(t));
    std::sort(texts.begin(), texts.end());
    std::string key;
    for (const auto& s : texts) {
        key += s;
        key += '\n';
    }
    return key;
}

std::vector<ScoredSet> evaluate_all(const std::vector<std::vector<dsl::TreePtr>>& candidates,
                                    const ScoreFn& score) {
    std::vector<ScoredSet> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        ScoredSet s;
        s.trees = c;
        try {
            s.score = score(c);
        } catch (const Error&) {
            s.score = kNegInf;
            s.failed = true;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ScoredSet> sorted_desc(std::vector<ScoredSet> v) {
    std::stable_sort(v.begin(), v.end(),
                     [](const ScoredSet& a, const ScoredSet& b) { return a.score > b.score; });
    return v;
}

// Earliest evaluation wins ties, failures never win over a success.
const ScoredSet* best_of(const std::vector<ScoredSet>& evaluated) {
    const ScoredSet* best = nullptr;
    for (const auto& s : evaluated)
        if (!best || s.score > best->score) best = &s;
    return best;
}

}  // namespace

ScoreFn make_crossval_score(const eval::PreparedDataset& pd, eval::TrainConfig tcfg,
                            std::string reward_mode, bool single_split, std::uint64_t seed,
                            eval::TargetCache* cache) {
    if (reward_mode != "gap" && reward_mode != "val")
        throw ConfigError("search.reward_mode", "must be \"gap\" or \"val\"");
    bool use_gap = reward_mode == "gap";
    const eval::PreparedDataset* pdp = &pd;
    return [pdp, tcfg, use_gap, single_split, seed, cache](const std::vector<dsl::TreePtr>& trees) {
        auto gr = eval::cross_val_gap(trees, *pdp, tcfg, single_split, seed, cache);
        return use_gap ? gr.gap : gr.val_metric;
    };
}

std::vector<ScoredSet> sort_by_cross_val(const std::vector<std::vector<dsl::TreePtr>>& candidates,
                                         const ScoreFn& score) {
    return sorted_desc(evaluate_all(candidates, score));
}

ScoredSet greedy_select(const grammar::DistributionSpace& space, const ScoreFn& score, int K,
                        std::uint64_t seed, SelectionLog* log) {
    if (K < 3) throw ConfigError("search.pool_size", "must be >= 3");
    SelectionLog local;
    SelectionLog& lg = log ? *log : local;

    // Stage 1: K distinct sampled singles.
    Rng rng(seed);
    std::set<std::string> seen;
    std::vector<std::vector<dsl::TreePtr>> singles;
    std::size_t draws = 0, budget = 64 * static_cast<std::size_t>(K);
    while (singles.size() < static_cast<std::size_t>(K)) {
        if (draws >= budget)
            throw SamplingExhausted("could not draw " + std::to_string(K) +
                                    " distinct trees in " + std::to_string(budget) + " attempts");
        ++draws;
        auto [t, lp] = grammar::sample_tree(space, rng);
        if (seen.insert(dsl::print_tree(t)).second) singles.push_back({t});
    }
    auto e1 = evaluate_all(singles, score);
    lg.stage1 = e1.size();
    lg.evaluated.insert(lg.evaluated.end(), e1.begin(), e1.end());
    auto t1 = sorted_desc(e1);

    // Stage 2: top-2 x top-K/2 pairs, no self pairs, unordered dedup.
    std::set<std::string> keys;
    std::vector<std::vector<dsl::TreePtr>> pairs;
    std::size_t n_a = std::min<std::size_t>(2, t1.size());
    std::size_t n_b = std::min<std::size_t>(K / 2, t1.size());
    for (std::size_t i = 0; i < n_a; ++i)
        for (std::size_t j = 0; j < n_b; ++j) {
            const auto& a = t1[i].trees[0];
            const auto& b = t1[j].trees[0];
            if (dsl::print_tree(a) == dsl::print_tree(b)) continue;
            std::vector<dsl::TreePtr> cand{a, b};
            if (keys.insert(set_key(cand)).second) pairs.push_back(std::move(cand));
        }
    auto e2 = evaluate_all(pairs, score);
    lg.stage2 = e2.size();
    lg.evaluated.insert(lg.evaluated.end(), e2.begin(), e2.end());
    auto t2 = sorted_desc(e2);

    // Stage 3: top-3 pairs x top-K/3 singles, member and set dedup.
    std::vector<std::vector<dsl::TreePtr>> triples;
    std::size_t n_p = std::min<std::size_t>(3, t2.size());
    std::size_t n_s = std::min<std::size_t>(K / 3, t1.size());
    for (std::size_t i = 0; i < n_p; ++i)
        for (std::size_t j = 0; j < n_s; ++j) {
            const auto& p = t2[i].trees;
            const auto& s = t1[j].trees[0];
            std::string stext = dsl::print_tree(s);
            bool member = false;
            for (const auto& t : p)
                if (dsl::print_tree(t) == stext) member = true;
            if (member) continue;
            std::vector<dsl::TreePtr> cand = p;
            cand.push_back(s);
            if (keys.insert(set_key(cand)).second) triples.push_back(std::move(cand));
        }
    auto e3 = evaluate_all(triples, score);
    lg.stage3 = e3.size();
    lg.evaluated.insert(lg.evaluated.end(), e3.begin(), e3.end());

    return *best_of(lg.evaluated);
}

ScoredSet topk_select(const grammar::DistributionSpace& space, const ScoreFn& score, int K,
                      std::uint64_t seed, SelectionLog* log) {
    if (K < 1) throw ConfigError("search.pool_size", "must be >= 1");
    SelectionLog local;
    SelectionLog& lg = log ? *log : local;

    Rng rng(seed);
    struct Entry {
        dsl::TreePtr tree;
        double logp;
    };
    std::map<std::string, std::size_t> seen;
    std::vector<Entry> pool;
    for (int i = 0; i < 8 * K; ++i) {
        auto [t, lp] = grammar::sample_tree(space, rng);
        std::string text = dsl::print_tree(t);
        if (seen.emplace(text, pool.size()).second) pool.push_back({t, lp});
    }
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pool[a].logp > pool[b].logp;
    });

    std::vector<std::vector<dsl::TreePtr>> cands;
    for (std::size_t i = 0; i < order.size() && cands.size() < static_cast<std::size_t>(K); ++i)
        cands.push_back({pool[order[i]].tree});
    auto ev = evaluate_all(cands, score);
    lg.stage1 = ev.size();
    lg.evaluated.insert(lg.evaluated.end(), ev.begin(), ev.end());

    return *best_of(lg.evaluated);
}

FinalReport final_train_eval(const std::vector<dsl::TreePtr>& trees,
                             const eval::PreparedDataset& pd, int test_domain,
                             const eval::TrainConfig& tcfg, std::uint64_t seed,
                             eval::TargetCache* cache) {
    int n_domains = static_cast<int>(pd.domain_names.size());
    if (test_domain < 0 || test_domain >= n_domains)
        throw SpecError("test_domain out of range");

    std::vector<int> train_idx, test_idx;
    for (int i = 0; i < static_cast<int>(pd.shapes.size()); ++i) {
        if (pd.shapes[i].domain == test_domain)
            test_idx.push_back(i);
        else
            train_idx.push_back(i);
    }
    if (train_idx.size() < 2) throw SpecError("need at least 2 training shapes");
    if (test_idx.empty()) throw SpecError("held-out domain has no shapes");

    eval::TargetCache local_cache;
    eval::TargetCache* tc = cache ? cache : &local_cache;
    std::vector<std::shared_ptr<const eval::SupervisionTargets>> targets;
    std::vector<int> sup_dims;
    for (const auto& t : trees) {
        targets.push_back(tc->get(t, pd));
        sup_dims.push_back(targets.back()->dim);
    }

    // Seeded 9:1 train/val shuffle over the training shapes.
    Rng shuffle_rng(derive_seed(seed, {101}));
    for (std::size_t i = train_idx.size() - 1; i > 0; --i) {
        std::size_t j = shuffle_rng.uniform_int(i + 1);
        std::swap(train_idx[i], train_idx[j]);
    }
    std::size_t n_val = std::max<std::size_t>(1, train_idx.size() / 10);
    std::vector<int> fit_idx(train_idx.begin(), train_idx.end() - n_val);
    std::vector<int> val_idx(train_idx.end() - n_val, train_idx.end());

    std::vector<eval::Standardizer> stds;
    for (const auto& t : targets) stds.push_back(eval::fit_standardizer(*t, fit_idx));

    std::map<int, std::vector<Eigen::MatrixXd>> std_targets;
    for (int si : fit_idx) {
        auto& v = std_targets[si];
        for (std::size_t k = 0; k < targets.size(); ++k)
            v.push_back(eval::standardize(stds[k], targets[k]->per_shape[si]));
    }

    auto batches = [&](const std::vector<int>& idx, bool with_targets) {
        std::vector<eval::ShapeBatch> out;
        for (int si : idx) {
            eval::ShapeBatch b;
            b.shape = &pd.shapes[si];
            if (with_targets)
                for (const auto& m : std_targets[si]) b.targets.push_back(&m);
            out.push_back(std::move(b));
        }
        return out;
    };
    auto train_batches = batches(fit_idx, true);
    auto val_batches = batches(val_idx, false);

    eval::EvalModel model(eval::kDescriptorDim, eval::n_classes(pd.task), sup_dims,
                          derive_seed(seed, {202}));
    auto report = eval::train(model, train_batches, val_batches, tcfg);

    std::vector<const eval::PreparedShape*> test_shapes;
    for (int si : test_idx) test_shapes.push_back(&pd.shapes[si]);

    FinalReport fr;
    fr.in_dist = report.best_val;
    fr.out_of_dist = eval::miou(model, test_shapes);
    fr.best_epoch = report.best_epoch;
    fr.seed = seed;

    int C = eval::n_classes(pd.task);
    std::vector<double> inter(C, 0.0), uni(C, 0.0);
    for (const auto* sh : test_shapes) {
        auto pred = model.predict(sh->X);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            int g = sh->y[i], p = pred[i];
            if (g == p) {
                inter[g] += 1.0;
                uni[g] += 1.0;
            } else {
                if (g >= 0 && g < C) uni[g] += 1.0;
                if (p >= 0 && p < C) uni[p] += 1.0;
            }
        }
    }
    fr.per_class_iou.resize(C);
    for (int c = 0; c < C; ++c) fr.per_class_iou[c] = uni[c] > 0.0 ? inter[c] / uni[c] : 0.0;
    return fr;
}

}  // namespace agps::search
