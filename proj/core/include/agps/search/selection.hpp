#pragma once

#include <functional>
#include <vector>

#include "agps/eval/crossval.hpp"
#include "agps/grammar/space.hpp"

namespace agps::search {

struct ScoredSet {
    std::vector<dsl::TreePtr> trees;
    double score = 0.0;  // -inf when evaluation failed
    bool failed = false;
};

// Higher is better. Throws on evaluation failure; callers rank failures last.
using ScoreFn = std::function<double(const std::vector<dsl::TreePtr>&)>;

ScoreFn make_crossval_score(const eval::PreparedDataset& pd, eval::TrainConfig tcfg,
                            std::string reward_mode, bool single_split, std::uint64_t seed,
                            eval::TargetCache* cache);

// Evaluates every candidate and stable-sorts best-first; failures land at the
// tail with score -inf.
std::vector<ScoredSet> sort_by_cross_val(const std::vector<std::vector<dsl::TreePtr>>& candidates,
                                         const ScoreFn& score);

struct SelectionLog {
    std::vector<ScoredSet> evaluated;  // every candidate that got a score, in order
    std::size_t stage1 = 0, stage2 = 0, stage3 = 0;  // candidate counts per stage
};

// Greedy staged growth: K distinct sampled singles, pairs from the top ranks,
// triples from top pairs x top singles; returns the best set seen anywhere.
ScoredSet greedy_select(const grammar::DistributionSpace& space, const ScoreFn& score, int K,
                        std::uint64_t seed, SelectionLog* log = nullptr);

// Ablation: rank an 8*K dedup sample pool by log-probability, evaluate the
// top K as singletons, return the best.
ScoredSet topk_select(const grammar::DistributionSpace& space, const ScoreFn& score, int K,
                      std::uint64_t seed, SelectionLog* log = nullptr);

struct FinalReport {
    double in_dist = 0.0;       // best validation MIoU on the 9:1 split
    double out_of_dist = 0.0;   // MIoU on the held-out domain
    std::vector<double> per_class_iou;  // held-out domain, aggregated over points
    int best_epoch = 0;
    std::uint64_t seed = 0;
};

// Trains on all domains except test_domain with a seeded 9:1 train/val split,
// keeps the best-val parameters, then scores the held-out domain. An empty
// tree set is the no-supervision baseline.
FinalReport final_train_eval(const std::vector<dsl::TreePtr>& trees,
                             const eval::PreparedDataset& pd, int test_domain,
                             const eval::TrainConfig& tcfg, std::uint64_t seed,
                             eval::TargetCache* cache = nullptr);

}  // namespace agps::search
