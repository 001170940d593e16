#pragma once

#include <functional>
#include <string>

#include "agps/eval/crossval.hpp"
#include "agps/grammar/space.hpp"

namespace agps::search {

struct SearchConfig {
    int epochs = 30;
    int samples_per_epoch = 4;
    double lr = 0.1;
    double baseline_decay = 0.9;
    int pool_size = 8;               // selection pool K
    std::string reward_mode = "gap";  // "gap" or "val"
    bool single_split = false;
    int select_epochs = 5;

    void validate() const;
};

struct RewardResult {
    double reward = 0.0;
    double val = 0.0;
    double train = 0.0;
};

// Injectable sample evaluator; epoch/sample feed per-sample seed derivation.
using RewardFn = std::function<RewardResult(const dsl::TreePtr&, int epoch, int sample)>;

// The real thing: cross-validated generalization gap (or mean val metric),
// fold seeds derived from (seed, epoch, sample, fold).
RewardFn make_crossval_reward(const eval::PreparedDataset& pd, eval::TrainConfig tcfg,
                              std::string reward_mode, bool single_split, std::uint64_t seed,
                              eval::TargetCache* cache);

struct EventRecord {
    int epoch = 0;
    int sample = 0;
    std::string tree;
    double logp = 0.0;
    bool failed = false;  // evaluation failed; reward/val/train logged as null
    double reward = 0.0;
    double val = 0.0;
    double train = 0.0;
    double wall_ms = 0.0;
};

struct SearchResult {
    grammar::DistributionSpace space;
    grammar::ReinforceState state;
    int epochs_done = 0;
    std::vector<EventRecord> events;  // this run only (resume does not reload old events)
};

// Propose/evaluate/update epochs. Per epoch: sample all, evaluate all, update
// in sample order; then checkpoint space_epoch_{e} + state sidecar and append
// event records. A failed sample is logged, replaced by one fresh draw, and a
// second failure aborts. out_dir empty = no files. resume picks up from the
// state file in out_dir; per-epoch RNG streams make the continuation exact.
// on_event fires for every logged record (progress reporting only).
SearchResult run_search(const grammar::GrammarConfig& gcfg, const SearchConfig& cfg,
                        const RewardFn& reward, std::uint64_t seed, const std::string& out_dir,
                        bool resume = false,
                        const std::function<void(const EventRecord&)>& on_event = {});

}  // namespace agps::search
