#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agps/eval/model.hpp"
#include "agps/grammar/space.hpp"
#include "agps/search/search.hpp"
#include "agps/synth/generate.hpp"

namespace agps::config {

// Full run configuration. Every field has a schema entry; the schema is the
// single source of truth for keys, defaults and help text.
struct RunConfig {
    std::uint64_t seed = 7;
    std::string task = "primitive";  // primitive | mobility
    std::string data;                // dataset path; empty = generate in memory
    std::string out = "runs";        // run-directory root
    int threads = 0;                 // 0 = serial; AGP_THREADS / --threads override

    struct SynthCfg {
        int shapes = 60;     // per domain
        int points = 512;    // per shape
        double noise = 0.0;  // positional sigma before normalization
    } synth;

    struct GrammarCfg {
        int max_height = 3;
        int n_rows = 32;
        double radius = 0.5;
        std::string groupings = "sum,mean,max,svd";
        std::string unaries = "identity,square,double,neg,orth,inv,centralize";
        std::string binaries = "add,minus,mul,cross,cartesian,matvec";
    } grammar;

    struct SearchCfg {
        int epochs = 30;
        int samples = 4;
        double lr = 0.1;
        double baseline_decay = 0.9;
        int pool_size = 8;               // selection K
        std::string reward_mode = "gap";  // gap | val
        bool single_split = false;
        int select_epochs = 5;
    } search;

    struct EvalCfg {
        double lr = 1e-3;
        double weight_decay = 1e-4;
        double lambda = 1.0;
        int epochs = 1;        // per cross-val fold during search
        int final_epochs = 30;  // final training stage
        double final_lr = 3e-3;
    } eval;

    struct SelectCfg {
        std::string method = "greedy";  // greedy | topk
    } select;
};

enum class VType { Int, U64, Real, Bool, Str };

struct SchemaEntry {
    std::string key;
    VType type;
    std::string desc;
};

// One row per config key, in canonical order.
const std::vector<SchemaEntry>& schema();

// Parses a JSON document ("" and "{}" give pure defaults). Unknown keys and
// type mismatches raise ConfigError with the exact dotted key path and a
// nearest-key suggestion where one is close.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);

// --set key=value; value is parsed per the schema type.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Range and enum checks; throws ConfigError.
void validate(const RunConfig& cfg);

// Canonical JSON of the fully resolved config (schema order, nested).
std::string resolved_text(const RunConfig& cfg);

// Every key with type, default and description; defaults come from a
// default-constructed RunConfig.
std::string help_text();

synth::Task parse_task(const std::string& name);
grammar::GrammarConfig make_grammar(const RunConfig& cfg);
std::vector<synth::DomainSpec> make_specs(const RunConfig& cfg);
search::SearchConfig make_search(const RunConfig& cfg);
eval::TrainConfig make_train(const RunConfig& cfg, bool final_stage);

}  // namespace agps::config
