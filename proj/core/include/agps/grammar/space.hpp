#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "agps/dsl/tree.hpp"
#include "agps/errors.hpp"
#include "agps/rng.hpp"

namespace agps::grammar {

struct GrammarConfig {
    int max_height = 3;  // 2 or 3
    std::vector<dsl::GroupingOp> groupings;
    std::vector<dsl::UnaryOp> unaries;
    std::vector<dsl::BinaryOp> binaries;  // may be empty (single-connection grammar)
    std::vector<dsl::OperantId> operants;
    int n_rows = 32;  // neighbor rows feeding every operant matrix
};

// Default candidate lists; allow_centralize appends the extra unary.
GrammarConfig full_grammar(std::vector<dsl::OperantId> operants, bool allow_centralize = true,
                           int max_height = 3, int n_rows = 32);

// Hex digest pinning the grammar a checkpoint belongs to.
std::string config_digest(const GrammarConfig& cfg);

// REINFORCE hyperparameters plus the EMA baseline. The baseline seeds itself
// from the first observed reward.
struct ReinforceState {
    double lr = 0.1;
    double decay = 0.9;
    double baseline = 0.0;
    bool initialized = false;
};

// Tree-structured conditional multinomials keyed by context path. Nodes are
// instantiated (all-zero logits, uniform) only when an update first touches
// them; reads fall back to the uniform distribution.
class DistributionSpace {
  public:
    struct Node {
        std::string path;
        std::vector<std::string> choices;
        std::vector<double> logits;
    };

    explicit DistributionSpace(GrammarConfig cfg);

    const GrammarConfig& config() const { return cfg_; }
    const std::vector<Node>& nodes() const { return nodes_; }

    // Choice names and probabilities at a context key, instantiated or not.
    std::pair<std::vector<std::string>, std::vector<double>> distribution(
        const std::string& path_key) const;

    Node& touch(const std::string& path_key);       // instantiate if needed
    const Node* find(const std::string& path_key) const;

  private:
    GrammarConfig cfg_;
    std::vector<Node> nodes_;  // insertion order, serialized as-is
    std::unordered_map<std::string, std::size_t> index_;
};

DistributionSpace new_space(GrammarConfig cfg);

std::pair<dsl::TreePtr, double> sample_tree(const DistributionSpace& space, Rng& rng);
double log_prob(const DistributionSpace& space, const dsl::TreePtr& tree);

void reinforce_update(DistributionSpace& space, ReinforceState& state, const dsl::TreePtr& tree,
                      double reward);

// Every tree of the grammar (shape-valid or not) with its probability.
std::vector<std::pair<dsl::TreePtr, double>> enumerate_trees(const DistributionSpace& space);

std::string save_space(const DistributionSpace& space, const ReinforceState& state);
std::pair<DistributionSpace, ReinforceState> load_space(const std::string& bytes,
                                                        const GrammarConfig& cfg);

// Marginal of one grouping operator at the root cell.
double root_grouping_prob(const DistributionSpace& space, dsl::GroupingOp g);

// Connection-slot choice names for a cell with the given remaining height.
std::vector<std::string> conn_choice_names(const GrammarConfig& cfg, int level_budget);

}  // namespace agps::grammar
