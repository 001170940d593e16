#include <cmath>
#include <map>
#include <set>

#include "agps/dsl/tree.hpp"
#include "agps/errors.hpp"
#include "agps/grammar/space.hpp"
#include "agps/rng.hpp"
#include "agps/stats.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace agps;

namespace {

grammar::GrammarConfig degenerate_grammar() {
    grammar::GrammarConfig cfg;
    cfg.max_height = 3;
    cfg.n_rows = 8;
    cfg.groupings = {dsl::GroupingOp::Sum};
    cfg.unaries = {dsl::UnaryOp::Identity};
    cfg.binaries = {};
    cfg.operants = {dsl::OperantId{"P", 3, dsl::OperantRule::Base, 0, -1}};
    return cfg;
}

std::vector<dsl::OperantId> task_ops() { return dsl::build_operant_set({"P", "N"}); }

}  // namespace

TEST_CASE("fresh space is uniform at the root") {
    auto space = grammar::new_space(grammar::full_grammar(task_ops()));
    auto [names, probs] = space.distribution("g");
    REQUIRE(names.size() == 4);
    for (double p : probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
    double total = 0;
    for (int i = 0; i < dsl::kNumGrouping; ++i)
        total += grammar::root_grouping_prob(space, static_cast<dsl::GroupingOp>(i));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("connection choice counts follow the height budget") {
    auto cfg = grammar::full_grammar(task_ops());
    CHECK(grammar::conn_choice_names(cfg, 3).size() == 19);  // 3*6+1
    CHECK(grammar::conn_choice_names(cfg, 2).size() == 7);   // 6+1: pair children leaf-only
    auto mini = testutil::mini_grammar();
    CHECK(grammar::conn_choice_names(mini, 3).size() == 4);  // 3*1+1
    CHECK(grammar::conn_choice_names(mini, 2).size() == 2);
}

TEST_CASE("empty operator lists are rejected") {
    auto cfg = testutil::mini_grammar();
    cfg.groupings.clear();
    CHECK_THROWS_AS(grammar::new_space(cfg), ConfigError);
    cfg = testutil::mini_grammar();
    cfg.unaries.clear();
    CHECK_THROWS_AS(grammar::new_space(cfg), ConfigError);
}

TEST_CASE("mini grammar enumeration: count, mass, hand probability") {
    auto space = grammar::new_space(testutil::mini_grammar());
    auto all = grammar::enumerate_trees(space);
    CHECK(all.size() == 2640);

    double mass = 0.0;
    for (const auto& [t, p] : all) mass += p;
    CHECK(std::fabs(mass - 1.0) < 1e-9);

    // single-leaf tree: (1/2 grouping)(1/2 unary)(1/4 connection)(1/2 leaf
    // unary)(1/2 operant) = 1/64, exactly representable so the comparison is
    // exact
    auto t = dsl::parse_tree("identity(sum(identity(P)))");
    CHECK(grammar::log_prob(space, t) == std::log(1.0 / 64.0));

    // enumerated probability and log_prob agree on every tree
    for (const auto& [tree, p] : all)
        CHECK(std::fabs(grammar::log_prob(space, tree) - std::log(p)) < 1e-12);

    // enumeration emits distinct trees
    std::set<std::string> texts;
    for (const auto& [tree, p] : all) texts.insert(dsl::print_tree(tree));
    CHECK(texts.size() == all.size());
}

TEST_CASE("degenerate grammar has a single certain tree") {
    auto space = grammar::new_space(degenerate_grammar());
    auto all = grammar::enumerate_trees(space);
    REQUIRE(all.size() == 1);
    CHECK(all[0].second == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(grammar::log_prob(space, all[0].first) == 0.0);
    Rng rng(1);
    auto [t, lp] = grammar::sample_tree(space, rng);
    CHECK(dsl::tree_equal(t, all[0].first));
    CHECK(lp == 0.0);
}

TEST_CASE("full two-base grammar refuses exhaustive enumeration") {
    auto space = grammar::new_space(grammar::full_grammar(task_ops()));
    CHECK_THROWS_AS(grammar::enumerate_trees(space), EnumerationTooLarge);
}

TEST_CASE("sampled log-prob matches log_prob and trees are valid") {
    auto space = grammar::new_space(grammar::full_grammar(task_ops()));
    Rng rng(42);
    for (int i = 0; i < 100; ++i) {
        auto [t, lp] = grammar::sample_tree(space, rng);
        CHECK(lp == grammar::log_prob(space, t));
        CHECK_NOTHROW(dsl::validate_structure(t));
        std::map<std::string, int> dims;
        for (const auto& o : space.config().operants) dims[o.name] = o.dim;
        CHECK_NOTHROW(dsl::infer_shape(t, dims, space.config().n_rows));
    }
}

TEST_CASE("sampling matches enumerated probabilities (chi-square)") {
    auto space = grammar::new_space(testutil::mini_grammar());
    auto all = grammar::enumerate_trees(space);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < all.size(); ++i) index[dsl::print_tree(all[i].first)] = i;

    const int n = 10000;
    std::vector<int> counts(all.size(), 0);
    Rng rng(7);
    for (int i = 0; i < n; ++i) {
        auto [t, lp] = grammar::sample_tree(space, rng);
        auto it = index.find(dsl::print_tree(t));
        REQUIRE(it != index.end());
        counts[it->second]++;
    }

    // bin trees so every expected count is >= 5, then chi-square
    std::vector<std::pair<double, double>> bins;  // (expected, observed)
    double e_acc = 0, o_acc = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        e_acc += n * all[i].second;
        o_acc += counts[i];
        if (e_acc >= 5.0) {
            bins.push_back({e_acc, o_acc});
            e_acc = o_acc = 0;
        }
    }
    if (e_acc > 0 && !bins.empty()) {
        bins.back().first += e_acc;
        bins.back().second += o_acc;
    }
    REQUIRE(bins.size() >= 10);
    double chi2 = 0;
    for (auto& [e, o] : bins) chi2 += (o - e) * (o - e) / e;
    const double dof = static_cast<double>(bins.size()) - 1.0;
    const double p_value = 1.0 - stats::chi_square_cdf(chi2, dof);
    CHECK(p_value > 0.001);
}

TEST_CASE("reinforce moves log-prob in the advantage direction") {
    auto space = grammar::new_space(testutil::mini_grammar());
    Rng rng(3);
    auto [t, lp0] = grammar::sample_tree(space, rng);
    grammar::ReinforceState st;

    // first update initializes the baseline to the reward, so push a
    // below-baseline then an above-baseline reward
    grammar::reinforce_update(space, st, t, 0.5);
    CHECK(st.baseline == doctest::Approx(0.5).epsilon(1e-15));
    double lp1 = grammar::log_prob(space, t);
    CHECK(lp1 == lp0);  // zero advantage on the very first update

    grammar::reinforce_update(space, st, t, 1.0);
    const double lp2 = grammar::log_prob(space, t);
    CHECK(lp2 > lp1);

    grammar::reinforce_update(space, st, t, -1.0);
    CHECK(grammar::log_prob(space, t) < lp2);
    CHECK_THROWS_AS(
        grammar::reinforce_update(space, st, t, std::numeric_limits<double>::quiet_NaN()),
        NonFiniteReward);
    CHECK_THROWS_AS(
        grammar::reinforce_update(space, st, t, std::numeric_limits<double>::infinity()),
        NonFiniteReward);
}

TEST_CASE("updates touch only the sampled path") {
    auto cfg = testutil::mini_grammar();
    auto space = grammar::new_space(cfg);
    grammar::ReinforceState st;
    auto t = dsl::parse_tree("identity(sum(identity(P)))");
    grammar::reinforce_update(space, st, t, 1.0);
    grammar::reinforce_update(space, st, t, 2.0);

    std::set<std::string> touched;
    for (const auto& n : space.nodes()) touched.insert(n.path);
    // exactly the five decision nodes along the single-leaf path
    CHECK(touched.size() == 5);

    // an unrelated tree's distribution is still uniform
    auto other = dsl::parse_tree("square(max(square(N)))");
    auto lp = grammar::log_prob(space, other);
    auto fresh = grammar::new_space(cfg);
    // off-path conditionals unchanged: only the shared root-grouping choice
    // may differ, and `other` uses max while the update touched sum
    auto [names, probs] = space.distribution("g=max.u");
    for (double p : probs) CHECK(p == doctest::Approx(0.5).epsilon(1e-12));
    (void)lp;
    (void)fresh;
}

TEST_CASE("bandit reward concentrates the root grouping") {
    auto space = grammar::new_space(grammar::full_grammar(task_ops()));
    grammar::ReinforceState st;  // lr 0.1, decay 0.9
    Rng rng(1);
    CHECK(grammar::root_grouping_prob(space, dsl::GroupingOp::Svd) ==
          doctest::Approx(0.25).epsilon(1e-12));
    for (int i = 0; i < 500; ++i) {
        auto [t, lp] = grammar::sample_tree(space, rng);
        const double r = (t->grouping == dsl::GroupingOp::Svd) ? 1.0 : 0.0;
        grammar::reinforce_update(space, st, t, r);
    }
    CHECK(grammar::root_grouping_prob(space, dsl::GroupingOp::Svd) > 0.9);
}

TEST_CASE("unknown operators are rejected by log_prob") {
    auto cfg = testutil::mini_grammar();  // no centralize, no svd
    auto space = grammar::new_space(cfg);
    CHECK_THROWS_AS(grammar::log_prob(space, dsl::parse_tree("centralize(sum(identity(P)))")),
                    UnknownChoice);
    CHECK_THROWS_AS(grammar::log_prob(space, dsl::parse_tree("identity(svd(identity(P)))")),
                    UnknownChoice);
    CHECK_THROWS_AS(grammar::log_prob(space, dsl::parse_tree("identity(sum(identity(Q)))")),
                    UnknownChoice);
}

TEST_CASE("checkpoint round-trip is byte-exact") {
    auto cfg = testutil::mini_grammar();
    auto space = grammar::new_space(cfg);
    grammar::ReinforceState st;
    Rng rng(19);
    for (int i = 0; i < 50; ++i) {
        auto [t, lp] = grammar::sample_tree(space, rng);
        grammar::reinforce_update(space, st, t, rng.uniform());
    }
    auto bytes = grammar::save_space(space, st);
    auto [space2, st2] = grammar::load_space(bytes, cfg);
    CHECK(grammar::save_space(space2, st2) == bytes);
    CHECK(st2.baseline == st.baseline);
    CHECK(st2.initialized == st.initialized);

    Rng check(5);
    auto probe = grammar::new_space(cfg);
    for (int i = 0; i < 100; ++i) {
        auto [t, lp] = grammar::sample_tree(probe, check);
        CHECK(grammar::log_prob(space2, t) == grammar::log_prob(space, t));
    }
}

TEST_CASE("corrupted checkpoints are rejected with diagnostics") {
    auto cfg = testutil::mini_grammar();
    auto space = grammar::new_space(cfg);
    grammar::ReinforceState st;
    auto t = dsl::parse_tree("identity(sum(identity(P)))");
    grammar::reinforce_update(space, st, t, 1.0);
    auto bytes = grammar::save_space(space, st);

    SUBCASE("bad magic") {
        auto bad = bytes;
        bad.replace(bad.find("AGPS"), 4, "XGPS");
        CHECK_THROWS_AS(grammar::load_space(bad, cfg), CorruptCheckpoint);
    }
    SUBCASE("bad version") {
        auto bad = bytes;
        bad.replace(bad.find("\"version\":1"), 11, "\"version\":9");
        try {
            grammar::load_space(bad, cfg);
            FAIL("expected CorruptCheckpoint");
        } catch (const CorruptCheckpoint& e) {
            CHECK(std::string(e.what()).find("version") != std::string::npos);
        }
    }
    SUBCASE("truncated") {
        CHECK_THROWS_AS(grammar::load_space(bytes.substr(0, bytes.size() / 2), cfg),
                        CorruptCheckpoint);
    }
    SUBCASE("digest mismatch against a different grammar") {
        auto other = degenerate_grammar();
        CHECK_THROWS_AS(grammar::load_space(bytes, other), CorruptCheckpoint);
    }
    SUBCASE("tampered node choices") {
        auto bad = bytes;
        const auto pos = bad.find("\"sum\"");
        REQUIRE(pos != std::string::npos);
        bad.replace(pos, 5, "\"zzz\"");
        CHECK_THROWS_AS(grammar::load_space(bad, cfg), CorruptCheckpoint);
    }
}

TEST_CASE("config digest pins the grammar") {
    auto a = grammar::config_digest(testutil::mini_grammar());
    auto b = grammar::config_digest(testutil::mini_grammar());
    CHECK(a == b);
    CHECK(a.size() == 16);
    auto cfg = testutil::mini_grammar();
    cfg.n_rows = 16;
    CHECK(grammar::config_digest(cfg) != a);
    cfg = testutil::mini_grammar();
    cfg.groupings.push_back(dsl::GroupingOp::Svd);
    CHECK(grammar::config_digest(cfg) != a);
}

TEST_CASE("mid-height-2 grammar stays enumerable") {
    auto cfg = testutil::mini_grammar();
    cfg.max_height = 2;
    auto space = grammar::new_space(cfg);
    auto all = grammar::enumerate_trees(space);
    CHECK(all.size() > 0);
    double mass = 0;
    for (auto& [t, p] : all) mass += p;
    CHECK(std::fabs(mass - 1.0) < 1e-9);
    // height-2 trees have no level-2 mid cells anywhere
    for (auto& [t, p] : all) {
        CHECK(t->level == 3);
        if (t->is_pair) {
            CHECK(t->left->kind == dsl::TreeNode::Kind::Leaf);
            CHECK(t->right->kind == dsl::TreeNode::Kind::Leaf);
        } else {
            CHECK(t->left->kind == dsl::TreeNode::Kind::Leaf);
        }
    }
}
