#include <set>
#include <sstream>

#include "agps/config.hpp"
#include "agps/errors.hpp"
#include "doctest.h"

using namespace agps;

TEST_CASE("empty config yields pure defaults") {
    for (const char* text : {"", "{}", "  \n "}) {
        auto cfg = config::parse_config(text);
        CHECK(cfg.seed == 7);
        CHECK(cfg.task == "primitive");
        CHECK(cfg.data.empty());
        CHECK(cfg.out == "runs");
        CHECK(cfg.synth.shapes == 60);
        CHECK(cfg.synth.points == 512);
        CHECK(cfg.synth.noise == 0.0);
        CHECK(cfg.grammar.max_height == 3);
        CHECK(cfg.grammar.n_rows == 32);
        CHECK(cfg.grammar.radius == 0.5);
        CHECK(cfg.search.epochs == 30);
        CHECK(cfg.search.samples == 4);
        CHECK(cfg.search.lr == 0.1);
        CHECK(cfg.search.baseline_decay == 0.9);
        CHECK(cfg.search.pool_size == 8);
        CHECK(cfg.search.reward_mode == "gap");
        CHECK(cfg.search.single_split == false);
        CHECK(cfg.search.select_epochs == 5);
        CHECK(cfg.eval.lambda == 1.0);
        CHECK(cfg.eval.epochs == 1);
        CHECK(cfg.select.method == "greedy");
    }
}

TEST_CASE("nested and dotted keys both parse") {
    auto nested = config::parse_config(R"({"search":{"epochs":5,"samples":2},"seed":11})");
    CHECK(nested.search.epochs == 5);
    CHECK(nested.search.samples == 2);
    CHECK(nested.seed == 11);

    auto dotted = config::parse_config(R"({"search.epochs":5,"grammar.radius":0.7})");
    CHECK(dotted.search.epochs == 5);
    CHECK(dotted.grammar.radius == 0.7);
}

TEST_CASE("config error messages are exact") {
    try {
        config::parse_config(R"({"search":{"epochs":-1}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()) == "config error [search.epochs]: must be >= 1");
        CHECK(e.key == "search.epochs");
    }

    try {
        config::parse_config(R"({"serach":{"epochs":3}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("did you mean") != std::string::npos);
        CHECK(std::string(e.what()).find("search") != std::string::npos);
    }

    try {
        config::parse_config(R"({"serach.epochs":3})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("did you mean \"search.epochs\"") !=
              std::string::npos);
    }

    CHECK_THROWS_AS(config::parse_config("not json"), ConfigError);
    CHECK_THROWS_AS(config::parse_config("[1,2]"), ConfigError);
    CHECK_THROWS_AS(config::parse_config(R"({"search":{"epochs":"three"}})"), ConfigError);
    CHECK_THROWS_AS(config::parse_config(R"({"search":3})"), ConfigError);
    CHECK_THROWS_AS(config::parse_config(R"({"task":"sculpture"})"), ConfigError);
    CHECK_THROWS_AS(config::parse_config(R"({"grammar":{"max_height":4}})"), ConfigError);
    CHECK_THROWS_AS(config::parse_config(R"({"search":{"reward_mode":"loss"}})"), ConfigError);
    CHECK_THROWS_AS(config::parse_config(R"({"grammar":{"groupings":""}})"), ConfigError);
    CHECK_THROWS_AS(config::parse_config(R"({"grammar":{"groupings":"sum,sum"}})"),
                    ConfigError);
    CHECK_THROWS_AS(config::parse_config(R"({"grammar":{"unaries":"identity,sqrt"}})"),
                    ConfigError);
    CHECK_THROWS_AS(config::parse_config(R"({"select":{"method":"random"}})"), ConfigError);
}

TEST_CASE("set-style overrides parse per schema type") {
    auto cfg = config::parse_config("{}");
    config::apply_override(cfg, "search.epochs", "12");
    CHECK(cfg.search.epochs == 12);
    config::apply_override(cfg, "seed", "18446744073709551615");
    CHECK(cfg.seed == 18446744073709551615ULL);
    config::apply_override(cfg, "grammar.radius", "0.25");
    CHECK(cfg.grammar.radius == 0.25);
    config::apply_override(cfg, "search.single_split", "true");
    CHECK(cfg.search.single_split);
    config::apply_override(cfg, "search.single_split", "0");
    CHECK(!cfg.search.single_split);
    config::apply_override(cfg, "task", "mobility");
    CHECK(cfg.task == "mobility");

    CHECK_THROWS_AS(config::apply_override(cfg, "search.epochs", "three"), ConfigError);
    CHECK_THROWS_AS(config::apply_override(cfg, "seed", "-4"), ConfigError);
    CHECK_THROWS_AS(config::apply_override(cfg, "search.single_split", "maybe"), ConfigError);
    CHECK_THROWS_AS(config::apply_override(cfg, "nosuch.key", "1"), ConfigError);
}

TEST_CASE("resolved text round-trips and is canonical") {
    auto cfg = config::parse_config(R"({"search":{"epochs":3},"synth":{"noise":0.05}})");
    auto text = config::resolved_text(cfg);
    auto back = config::parse_config(text);
    CHECK(config::resolved_text(back) == text);
    CHECK(back.search.epochs == 3);
    CHECK(back.synth.noise == 0.05);

    // canonical order: top-level scalars then sections in schema order
    CHECK(text.find("\"seed\"") < text.find("\"synth\""));
    CHECK(text.find("\"synth\"") < text.find("\"grammar\""));
    CHECK(text.find("\"grammar\"") < text.find("\"search\""));
    CHECK(text.find("\"search\"") < text.find("\"eval\""));
}

TEST_CASE("help text lists every schema key with its default") {
    auto help = config::help_text();
    std::set<std::string> keys;
    for (const auto& entry : config::schema()) {
        CHECK(help.find(entry.key) != std::string::npos);
        keys.insert(entry.key);
    }
    CHECK(keys.size() == config::schema().size());
    CHECK(keys.count("search.epochs") == 1);
    CHECK(keys.count("eval.final_epochs") == 1);
    CHECK(keys.count("select.method") == 1);
    // defaults rendered from the default-constructed config
    CHECK(help.find("search.epochs (int) = 30") != std::string::npos);
    CHECK(help.find("grammar.radius (real) = 0.5") != std::string::npos);
    CHECK(help.find("task (string) = \"primitive\"") != std::string::npos);
}

TEST_CASE("factories mirror the config") {
    auto cfg = config::parse_config(
        R"({"grammar":{"max_height":2,"n_rows":12,"groupings":"sum,svd","unaries":"identity,neg","binaries":"add"}})");
    auto gcfg = config::make_grammar(cfg);
    CHECK(gcfg.max_height == 2);
    CHECK(gcfg.n_rows == 12);
    REQUIRE(gcfg.groupings.size() == 2);
    CHECK(gcfg.groupings[1] == dsl::GroupingOp::Svd);
    REQUIRE(gcfg.unaries.size() == 2);
    CHECK(gcfg.unaries[1] == dsl::UnaryOp::Negative);
    REQUIRE(gcfg.binaries.size() == 1);
    CHECK(gcfg.operants.size() == 7);  // two task channels expand to seven operants

    auto cfg2 = config::parse_config(R"({"grammar":{"binaries":""}})");
    CHECK(config::make_grammar(cfg2).binaries.empty());

    auto specs = config::make_specs(config::parse_config(
        R"({"synth":{"shapes":9,"points":64,"noise":0.01}})"));
    REQUIRE(specs.size() == 4);
    for (const auto& s : specs) {
        CHECK(s.shapes_count == 9);
        CHECK(s.points_per_shape == 64);
        CHECK(s.noise_sigma == 0.01);
    }

    auto scfg = config::make_search(config::parse_config(R"({"search":{"epochs":4}})"));
    CHECK(scfg.epochs == 4);
    CHECK(scfg.samples_per_epoch == 4);

    auto cfg3 = config::parse_config(
        R"({"eval":{"epochs":2,"lr":0.002,"final_epochs":9,"final_lr":0.004,"lambda":0.5}})");
    auto search_t = config::make_train(cfg3, false);
    CHECK(search_t.epochs == 2);
    CHECK(search_t.lr == 0.002);
    CHECK(search_t.lambda_sup == 0.5);
    auto final_t = config::make_train(cfg3, true);
    CHECK(final_t.epochs == 9);
    CHECK(final_t.lr == 0.004);

    CHECK(config::parse_task("primitive") == synth::Task::Primitive);
    CHECK(config::parse_task("mobility") == synth::Task::Mobility);
    CHECK_THROWS_AS(config::parse_task("voxels"), ConfigError);
}

TEST_CASE("validation bounds") {
    auto check_throws = [](const std::string& json) {
        CHECK_THROWS_AS(config::parse_config(json), ConfigError);
    };
    check_throws(R"({"synth":{"shapes":0}})");
    check_throws(R"({"synth":{"points":4}})");
    check_throws(R"({"synth":{"noise":-0.1}})");
    check_throws(R"({"grammar":{"n_rows":0}})");
    check_throws(R"({"grammar":{"radius":0}})");
    check_throws(R"({"search":{"samples":0}})");
    check_throws(R"({"search":{"lr":0}})");
    check_throws(R"({"search":{"baseline_decay":1}})");
    check_throws(R"({"search":{"pool_size":2}})");
    check_throws(R"({"search":{"select_epochs":0}})");
    check_throws(R"({"eval":{"lr":0}})");
    check_throws(R"({"eval":{"weight_decay":-1}})");
    check_throws(R"({"eval":{"lambda":-0.5}})");
    check_throws(R"({"eval":{"epochs":0}})");
    check_throws(R"({"eval":{"final_epochs":0}})");
    check_throws(R"({"threads":-1})");
}
