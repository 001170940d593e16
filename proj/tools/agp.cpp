#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <algorithm>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "agps/config.hpp"
#include "agps/rng.hpp"
#include "agps/errors.hpp"
#include "agps/eval/crossval.hpp"
#include "agps/oracle/checks.hpp"
#include "agps/search/search.hpp"
#include "agps/search/selection.hpp"
#include "agps/synth/io.hpp"

namespace fs = std::filesystem;
using namespace agps;

namespace {

struct Common {
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> task;
    std::optional<std::string> data;
    std::optional<std::string> out;
    std::optional<int> threads;
};

void add_common(CLI::App* sub, Common& c, bool with_out = true) {
    sub->add_option("--config", c.config_file, "JSON config file");
    sub->add_option("--set", c.sets, "config override, repeatable")->type_name("KEY=VALUE");
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_option("--task", c.task, "primitive or mobility");
    sub->add_option("--data", c.data, "dataset file (.agpd)");
    if (with_out) sub->add_option("--out", c.out, "run-directory root");
    sub->add_option("--threads", c.threads, "worker cap (0 = serial)")->envname("AGP_THREADS");
}

config::RunConfig resolve(const Common& c) {
    config::RunConfig cfg = c.config_file.empty() ? config::parse_config("")
                                                  : config::load_config_file(c.config_file);
    for (const auto& kv : c.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError(kv, "expected KEY=VALUE");
        config::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (c.seed) cfg.seed = *c.seed;
    if (c.task) cfg.task = *c.task;
    if (c.data) cfg.data = *c.data;
    if (c.out) cfg.out = *c.out;
    if (c.threads) cfg.threads = *c.threads;
    config::validate(cfg);
    return cfg;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void dump_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << bytes;
    if (!out) throw IoError("write failed: " + path);
}

// Loads --data when given, otherwise generates the default synthetic set.
synth::PartDataset obtain_dataset(config::RunConfig& cfg) {
    if (!cfg.data.empty()) {
        auto ds = synth::read_dataset(cfg.data);
        cfg.task = synth::task_name(ds.task);  // the file is the authority
        return ds;
    }
    auto specs = config::make_specs(cfg);
    return config::parse_task(cfg.task) == synth::Task::Primitive
               ? synth::gen_primitive_dataset(specs, cfg.seed)
               : synth::gen_mobility_dataset(specs, cfg.seed);
}

std::string make_run_dir(const config::RunConfig& cfg) {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    std::string base = cfg.out + "/" + cfg.task + "_" + std::to_string(cfg.seed) + "_" + stamp;
    std::string dir = base;
    for (int i = 2; fs::exists(dir); ++i) dir = base + "-" + std::to_string(i);
    fs::create_directories(dir);
    dump_file(dir + "/config.resolved", config::resolved_text(cfg));
    return dir;
}

int resolve_holdout(const synth::PartDataset& ds, int holdout) {
    int n = static_cast<int>(ds.domains.size());
    if (holdout < 0) return n - 1;
    if (holdout >= n) throw ConfigError("holdout", "domain index out of range");
    return holdout;
}

int cmd_gen(const Common& c, const std::string& out_file) {
    auto cfg = resolve(c);
    auto specs = config::make_specs(cfg);
    auto ds = config::parse_task(cfg.task) == synth::Task::Primitive
                  ? synth::gen_primitive_dataset(specs, cfg.seed)
                  : synth::gen_mobility_dataset(specs, cfg.seed);
    std::string path = out_file.empty() ? cfg.task + "_" + std::to_string(cfg.seed) + ".agpd"
                                        : out_file;
    synth::write_dataset(ds, path);
    std::size_t n_shapes = 0;
    for (const auto& d : ds.domains) n_shapes += d.shapes.size();
    std::fprintf(stderr, "gen: %zu domains, %zu shapes, task %s, seed %llu\n",
                 ds.domains.size(), n_shapes, cfg.task.c_str(),
                 static_cast<unsigned long long>(cfg.seed));
    std::printf("%s\n", path.c_str());
    return 0;
}

int cmd_search(const Common& c, int holdout, const std::string& resume_dir) {
    auto cfg = resolve(c);
    auto ds = obtain_dataset(cfg);
    holdout = resolve_holdout(ds, holdout);
    auto train_ds = synth::drop_domain(ds, holdout);
    auto pd = eval::prepare(train_ds, cfg.grammar.n_rows, cfg.grammar.radius, cfg.seed);

    std::string dir;
    bool resume = !resume_dir.empty();
    if (resume) {
        dir = resume_dir;
        fs::create_directories(dir);
        std::string resolved = config::resolved_text(cfg);
        std::string marker = dir + "/config.resolved";
        if (fs::exists(marker)) {
            // `out` is artifact plumbing; the run directory is already fixed here.
            auto norm = [](const std::string& text) {
                auto j = nlohmann::json::parse(text);
                j.erase("out");
                return j.dump();
            };
            if (norm(slurp(marker)) != norm(resolved))
                throw ConfigError("config",
                                  "resumed run was started with a different configuration");
        } else {
            dump_file(marker, resolved);
        }
    } else {
        dir = make_run_dir(cfg);
    }

    eval::TargetCache cache;
    auto reward = search::make_crossval_reward(pd, config::make_train(cfg, false),
                                               cfg.search.reward_mode, cfg.search.single_split,
                                               cfg.seed, &cache);
    auto on_event = [](const search::EventRecord& e) {
        if (e.failed)
            std::fprintf(stderr, "epoch %d sample %d FAILED %s\n", e.epoch, e.sample,
                         e.tree.c_str());
        else
            std::fprintf(stderr, "epoch %d sample %d reward=%.5f val=%.4f %s\n", e.epoch,
                         e.sample, e.reward, e.val, e.tree.c_str());
    };
    auto res = search::run_search(config::make_grammar(cfg), config::make_search(cfg), reward,
                                  cfg.seed, dir, resume, on_event);
    std::fprintf(stderr, "search: %d epochs done, %zu events this run\n", res.epochs_done,
                 res.events.size());
    std::printf("%s\n", dir.c_str());
    return 0;
}

// "greedy", "topk" or "topk:K"; sugar over select.method / search.pool_size
void apply_select_flag(config::RunConfig& cfg, const std::string& flag) {
    if (flag.empty()) return;
    const auto at = flag.find(':');
    const std::string method = flag.substr(0, at);
    config::apply_override(cfg, "select.method", method);
    if (at != std::string::npos)
        config::apply_override(cfg, "search.pool_size", flag.substr(at + 1));
}

int cmd_select(const Common& c, int holdout, const std::string& space_file,
               const std::string& select_flag) {
    auto cfg = resolve(c);
    apply_select_flag(cfg, select_flag);
    config::validate(cfg);
    auto ds = obtain_dataset(cfg);
    holdout = resolve_holdout(ds, holdout);
    auto train_ds = synth::drop_domain(ds, holdout);
    auto pd = eval::prepare(train_ds, cfg.grammar.n_rows, cfg.grammar.radius, cfg.seed);

    auto gcfg = config::make_grammar(cfg);
    grammar::DistributionSpace space(gcfg);
    if (!space_file.empty()) {
        auto [sp, st] = grammar::load_space(slurp(space_file), gcfg);
        space = std::move(sp);
    }

    eval::TargetCache cache;
    auto tcfg = config::make_train(cfg, false);
    tcfg.epochs = cfg.search.select_epochs;
    auto score = search::make_crossval_score(pd, tcfg, cfg.search.reward_mode,
                                             cfg.search.single_split, cfg.seed, &cache);

    search::SelectionLog log;
    std::uint64_t sel_seed = derive_seed(cfg.seed, {1001});
    auto winner = cfg.select.method == "greedy"
                      ? search::greedy_select(space, score, cfg.search.pool_size, sel_seed, &log)
                      : search::topk_select(space, score, cfg.search.pool_size, sel_seed, &log);

    std::string dir = make_run_dir(cfg);
    std::ostringstream js;
    js << "{\"digest\":\"" << grammar::config_digest(gcfg) << "\",\"method\":\""
       << cfg.select.method << "\",\"score\":" << fmt17(winner.score) << ",\"trees\":[";
    for (std::size_t i = 0; i < winner.trees.size(); ++i)
        js << (i ? "," : "") << "\"" << dsl::print_tree(winner.trees[i]) << "\"";
    js << "],\"stage_counts\":[" << log.stage1 << "," << log.stage2 << "," << log.stage3
       << "],\"evaluated\":[";
    for (std::size_t i = 0; i < log.evaluated.size(); ++i) {
        const auto& s = log.evaluated[i];
        js << (i ? "," : "") << "{\"score\":" << (s.failed ? "null" : fmt17(s.score))
           << ",\"trees\":[";
        for (std::size_t k = 0; k < s.trees.size(); ++k)
            js << (k ? "," : "") << "\"" << dsl::print_tree(s.trees[k]) << "\"";
        js << "]}";
    }
    js << "]}\n";
    dump_file(dir + "/selection.json", js.str());

    std::fprintf(stderr, "select: %zu candidates evaluated (stages %zu/%zu/%zu)\n",
                 log.evaluated.size(), log.stage1, log.stage2, log.stage3);
    for (const auto& t : winner.trees) std::printf("%s\n", dsl::print_tree(t).c_str());
    std::printf("score %s\n", fmt17(winner.score).c_str());
    std::printf("%s\n", dir.c_str());
    return 0;
}

std::vector<dsl::TreePtr> trees_from_args(const std::string& trees_arg,
                                          const std::string& selection_file) {
    std::vector<dsl::TreePtr> trees;
    if (!selection_file.empty()) {
        auto j = nlohmann::json::parse(slurp(selection_file));
        for (const auto& t : j.at("trees")) trees.push_back(dsl::parse_tree(t.get<std::string>()));
    } else if (!trees_arg.empty()) {
        std::stringstream ss(trees_arg);
        std::string tok;
        while (std::getline(ss, tok, ';'))
            if (!tok.empty()) trees.push_back(dsl::parse_tree(tok));
    }
    return trees;
}

int cmd_train(const Common& c, int holdout, const std::string& trees_arg,
              const std::string& selection_file) {
    auto cfg = resolve(c);
    auto ds = obtain_dataset(cfg);
    holdout = resolve_holdout(ds, holdout);
    auto pd = eval::prepare(ds, cfg.grammar.n_rows, cfg.grammar.radius, cfg.seed);
    auto trees = trees_from_args(trees_arg, selection_file);

    eval::TargetCache cache;
    auto report = search::final_train_eval(trees, pd, holdout, config::make_train(cfg, true),
                                           cfg.seed, &cache);

    std::string dir = make_run_dir(cfg);
    std::ostringstream js;
    js << "{\"task\":\"" << cfg.task << "\",\"seed\":" << cfg.seed << ",\"holdout\":" << holdout
       << ",\"trees\":[";
    for (std::size_t i = 0; i < trees.size(); ++i)
        js << (i ? "," : "") << "\"" << dsl::print_tree(trees[i]) << "\"";
    js << "],\"in_dist\":" << fmt17(report.in_dist)
       << ",\"out_of_dist\":" << fmt17(report.out_of_dist) << ",\"best_epoch\":"
       << report.best_epoch << ",\"per_class_iou\":[";
    for (std::size_t i = 0; i < report.per_class_iou.size(); ++i)
        js << (i ? "," : "") << fmt17(report.per_class_iou[i]);
    js << "]}\n";
    dump_file(dir + "/report.json", js.str());

    std::printf("in_dist %.6f\nout_of_dist %.6f\n%s\n", report.in_dist, report.out_of_dist,
                dir.c_str());
    return 0;
}

int cmd_eval_tree(const Common& c, const std::string& tree_text, int shape_filter) {
    auto cfg = resolve(c);
    auto tree = dsl::parse_tree(tree_text);
    auto ds = obtain_dataset(cfg);
    auto pd = eval::prepare(ds, cfg.grammar.n_rows, cfg.grammar.radius, cfg.seed);
    auto targets = eval::compute_targets(tree, pd);
    for (std::size_t s = 0; s < targets.per_shape.size(); ++s) {
        if (shape_filter >= 0 && static_cast<int>(s) != shape_filter) continue;
        const auto& G = targets.per_shape[s];
        for (Eigen::Index i = 0; i < G.rows(); ++i) {
            std::printf("%zu %lld", s, static_cast<long long>(i));
            for (Eigen::Index k = 0; k < G.cols(); ++k) std::printf(" %.17g", G(i, k));
            std::printf("\n");
        }
    }
    std::fprintf(stderr, "eval-tree: %s dim %d over %zu shapes\n", targets.tree_text.c_str(),
                 targets.dim, targets.per_shape.size());
    return 0;
}

int cmd_oracle_check(const Common& c) {
    auto cfg = resolve(c);
    auto rows = oracle::run_oracle_checks(cfg.seed);
    bool all = true;
    std::printf("%-14s %-13s %-12s %s\n", "feature", "method", "max_err", "status");
    for (const auto& r : rows) {
        std::printf("%-14s %-13s %-12.3e %s\n", r.name.c_str(), r.method.c_str(), r.err,
                    r.pass ? "PASS" : "FAIL");
        all = all && r.pass;
    }
    std::printf("%zu/%zu formulas pass\n", static_cast<std::size_t>(std::count_if(
                    rows.begin(), rows.end(), [](const auto& r) { return r.pass; })),
                rows.size());
    return all ? 0 : 1;
}

int cmd_enumerate(const Common& c, const std::string& out_file) {
    auto cfg = resolve(c);
    grammar::DistributionSpace space(config::make_grammar(cfg));
    auto trees = grammar::enumerate_trees(space);
    std::ostringstream os;
    double mass = 0.0;
    for (const auto& [t, p] : trees) {
        os << "{\"tree\":\"" << dsl::print_tree(t) << "\",\"p\":" << fmt17(p) << "}\n";
        mass += p;
    }
    if (out_file.empty())
        std::fputs(os.str().c_str(), stdout);
    else
        dump_file(out_file, os.str());
    std::fprintf(stderr, "enumerate: %zu trees, total probability %.12f\n", trees.size(), mass);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Supervision-tree search over part-aware point-cloud features"};
    app.require_subcommand(1);
    app.footer(config::help_text());

    Common c_gen, c_search, c_select, c_train, c_eval, c_oracle, c_enum;
    std::string gen_out, resume_dir, space_file, tree_text, trees_arg, selection_file, enum_out;
    int holdout_search = -1, holdout_select = -1, holdout_train = -1, shape_filter = -1;

    auto* sub_gen = app.add_subcommand("gen", "generate a synthetic dataset file");
    add_common(sub_gen, c_gen, false);
    sub_gen->add_option("--out", gen_out, "output dataset path (.agpd)");

    auto* sub_search = app.add_subcommand("search", "optimize the supervision distribution space");
    add_common(sub_search, c_search);
    sub_search->add_option("--holdout", holdout_search, "domain index held out (default last)");
    sub_search->add_option("--resume", resume_dir, "existing run directory to continue");

    auto* sub_select = app.add_subcommand("select", "pick a supervision set from a space");
    add_common(sub_select, c_select);
    sub_select->add_option("--holdout", holdout_select, "domain index held out (default last)");
    sub_select->add_option("--space", space_file, "space checkpoint from a search run");
    std::string select_flag;
    sub_select->add_option("--select", select_flag, "greedy | topk | topk:K");

    auto* sub_train = app.add_subcommand("train", "final training plus held-out evaluation");
    add_common(sub_train, c_train);
    sub_train->add_option("--holdout", holdout_train, "domain index held out (default last)");
    sub_train->add_option("--trees", trees_arg, "semicolon-separated tree texts");
    sub_train->add_option("--selection", selection_file, "selection.json from select");

    auto* sub_eval = app.add_subcommand("eval-tree", "dump per-point tree outputs");
    add_common(sub_eval, c_eval);
    sub_eval->add_option("--tree", tree_text, "tree text")->required();
    sub_eval->add_option("--shape", shape_filter, "restrict to one prepared shape index");

    auto* sub_oracle = app.add_subcommand("oracle-check", "geometric feature recovery table");
    add_common(sub_oracle, c_oracle, false);

    auto* sub_enum = app.add_subcommand("enumerate", "dump every tree with its probability");
    add_common(sub_enum, c_enum, false);
    sub_enum->add_option("--out", enum_out, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(sub_gen)) return cmd_gen(c_gen, gen_out);
        if (app.got_subcommand(sub_search)) return cmd_search(c_search, holdout_search, resume_dir);
        if (app.got_subcommand(sub_select))
            return cmd_select(c_select, holdout_select, space_file, select_flag);
        if (app.got_subcommand(sub_train))
            return cmd_train(c_train, holdout_train, trees_arg, selection_file);
        if (app.got_subcommand(sub_eval)) return cmd_eval_tree(c_eval, tree_text, shape_filter);
        if (app.got_subcommand(sub_oracle)) return cmd_oracle_check(c_oracle);
        if (app.got_subcommand(sub_enum)) return cmd_enumerate(c_enum, enum_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }
    return 0;
}
