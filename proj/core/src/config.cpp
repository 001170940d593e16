#include "agps/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "agps/dsl/ops.hpp"
#include "agps/errors.hpp"
#include "agps/eval/crossval.hpp"

namespace agps::config {

namespace {

using json = nlohmann::json;

struct Entry {
    SchemaEntry pub;
    std::function<json(const RunConfig&)> get;
    std::function<void(RunConfig&, const json&)> set;
};

const char* type_name(VType t) {
    switch (t) {
        case VType::Int: return "int";
        case VType::U64: return "uint";
        case VType::Real: return "real";
        case VType::Bool: return "bool";
        case VType::Str: return "string";
    }
    return "?";
}

void check_type(const std::string& key, VType t, const json& v) {
    bool ok = false;
    switch (t) {
        case VType::Int: ok = v.is_number_integer(); break;
        case VType::U64:
            ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
            break;
        case VType::Real: ok = v.is_number(); break;
        case VType::Bool: ok = v.is_boolean(); break;
        case VType::Str: ok = v.is_string(); break;
    }
    if (!ok) throw ConfigError(key, std::string("expected ") + type_name(t));
}

template <typename T, typename F>
Entry make_entry(std::string key, VType t, std::string desc, F field) {
    Entry e;
    e.pub = {key, t, std::move(desc)};
    e.get = [field](const RunConfig& c) { return json(field(const_cast<RunConfig&>(c))); };
    e.set = [key, t, field](RunConfig& c, const json& v) {
        check_type(key, t, v);
        field(c) = v.get<T>();
    };
    return e;
}

std::vector<Entry> build_table() {
    std::vector<Entry> t;
    auto I = [&](std::string k, std::string d, auto f) {
        t.push_back(make_entry<int>(std::move(k), VType::Int, std::move(d), f));
    };
    auto U = [&](std::string k, std::string d, auto f) {
        t.push_back(make_entry<std::uint64_t>(std::move(k), VType::U64, std::move(d), f));
    };
    auto R = [&](std::string k, std::string d, auto f) {
        t.push_back(make_entry<double>(std::move(k), VType::Real, std::move(d), f));
    };
    auto B = [&](std::string k, std::string d, auto f) {
        t.push_back(make_entry<bool>(std::move(k), VType::Bool, std::move(d), f));
    };
    auto S = [&](std::string k, std::string d, auto f) {
        t.push_back(make_entry<std::string>(std::move(k), VType::Str, std::move(d), f));
    };

    U("seed", "master seed; everything else derives from it",
      [](RunConfig& c) -> std::uint64_t& { return c.seed; });
    S("task", "primitive or mobility", [](RunConfig& c) -> std::string& { return c.task; });
    S("data", "dataset file; empty generates the default synthetic set in memory",
      [](RunConfig& c) -> std::string& { return c.data; });
    S("out", "root directory for run artifacts", [](RunConfig& c) -> std::string& { return c.out; });
    I("threads", "worker cap; 0 runs serially", [](RunConfig& c) -> int& { return c.threads; });

    I("synth.shapes", "shapes per domain", [](RunConfig& c) -> int& { return c.synth.shapes; });
    I("synth.points", "points per shape", [](RunConfig& c) -> int& { return c.synth.points; });
    R("synth.noise", "positional noise sigma before normalization",
      [](RunConfig& c) -> double& { return c.synth.noise; });

    I("grammar.max_height", "operation-tree height, 2 or 3",
      [](RunConfig& c) -> int& { return c.grammar.max_height; });
    I("grammar.n_rows", "part-aware neighbor rows per context",
      [](RunConfig& c) -> int& { return c.grammar.n_rows; });
    R("grammar.radius", "neighbor sampling radius",
      [](RunConfig& c) -> double& { return c.grammar.radius; });
    S("grammar.groupings", "comma list of grouping operators",
      [](RunConfig& c) -> std::string& { return c.grammar.groupings; });
    S("grammar.unaries", "comma list of unary operators",
      [](RunConfig& c) -> std::string& { return c.grammar.unaries; });
    S("grammar.binaries", "comma list of binary operators; may be empty",
      [](RunConfig& c) -> std::string& { return c.grammar.binaries; });

    I("search.epochs", "search epochs", [](RunConfig& c) -> int& { return c.search.epochs; });
    I("search.samples", "trees sampled per epoch",
      [](RunConfig& c) -> int& { return c.search.samples; });
    R("search.lr", "policy learning rate", [](RunConfig& c) -> double& { return c.search.lr; });
    R("search.baseline_decay", "reward baseline EMA decay",
      [](RunConfig& c) -> double& { return c.search.baseline_decay; });
    I("search.pool_size", "selection pool size K",
      [](RunConfig& c) -> int& { return c.search.pool_size; });
    S("search.reward_mode", "gap (val minus train) or val",
      [](RunConfig& c) -> std::string& { return c.search.reward_mode; });
    B("search.single_split", "use one train/val split instead of all folds",
      [](RunConfig& c) -> bool& { return c.search.single_split; });
    I("search.select_epochs", "per-fold epochs during selection",
      [](RunConfig& c) -> int& { return c.search.select_epochs; });

    R("eval.lr", "classifier Adam learning rate",
      [](RunConfig& c) -> double& { return c.eval.lr; });
    R("eval.weight_decay", "classifier weight decay",
      [](RunConfig& c) -> double& { return c.eval.weight_decay; });
    R("eval.lambda", "supervision loss weight",
      [](RunConfig& c) -> double& { return c.eval.lambda; });
    I("eval.epochs", "per-fold epochs during search",
      [](RunConfig& c) -> int& { return c.eval.epochs; });
    I("eval.final_epochs", "epochs for the final training stage",
      [](RunConfig& c) -> int& { return c.eval.final_epochs; });
    R("eval.final_lr", "learning rate for the final training stage",
      [](RunConfig& c) -> double& { return c.eval.final_lr; });

    S("select.method", "greedy or topk", [](RunConfig& c) -> std::string& { return c.select.method; });
    return t;
}

const std::vector<Entry>& table() {
    static const std::vector<Entry> t = build_table();
    return t;
}

const std::unordered_map<std::string, std::size_t>& key_index() {
    static const std::unordered_map<std::string, std::size_t> m = [] {
        std::unordered_map<std::string, std::size_t> r;
        for (std::size_t i = 0; i < table().size(); ++i) r[table()[i].pub.key] = i;
        return r;
    }();
    return m;
}

std::vector<std::string> sections() {
    std::vector<std::string> out;
    for (const auto& e : table()) {
        auto dot = e.pub.key.find('.');
        if (dot == std::string::npos) continue;
        std::string s = e.pub.key.substr(0, dot);
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
    return out;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

[[noreturn]] void unknown_key(const std::string& key) {
    std::string best;
    std::size_t best_d = static_cast<std::size_t>(-1);
    auto consider = [&](const std::string& cand) {
        std::size_t d = levenshtein(key, cand);
        if (d < best_d) {
            best_d = d;
            best = cand;
        }
    };
    for (const auto& e : table()) consider(e.pub.key);
    for (const auto& s : sections()) consider(s);
    std::string why = "unknown key";
    if (!best.empty() && best_d <= std::max<std::size_t>(3, key.size() / 2))
        why += "; did you mean \"" + best + "\"?";
    throw ConfigError(key, why);
}

void apply_json(RunConfig& cfg, const std::string& key, const json& v) {
    auto it = key_index().find(key);
    if (it == key_index().end()) {
        for (const auto& s : sections())
            if (key == s) throw ConfigError(key, "expected an object with " + s + ".* keys");
        unknown_key(key);
    }
    table()[it->second].set(cfg, v);
}

void flatten(RunConfig& cfg, const std::string& prefix, const json& obj) {
    for (const auto& [k, v] : obj.items()) {
        std::string path = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object())
            flatten(cfg, path, v);
        else
            apply_json(cfg, path, v);
    }
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, ','))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<dsl::GroupingOp> parse_groupings(const std::string& csv) {
    std::vector<dsl::GroupingOp> out;
    for (const auto& tok : split_csv(csv)) {
        auto g = dsl::grouping_from(tok);
        if (!g) throw ConfigError("grammar.groupings", "unknown grouping operator \"" + tok + "\"");
        if (std::find(out.begin(), out.end(), *g) != out.end())
            throw ConfigError("grammar.groupings", "duplicate operator \"" + tok + "\"");
        out.push_back(*g);
    }
    if (out.empty()) throw ConfigError("grammar.groupings", "must list at least one operator");
    return out;
}

std::vector<dsl::UnaryOp> parse_unaries(const std::string& csv) {
    std::vector<dsl::UnaryOp> out;
    for (const auto& tok : split_csv(csv)) {
        auto u = dsl::unary_from(tok);
        if (!u) throw ConfigError("grammar.unaries", "unknown unary operator \"" + tok + "\"");
        if (std::find(out.begin(), out.end(), *u) != out.end())
            throw ConfigError("grammar.unaries", "duplicate operator \"" + tok + "\"");
        out.push_back(*u);
    }
    if (out.empty()) throw ConfigError("grammar.unaries", "must list at least one operator");
    return out;
}

std::vector<dsl::BinaryOp> parse_binaries(const std::string& csv) {
    std::vector<dsl::BinaryOp> out;
    for (const auto& tok : split_csv(csv)) {
        auto b = dsl::binary_from(tok);
        if (!b) throw ConfigError("grammar.binaries", "unknown binary operator \"" + tok + "\"");
        if (std::find(out.begin(), out.end(), *b) != out.end())
            throw ConfigError("grammar.binaries", "duplicate operator \"" + tok + "\"");
        out.push_back(*b);
    }
    return out;
}

}  // namespace

const std::vector<SchemaEntry>& schema() {
    static const std::vector<SchemaEntry> s = [] {
        std::vector<SchemaEntry> r;
        for (const auto& e : table()) r.push_back(e.pub);
        return r;
    }();
    return s;
}

RunConfig parse_config(const std::string& json_text) {
    RunConfig cfg;
    std::string trimmed = json_text;
    trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
    if (trimmed.empty()) {
        validate(cfg);
        return cfg;
    }
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config", "top level must be an object");
    flatten(cfg, "", j);
    validate(cfg);
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot open file " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str());
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto it = key_index().find(key);
    if (it == key_index().end()) unknown_key(key);
    const Entry& e = table()[it->second];
    json v;
    const char* s = value.c_str();
    char* end = nullptr;
    switch (e.pub.type) {
        case VType::Int: {
            long n = std::strtol(s, &end, 10);
            if (end == s || *end) throw ConfigError(key, "expected int, got \"" + value + "\"");
            v = static_cast<int>(n);
            break;
        }
        case VType::U64: {
            if (value.find('-') != std::string::npos)
                throw ConfigError(key, "expected uint, got \"" + value + "\"");
            unsigned long long n = std::strtoull(s, &end, 10);
            if (end == s || *end) throw ConfigError(key, "expected uint, got \"" + value + "\"");
            v = static_cast<std::uint64_t>(n);
            break;
        }
        case VType::Real: {
            double d = std::strtod(s, &end);
            if (end == s || *end) throw ConfigError(key, "expected real, got \"" + value + "\"");
            v = d;
            break;
        }
        case VType::Bool: {
            if (value == "true" || value == "1")
                v = true;
            else if (value == "false" || value == "0")
                v = false;
            else
                throw ConfigError(key, "expected bool, got \"" + value + "\"");
            break;
        }
        case VType::Str: v = value; break;
    }
    e.set(cfg, v);
}

void validate(const RunConfig& cfg) {
    parse_task(cfg.task);
    if (cfg.threads < 0) throw ConfigError("threads", "must be >= 0");
    if (cfg.synth.shapes < 1) throw ConfigError("synth.shapes", "must be >= 1");
    if (cfg.synth.points < 8) throw ConfigError("synth.points", "must be >= 8");
    if (cfg.synth.noise < 0.0) throw ConfigError("synth.noise", "must be >= 0");
    if (cfg.grammar.max_height != 2 && cfg.grammar.max_height != 3)
        throw ConfigError("grammar.max_height", "must be 2 or 3");
    if (cfg.grammar.n_rows < 1) throw ConfigError("grammar.n_rows", "must be >= 1");
    if (!(cfg.grammar.radius > 0.0)) throw ConfigError("grammar.radius", "must be > 0");
    parse_groupings(cfg.grammar.groupings);
    parse_unaries(cfg.grammar.unaries);
    parse_binaries(cfg.grammar.binaries);
    if (cfg.search.epochs < 1) throw ConfigError("search.epochs", "must be >= 1");
    if (cfg.search.samples < 1) throw ConfigError("search.samples", "must be >= 1");
    if (!(cfg.search.lr > 0.0)) throw ConfigError("search.lr", "must be > 0");
    if (!(cfg.search.baseline_decay >= 0.0 && cfg.search.baseline_decay < 1.0))
        throw ConfigError("search.baseline_decay", "must be in [0, 1)");
    if (cfg.search.pool_size < 3) throw ConfigError("search.pool_size", "must be >= 3");
    if (cfg.search.reward_mode != "gap" && cfg.search.reward_mode != "val")
        throw ConfigError("search.reward_mode", "must be \"gap\" or \"val\"");
    if (cfg.search.select_epochs < 1) throw ConfigError("search.select_epochs", "must be >= 1");
    if (!(cfg.eval.lr > 0.0)) throw ConfigError("eval.lr", "must be > 0");
    if (cfg.eval.weight_decay < 0.0) throw ConfigError("eval.weight_decay", "must be >= 0");
    if (cfg.eval.lambda < 0.0) throw ConfigError("eval.lambda", "must be >= 0");
    if (cfg.eval.epochs < 1) throw ConfigError("eval.epochs", "must be >= 1");
    if (cfg.eval.final_epochs < 1) throw ConfigError("eval.final_epochs", "must be >= 1");
    if (!(cfg.eval.final_lr > 0.0)) throw ConfigError("eval.final_lr", "must be > 0");
    if (cfg.select.method != "greedy" && cfg.select.method != "topk")
        throw ConfigError("select.method", "must be \"greedy\" or \"topk\"");
}

std::string resolved_text(const RunConfig& cfg) {
    nlohmann::ordered_json root;
    for (const auto& e : table()) {
        json v = e.get(cfg);
        auto dot = e.pub.key.find('.');
        if (dot == std::string::npos)
            root[e.pub.key] = v;
        else
            root[e.pub.key.substr(0, dot)][e.pub.key.substr(dot + 1)] = v;
    }
    return root.dump(2) + "\n";
}

std::string help_text() {
    RunConfig defaults;
    std::ostringstream os;
    os << "Config keys (JSON file sections map to dotted keys; --set key=value overrides):\n";
    for (const auto& e : table()) {
        os << "  " << e.pub.key << " (" << type_name(e.pub.type) << ") = "
           << e.get(defaults).dump() << "\n      " << e.pub.desc << "\n";
    }
    return os.str();
}

synth::Task parse_task(const std::string& name) {
    if (name == "primitive") return synth::Task::Primitive;
    if (name == "mobility") return synth::Task::Mobility;
    throw ConfigError("task", "must be \"primitive\" or \"mobility\" (got \"" + name + "\")");
}

grammar::GrammarConfig make_grammar(const RunConfig& cfg) {
    grammar::GrammarConfig g;
    g.max_height = cfg.grammar.max_height;
    g.n_rows = cfg.grammar.n_rows;
    g.groupings = parse_groupings(cfg.grammar.groupings);
    g.unaries = parse_unaries(cfg.grammar.unaries);
    g.binaries = parse_binaries(cfg.grammar.binaries);
    g.operants = dsl::build_operant_set(eval::task_channels(parse_task(cfg.task)));
    return g;
}

std::vector<synth::DomainSpec> make_specs(const RunConfig& cfg) {
    auto specs = parse_task(cfg.task) == synth::Task::Primitive ? synth::default_primitive_specs()
                                                                : synth::default_mobility_specs();
    for (auto& d : specs) {
        d.shapes_count = cfg.synth.shapes;
        d.points_per_shape = cfg.synth.points;
        d.noise_sigma = cfg.synth.noise;
    }
    return specs;
}

search::SearchConfig make_search(const RunConfig& cfg) {
    search::SearchConfig s;
    s.epochs = cfg.search.epochs;
    s.samples_per_epoch = cfg.search.samples;
    s.lr = cfg.search.lr;
    s.baseline_decay = cfg.search.baseline_decay;
    s.pool_size = cfg.search.pool_size;
    s.reward_mode = cfg.search.reward_mode;
    s.single_split = cfg.search.single_split;
    s.select_epochs = cfg.search.select_epochs;
    return s;
}

eval::TrainConfig make_train(const RunConfig& cfg, bool final_stage) {
    eval::TrainConfig t;
    t.epochs = final_stage ? cfg.eval.final_epochs : cfg.eval.epochs;
    t.lr = final_stage ? cfg.eval.final_lr : cfg.eval.lr;
    t.weight_decay = cfg.eval.weight_decay;
    t.lambda_sup = cfg.eval.lambda;
    return t;
}

}  // namespace agps::config
