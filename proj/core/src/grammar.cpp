#include "agps/grammar/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

namespace agps::grammar {

GrammarConfig full_grammar(std::vector<dsl::OperantId> operants, bool allow_centralize,
                           int max_height, int n_rows) {
    GrammarConfig cfg;
    cfg.max_height = max_height;
    cfg.n_rows = n_rows;
    cfg.groupings = {dsl::GroupingOp::Sum, dsl::GroupingOp::Mean, dsl::GroupingOp::Max,
                     dsl::GroupingOp::Svd};
    cfg.unaries = {dsl::UnaryOp::Identity,      dsl::UnaryOp::Square,  dsl::UnaryOp::Double,
                   dsl::UnaryOp::Negative,      dsl::UnaryOp::Orthogonalize,
                   dsl::UnaryOp::Inverse};
    if (allow_centralize) cfg.unaries.push_back(dsl::UnaryOp::Centralize);
    cfg.binaries = {dsl::BinaryOp::Add,          dsl::BinaryOp::Minus,
                    dsl::BinaryOp::Multiply,     dsl::BinaryOp::CrossProduct,
                    dsl::BinaryOp::CartesianProduct, dsl::BinaryOp::MatVecProduct};
    cfg.operants = std::move(operants);
    return cfg;
}

std::string config_digest(const GrammarConfig& cfg) {
    std::uint64_t h = 1469598103934665603ULL;
    auto eat = [&](const std::string& s) {
        for (char ch : s) {
            h ^= static_cast<std::uint8_t>(ch);
            h *= 1099511628211ULL;
        }
    };
    eat("mh=" + std::to_string(cfg.max_height) + ";rows=" + std::to_string(cfg.n_rows) + ";g=");
    for (auto g : cfg.groupings) eat(std::string(dsl::name_of(g)) + ",");
    eat(";u=");
    for (auto u : cfg.unaries) eat(std::string(dsl::name_of(u)) + ",");
    eat(";b=");
    for (auto b : cfg.binaries) eat(std::string(dsl::name_of(b)) + ",");
    eat(";f=");
    for (const auto& op : cfg.operants)
        eat(op.name + ":" + std::to_string(op.dim) + ":" +
            std::to_string(static_cast<int>(op.rule)) + ":" + std::to_string(op.arg_a) + ":" +
            std::to_string(op.arg_b) + ",");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::vector<std::string> conn_choice_names(const GrammarConfig& cfg, int level_budget) {
    std::vector<std::string> out;
    out.emplace_back("leaf");
    for (auto b : cfg.binaries) {
        const std::string bn{dsl::name_of(b)};
        out.push_back(bn + ":leaf,leaf");
        if (level_budget >= 3) {
            out.push_back(bn + ":leaf,mid");
            out.push_back(bn + ":mid,leaf");
        }
    }
    return out;
}

namespace {

std::vector<std::string> grouping_names(const GrammarConfig& cfg) {
    std::vector<std::string> v;
    for (auto g : cfg.groupings) v.emplace_back(dsl::name_of(g));
    return v;
}

std::vector<std::string> unary_names(const GrammarConfig& cfg) {
    std::vector<std::string> v;
    for (auto u : cfg.unaries) v.emplace_back(dsl::name_of(u));
    return v;
}

std::vector<std::string> operant_names(const GrammarConfig& cfg) {
    std::vector<std::string> v;
    for (const auto& op : cfg.operants) v.push_back(op.name);
    return v;
}

// A node key always ends in its slot marker; ancestor choices sit in "x=..."
// segments before it, so the key alone identifies the choice list.
std::vector<std::string> infer_choices(const GrammarConfig& cfg, const std::string& key) {
    const auto dot = key.find_last_of('.');
    const std::string slot = dot == std::string::npos ? key : key.substr(dot + 1);
    if (slot == "g") return grouping_names(cfg);
    if (slot == "u" || slot == "lu") return unary_names(cfg);
    if (slot == "f") return operant_names(cfg);
    if (slot == "c") {
        const bool nested = key.find(".c=") != std::string::npos;
        return conn_choice_names(cfg, nested ? 2 : cfg.max_height);
    }
    throw CorruptCheckpoint("unrecognized context key slot: " + key);
}

std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

}  // namespace

DistributionSpace::DistributionSpace(GrammarConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.max_height != 2 && cfg_.max_height != 3)
        throw ConfigError("grammar.max_height", "must be 2 or 3");
    if (cfg_.groupings.empty()) throw ConfigError("grammar.groupings", "must not be empty");
    if (cfg_.unaries.empty()) throw ConfigError("grammar.unaries", "must not be empty");
    if (cfg_.operants.empty()) throw ConfigError("grammar.operants", "must not be empty");
    if (cfg_.n_rows < 1) throw ConfigError("grammar.n_rows", "must be at least 1");
}

DistributionSpace new_space(GrammarConfig cfg) { return DistributionSpace(std::move(cfg)); }

std::pair<std::vector<std::string>, std::vector<double>> DistributionSpace::distribution(
    const std::string& path_key) const {
    if (const Node* nd = find(path_key)) return {nd->choices, softmax(nd->logits)};
    std::vector<std::string> choices = infer_choices(cfg_, path_key);
    std::vector<double> p(choices.size(), 1.0 / static_cast<double>(choices.size()));
    return {std::move(choices), std::move(p)};
}

DistributionSpace::Node& DistributionSpace::touch(const std::string& path_key) {
    auto it = index_.find(path_key);
    if (it != index_.end()) return nodes_[it->second];
    Node nd;
    nd.path = path_key;
    nd.choices = infer_choices(cfg_, path_key);
    nd.logits.assign(nd.choices.size(), 0.0);
    index_.emplace(path_key, nodes_.size());
    nodes_.push_back(std::move(nd));
    return nodes_.back();
}

const DistributionSpace::Node* DistributionSpace::find(const std::string& path_key) const {
    auto it = index_.find(path_key);
    return it == index_.end() ? nullptr : &nodes_[it->second];
}

// ---- shared traversal ----

namespace {

struct Visit {
    std::string key;
    int chosen = 0;
    int n_choices = 0;
    double prob = 0.0;
};

// Splits "bname:lk,rk" back into parts; "leaf" stays whole.
struct ConnChoice {
    bool single = true;
    std::string binary, left_kind, right_kind;
};

ConnChoice parse_conn_name(const std::string& name) {
    ConnChoice c;
    auto colon = name.find(':');
    if (colon == std::string::npos) return c;
    c.single = false;
    c.binary = name.substr(0, colon);
    auto comma = name.find(',', colon);
    c.left_kind = name.substr(colon + 1, comma - colon - 1);
    c.right_kind = name.substr(comma + 1);
    return c;
}

std::string conn_name_of(const dsl::TreePtr& mid) {
    auto kind_of = [](const dsl::TreePtr& n) {
        return n->kind == dsl::TreeNode::Kind::Mid ? "mid" : "leaf";
    };
    if (!mid->is_pair) return mid->left->kind == dsl::TreeNode::Kind::Mid ? "mid" : "leaf";
    return std::string(dsl::name_of(mid->binary)) + ":" + kind_of(mid->left) + "," +
           kind_of(mid->right);
}

// Walks the sampling order of an existing tree and records every conditional
// decision. Throws UnknownChoice when the tree steps outside the grammar.
class PathWalker {
  public:
    PathWalker(const DistributionSpace& space, std::vector<Visit>& out)
        : space_(space), cfg_(space.config()), out_(out) {}

    void walk(const dsl::TreePtr& tree) { walk_mid(tree, "", cfg_.max_height); }

  private:
    void record(const std::string& key, const std::string& choice) {
        auto [choices, probs] = space_.distribution(key);
        auto it = std::find(choices.begin(), choices.end(), choice);
        if (it == choices.end())
            throw UnknownChoice("choice '" + choice + "' not available at " + key);
        Visit v;
        v.key = key;
        v.chosen = static_cast<int>(it - choices.begin());
        v.n_choices = static_cast<int>(choices.size());
        v.prob = probs[static_cast<std::size_t>(v.chosen)];
        out_.push_back(std::move(v));
    }

    void walk_mid(const dsl::TreePtr& n, const std::string& prefix, int budget) {
        const std::string g{dsl::name_of(n->grouping)};
        const std::string u{dsl::name_of(n->unary)};
        record(prefix + "g", g);
        record(prefix + "g=" + g + ".u", u);
        const std::string conn_key = prefix + "g=" + g + ".u=" + u + ".c";
        const std::string cname = conn_name_of(n);
        record(conn_key, cname);
        const std::string base = prefix + "g=" + g + ".u=" + u + ".c=" + cname + ".";
        if (!n->is_pair) {
            walk_child(n->left, base + "S.", budget);
        } else {
            walk_child(n->left, base + "L.", budget);
            walk_child(n->right, base + "R.", budget);
        }
    }

    void walk_child(const dsl::TreePtr& c, const std::string& prefix, int parent_budget) {
        if (c->kind == dsl::TreeNode::Kind::Mid)
            walk_mid(c, prefix, parent_budget - 1);
        else
            walk_leaf(c, prefix);
    }

    void walk_leaf(const dsl::TreePtr& n, const std::string& prefix) {
        const std::string u{dsl::name_of(n->unary)};
        record(prefix + "lu", u);
        record(prefix + "lu=" + u + ".f", n->operant);
    }

    const DistributionSpace& space_;
    const GrammarConfig& cfg_;
    std::vector<Visit>& out_;
};

// Draws one structurally complete tree top-down, no shape check yet.
class TreeSampler {
  public:
    TreeSampler(const DistributionSpace& space, Rng& rng) : space_(space), cfg_(space.config()), rng_(rng) {}

    std::pair<dsl::TreePtr, double> sample() {
        logp_ = 0.0;
        dsl::TreePtr t = sample_mid("", cfg_.max_height);
        return {t, logp_};
    }

  private:
    int draw(const std::string& key) {
        auto [choices, probs] = space_.distribution(key);
        const double u = rng_.uniform();
        double acc = 0.0;
        int idx = static_cast<int>(choices.size()) - 1;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) {
                idx = static_cast<int>(i);
                break;
            }
        }
        logp_ += std::log(probs[static_cast<std::size_t>(idx)]);
        last_choices_ = choices;
        return idx;
    }

    dsl::TreePtr sample_mid(const std::string& prefix, int budget) {
        const int gi = draw(prefix + "g");
        const std::string g = last_choices_[static_cast<std::size_t>(gi)];
        const int ui = draw(prefix + "g=" + g + ".u");
        const std::string u = last_choices_[static_cast<std::size_t>(ui)];
        const int ci = draw(prefix + "g=" + g + ".u=" + u + ".c");
        const std::string cname = last_choices_[static_cast<std::size_t>(ci)];
        const std::string base = prefix + "g=" + g + ".u=" + u + ".c=" + cname + ".";

        const dsl::GroupingOp gop = *dsl::grouping_from(g);
        const dsl::UnaryOp uop = *dsl::unary_from(u);
        const int level = budget == cfg_.max_height ? 3 : 2;
        ConnChoice cc = parse_conn_name(cname);
        if (cc.single) {
            dsl::TreePtr child = sample_leaf(base + "S.");
            return dsl::make_mid(level, uop, gop, std::move(child));
        }
        const dsl::BinaryOp bop = *dsl::binary_from(cc.binary);
        dsl::TreePtr left = cc.left_kind == "mid" ? sample_mid(base + "L.", budget - 1)
                                                  : sample_leaf(base + "L.");
        dsl::TreePtr right = cc.right_kind == "mid" ? sample_mid(base + "R.", budget - 1)
                                                    : sample_leaf(base + "R.");
        return dsl::make_mid(level, uop, gop, bop, std::move(left), std::move(right));
    }

    dsl::TreePtr sample_leaf(const std::string& prefix) {
        const int ui = draw(prefix + "lu");
        const std::string u = last_choices_[static_cast<std::size_t>(ui)];
        const int fi = draw(prefix + "lu=" + u + ".f");
        const std::string f = last_choices_[static_cast<std::size_t>(fi)];
        return dsl::make_leaf(*dsl::unary_from(u), f);
    }

    const DistributionSpace& space_;
    const GrammarConfig& cfg_;
    Rng& rng_;
    double logp_ = 0.0;
    std::vector<std::string> last_choices_;
};

std::map<std::string, int> operant_dim_map(const GrammarConfig& cfg) {
    std::map<std::string, int> dims;
    for (const auto& op : cfg.operants) dims[op.name] = op.dim;
    return dims;
}

}  // namespace

std::pair<dsl::TreePtr, double> sample_tree(const DistributionSpace& space, Rng& rng) {
    const auto dims = operant_dim_map(space.config());
    TreeSampler sampler(space, rng);
    for (int attempt = 0; attempt < 64; ++attempt) {
        auto [tree, logp] = sampler.sample();
        try {
            dsl::infer_shape(tree, dims, space.config().n_rows);
        } catch (const ShapeError&) {
            continue;
        }
        return {tree, logp};
    }
    throw SamplingExhausted("64 consecutive draws were shape-invalid");
}

double log_prob(const DistributionSpace& space, const dsl::TreePtr& tree) {
    std::vector<Visit> visits;
    PathWalker(space, visits).walk(tree);
    double lp = 0.0;
    for (const Visit& v : visits) lp += std::log(v.prob);
    return lp;
}

void reinforce_update(DistributionSpace& space, ReinforceState& state, const dsl::TreePtr& tree,
                      double reward) {
    if (!std::isfinite(reward)) throw NonFiniteReward("reward is not finite");
    std::vector<Visit> visits;
    PathWalker(space, visits).walk(tree);
    if (!state.initialized) {
        state.baseline = reward;
        state.initialized = true;
    }
    const double adv = reward - state.baseline;
    for (const Visit& v : visits) {
        DistributionSpace::Node& nd = space.touch(v.key);
        const std::vector<double> p = softmax(nd.logits);
        for (std::size_t j = 0; j < nd.logits.size(); ++j) {
            const double indicator = static_cast<int>(j) == v.chosen ? 1.0 : 0.0;
            nd.logits[j] += state.lr * adv * (indicator - p[j]);
        }
    }
    state.baseline = state.decay * state.baseline + (1.0 - state.decay) * reward;
}

// ---- enumeration ----

namespace {

double count_trees(const GrammarConfig& cfg) {
    const double leafs = static_cast<double>(cfg.unaries.size()) *
                         static_cast<double>(cfg.operants.size());
    const double nb = static_cast<double>(cfg.binaries.size());
    const double gu = static_cast<double>(cfg.groupings.size()) *
                      static_cast<double>(cfg.unaries.size());
    const double mid2 = gu * (leafs + nb * leafs * leafs);
    if (cfg.max_height == 2) return mid2;
    return gu * (leafs + nb * (leafs * leafs + leafs * mid2 + mid2 * leafs));
}

class Enumerator {
  public:
    explicit Enumerator(const DistributionSpace& space) : space_(space), cfg_(space.config()) {}

    std::vector<std::pair<dsl::TreePtr, double>> run() {
        return enum_mid("", cfg_.max_height);
    }

  private:
    using List = std::vector<std::pair<dsl::TreePtr, double>>;

    List enum_leaf(const std::string& prefix) {
        List out;
        auto [unaries, up] = space_.distribution(prefix + "lu");
        for (std::size_t i = 0; i < unaries.size(); ++i) {
            auto [ops, fp] = space_.distribution(prefix + "lu=" + unaries[i] + ".f");
            for (std::size_t j = 0; j < ops.size(); ++j)
                out.emplace_back(dsl::make_leaf(*dsl::unary_from(unaries[i]), ops[j]),
                                 up[i] * fp[j]);
        }
        return out;
    }

    List enum_mid(const std::string& prefix, int budget) {
        List out;
        const int level = budget == cfg_.max_height ? 3 : 2;
        auto [gs, gp] = space_.distribution(prefix + "g");
        for (std::size_t gi = 0; gi < gs.size(); ++gi) {
            const std::string gkey = prefix + "g=" + gs[gi];
            auto [us, up] = space_.distribution(gkey + ".u");
            for (std::size_t ui = 0; ui < us.size(); ++ui) {
                const std::string ukey = gkey + ".u=" + us[ui];
                auto [cs, cp] = space_.distribution(ukey + ".c");
                const dsl::GroupingOp gop = *dsl::grouping_from(gs[gi]);
                const dsl::UnaryOp uop = *dsl::unary_from(us[ui]);
                for (std::size_t ci = 0; ci < cs.size(); ++ci) {
                    const double pc = gp[gi] * up[ui] * cp[ci];
                    const std::string base = ukey + ".c=" + cs[ci] + ".";
                    ConnChoice cc = parse_conn_name(cs[ci]);
                    if (cc.single) {
                        for (auto& [child, pchild] : enum_leaf(base + "S."))
                            out.emplace_back(dsl::make_mid(level, uop, gop, child), pc * pchild);
                        continue;
                    }
                    const dsl::BinaryOp bop = *dsl::binary_from(cc.binary);
                    List lefts = cc.left_kind == "mid" ? enum_mid(base + "L.", budget - 1)
                                                       : enum_leaf(base + "L.");
                    List rights = cc.right_kind == "mid" ? enum_mid(base + "R.", budget - 1)
                                                         : enum_leaf(base + "R.");
                    for (auto& [lt, lp] : lefts)
                        for (auto& [rt, rp] : rights)
                            out.emplace_back(dsl::make_mid(level, uop, gop, bop, lt, rt),
                                             pc * lp * rp);
                }
            }
        }
        return out;
    }

    const DistributionSpace& space_;
    const GrammarConfig& cfg_;
};

}  // namespace

std::vector<std::pair<dsl::TreePtr, double>> enumerate_trees(const DistributionSpace& space) {
    const double n = count_trees(space.config());
    if (n > 1e6)
        throw EnumerationTooLarge("grammar enumerates to " + std::to_string(n) +
                                  " trees, limit 1000000");
    return Enumerator(space).run();
}

// ---- persistence ----

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string save_space(const DistributionSpace& space, const ReinforceState& state) {
    std::string out;
    out += "{\"magic\":\"AGPS\",\"version\":1,\"config_digest\":\"";
    out += config_digest(space.config());
    out += "\",\"baseline\":";
    out += state.initialized ? fmt17(state.baseline) : std::string("null");
    out += ",\"nodes\":[";
    bool first = true;
    for (const auto& nd : space.nodes()) {
        if (!first) out += ',';
        first = false;
        out += "{\"path\":\"" + json_escape(nd.path) + "\",\"choices\":[";
        for (std::size_t i = 0; i < nd.choices.size(); ++i) {
            if (i) out += ',';
            out += '"' + json_escape(nd.choices[i]) + '"';
        }
        out += "],\"logits\":[";
        for (std::size_t i = 0; i < nd.logits.size(); ++i) {
            if (i) out += ',';
            out += fmt17(nd.logits[i]);
        }
        out += "]}";
    }
    out += "]}\n";
    return out;
}

std::pair<DistributionSpace, ReinforceState> load_space(const std::string& bytes,
                                                        const GrammarConfig& cfg) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpoint(std::string("unparseable checkpoint: ") + e.what());
    }
    if (!j.is_object() || !j.contains("magic") || !j["magic"].is_string() ||
        j["magic"].get<std::string>() != "AGPS")
        throw CorruptCheckpoint("bad magic, expected AGPS");
    if (!j.contains("version") || !j["version"].is_number_integer() ||
        j["version"].get<int>() != 1)
        throw CorruptCheckpoint("unsupported checkpoint version");
    if (!j.contains("config_digest") || j["config_digest"].get<std::string>() != config_digest(cfg))
        throw CorruptCheckpoint("config digest mismatch: checkpoint was built for a different grammar");

    DistributionSpace space(cfg);
    ReinforceState state;
    if (j.contains("baseline") && j["baseline"].is_number()) {
        state.baseline = j["baseline"].get<double>();
        state.initialized = true;
    }
    if (!j.contains("nodes") || !j["nodes"].is_array())
        throw CorruptCheckpoint("missing nodes array");
    for (const auto& nj : j["nodes"]) {
        if (!nj.is_object() || !nj.contains("path") || !nj.contains("choices") ||
            !nj.contains("logits"))
            throw CorruptCheckpoint("malformed node entry");
        const std::string path = nj["path"].get<std::string>();
        std::vector<std::string> choices = nj["choices"].get<std::vector<std::string>>();
        std::vector<double> logits = nj["logits"].get<std::vector<double>>();
        if (choices != infer_choices(cfg, path))
            throw CorruptCheckpoint("node " + path + " stores a foreign choice list");
        if (logits.size() != choices.size())
            throw CorruptCheckpoint("node " + path + " has " + std::to_string(logits.size()) +
                                    " logits for " + std::to_string(choices.size()) + " choices");
        for (double v : logits)
            if (!std::isfinite(v)) throw CorruptCheckpoint("node " + path + " has non-finite logits");
        space.touch(path).logits = std::move(logits);
    }
    return {std::move(space), state};
}

double root_grouping_prob(const DistributionSpace& space, dsl::GroupingOp g) {
    auto [choices, probs] = space.distribution("g");
    const std::string want{dsl::name_of(g)};
    for (std::size_t i = 0; i < choices.size(); ++i)
        if (choices[i] == want) return probs[i];
    return 0.0;
}

}  // namespace agps::grammar
