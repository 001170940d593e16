#include "agps/search/search.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agps/errors.hpp"
#include "agps/rng.hpp"

namespace agps::search {

namespace fs = std::filesystem;

void SearchConfig::validate() const {
    if (epochs < 1) throw ConfigError("search.epochs", "must be >= 1");
    if (samples_per_epoch < 1) throw ConfigError("search.samples_per_epoch", "must be >= 1");
    if (pool_size < 3) throw ConfigError("search.pool_size", "must be >= 3");
    if (!(lr > 0.0)) throw ConfigError("search.lr", "must be > 0");
    if (!(baseline_decay >= 0.0 && baseline_decay < 1.0))
        throw ConfigError("search.baseline_decay", "must be in [0, 1)");
    if (reward_mode != "gap" && reward_mode != "val")
        throw ConfigError("search.reward_mode", "must be \"gap\" or \"val\"");
    if (select_epochs < 1) throw ConfigError("search.select_epochs", "must be >= 1");
}

RewardFn make_crossval_reward(const eval::PreparedDataset& pd, eval::TrainConfig tcfg,
                              std::string reward_mode, bool single_split, std::uint64_t seed,
                              eval::TargetCache* cache) {
    if (reward_mode != "gap" && reward_mode != "val")
        throw ConfigError("search.reward_mode", "must be \"gap\" or \"val\"");
    bool use_gap = reward_mode == "gap";
    const eval::PreparedDataset* pdp = &pd;
    return [pdp, tcfg, use_gap, single_split, seed, cache](const dsl::TreePtr& tree, int epoch,
                                                           int sample) {
        std::uint64_t base = derive_seed(
            seed, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(sample)});
        auto gr = eval::cross_val_gap({tree}, *pdp, tcfg, single_split, base, cache);
        RewardResult r;
        r.reward = use_gap ? gr.gap : gr.val_metric;
        r.val = gr.val_metric;
        r.train = gr.train_metric;
        return r;
    };
}

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out += buf;
        } else {
            out += c;
        }
    }
    return out;
}

std::string event_line(const EventRecord& e) {
    std::ostringstream os;
    os << "{\"epoch\":" << e.epoch << ",\"sample\":" << e.sample << ",\"tree\":\""
       << json_escape(e.tree) << "\",\"logp\":" << fmt17(e.logp);
    if (e.failed) {
        os << ",\"reward\":null,\"val\":null,\"train\":null";
    } else {
        os << ",\"reward\":" << fmt17(e.reward) << ",\"val\":" << fmt17(e.val)
           << ",\"train\":" << fmt17(e.train);
    }
    os << ",\"wall_ms\":" << fmt17(e.wall_ms) << "}\n";
    return os.str();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void dump(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << bytes;
    if (!out) throw IoError("write failed: " + path);
}

std::string state_json(int epoch, const grammar::ReinforceState& st, std::uint64_t rng_counter) {
    std::ostringstream os;
    os << "{\"epoch\":" << epoch << ",\"baseline\":";
    if (st.initialized)
        os << fmt17(st.baseline);
    else
        os << "null";
    os << ",\"rng_counter\":" << rng_counter << "}\n";
    return os.str();
}

}  // namespace

SearchResult run_search(const grammar::GrammarConfig& gcfg, const SearchConfig& cfg,
                        const RewardFn& reward, std::uint64_t seed, const std::string& out_dir,
                        bool resume, const std::function<void(const EventRecord&)>& on_event) {
    cfg.validate();

    grammar::DistributionSpace space(gcfg);
    grammar::ReinforceState state;
    state.lr = cfg.lr;
    state.decay = cfg.baseline_decay;
    int start_epoch = 0;
    std::uint64_t rng_counter = 0;

    std::string events_path, state_path;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        events_path = out_dir + "/events.ndjson";
        state_path = out_dir + "/state";
    }

    if (resume && !state_path.empty() && fs::exists(state_path)) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(slurp(state_path));
        } catch (const nlohmann::json::exception& e) {
            throw CorruptCheckpoint(std::string("state file: ") + e.what());
        }
        if (!j.contains("epoch") || !j["epoch"].is_number_integer())
            throw CorruptCheckpoint("state file: missing epoch");
        int done = j["epoch"].get<int>();
        rng_counter = j.value("rng_counter", std::uint64_t{0});
        auto [sp, st] =
            grammar::load_space(slurp(out_dir + "/space_epoch_" + std::to_string(done)), gcfg);
        space = std::move(sp);
        state = st;
        state.lr = cfg.lr;
        state.decay = cfg.baseline_decay;
        start_epoch = done + 1;
    }

    bool new_events = !events_path.empty() && (!fs::exists(events_path) || fs::file_size(events_path) == 0);
    std::ofstream ev;
    if (!events_path.empty()) {
        ev.open(events_path, std::ios::binary | std::ios::app);
        if (!ev) throw IoError("cannot open " + events_path + " for writing");
        if (new_events)
            ev << "{\"event\":\"config\",\"digest\":\"" << grammar::config_digest(gcfg) << "\"}\n";
    }

    std::vector<EventRecord> events;
    auto emit = [&](const EventRecord& e) {
        events.push_back(e);
        if (ev.is_open()) {
            ev << event_line(e);
            ev.flush();
        }
        if (on_event) on_event(e);
    };

    using clock = std::chrono::steady_clock;
    for (int e = start_epoch; e < cfg.epochs; ++e) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(e)}));

        struct Drawn {
            dsl::TreePtr tree;
            double logp;
        };
        std::vector<Drawn> drawn(cfg.samples_per_epoch);
        for (int s = 0; s < cfg.samples_per_epoch; ++s) {
            auto [t, lp] = grammar::sample_tree(space, rng);
            drawn[s] = {t, lp};
            ++rng_counter;
        }

        // Evaluate the whole batch, then patch failures with one redraw each.
        struct Outcome {
            RewardResult r;
            bool ok = false;
            double wall_ms = 0.0;
            std::string error;
        };
        auto evaluate = [&](const Drawn& d, int s) {
            Outcome o;
            auto t0 = clock::now();
            try {
                o.r = reward(d.tree, e, s);
                o.ok = true;
            } catch (const Error& err) {
                o.error = err.what();
            }
            o.wall_ms =
                std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            return o;
        };

        std::vector<Outcome> out(cfg.samples_per_epoch);
        for (int s = 0; s < cfg.samples_per_epoch; ++s) out[s] = evaluate(drawn[s], s);

        for (int s = 0; s < cfg.samples_per_epoch; ++s) {
            EventRecord rec;
            rec.epoch = e;
            rec.sample = s;
            rec.tree = dsl::print_tree(drawn[s].tree);
            rec.logp = drawn[s].logp;
            rec.failed = !out[s].ok;
            if (out[s].ok) {
                rec.reward = out[s].r.reward;
                rec.val = out[s].r.val;
                rec.train = out[s].r.train;
            }
            rec.wall_ms = out[s].wall_ms;
            emit(rec);
        }

        for (int s = 0; s < cfg.samples_per_epoch; ++s) {
            if (out[s].ok) continue;
            auto [t, lp] = grammar::sample_tree(space, rng);
            ++rng_counter;
            Drawn redo{t, lp};
            Outcome o2 = evaluate(redo, s);
            EventRecord rec;
            rec.epoch = e;
            rec.sample = s;
            rec.tree = dsl::print_tree(redo.tree);
            rec.logp = redo.logp;
            rec.failed = !o2.ok;
            if (o2.ok) {
                rec.reward = o2.r.reward;
                rec.val = o2.r.val;
                rec.train = o2.r.train;
            }
            rec.wall_ms = o2.wall_ms;
            emit(rec);
            if (!o2.ok)
                throw SupervisionError(dsl::print_tree(redo.tree),
                                       "epoch " + std::to_string(e) + " sample " +
                                           std::to_string(s) + " failed twice: " + o2.error);
            drawn[s] = redo;
            out[s] = o2;
        }

        for (int s = 0; s < cfg.samples_per_epoch; ++s)
            grammar::reinforce_update(space, state, drawn[s].tree, out[s].r.reward);

        if (!out_dir.empty()) {
            dump(out_dir + "/space_epoch_" + std::to_string(e), grammar::save_space(space, state));
            dump(state_path, state_json(e, state, rng_counter));
        }
    }

    SearchResult res{std::move(space), state, cfg.epochs, std::move(events)};
    return res;
}

}  // namespace agps::search
