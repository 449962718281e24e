#include "config/config.hpp"

#include <json.hpp>

#include "common/binio.hpp"
#include "common/error.hpp"
#include "common/hash.hpp"

namespace bplab::config {

using nlohmann::json;

void validate(const ExperimentConfig& cfg) {
    check(cfg.dims.obs_channels == 5 + cfg.gen.categories, ErrorCode::ValidationFailed,
          "dims.obs_channels must equal 5 + gen.categories");
    check(cfg.dims.window == cfg.gen.obs_window, ErrorCode::ValidationFailed,
          "dims.window must equal gen.obs_window");
    check(cfg.dims.cv >= 1 && cfg.dims.hb >= 1, ErrorCode::ValidationFailed,
          "dims must be positive");
    check(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0, ErrorCode::ValidationFailed,
          "val_fraction must lie in (0, 1)");
    check(cfg.budget.pretrain_frames > 0 && cfg.budget.downstream_frames > 0,
          ErrorCode::ValidationFailed, "frame budgets must be positive");
    check(cfg.budget.houses >= 2 && cfg.budget.downstream_houses >= 2,
          ErrorCode::ValidationFailed, "need at least two houses for a house split");
    check(cfg.budget.episodes_per_house >= 1 && cfg.budget.downstream_episodes_per_house >= 1,
          ErrorCode::ValidationFailed, "episodes_per_house must be positive");
    check(cfg.budget.batch_episodes >= 1, ErrorCode::ValidationFailed,
          "batch_episodes must be positive");
    check(cfg.budget.eval_every >= 1, ErrorCode::ValidationFailed, "eval_every must be positive");
    check(cfg.budget.max_episode_len >= 2, ErrorCode::ValidationFailed,
          "max_episode_len must allow at least two steps");
    check(cfg.optim.lr > 0.0, ErrorCode::ValidationFailed, "lr must be positive");
    check(cfg.dims.goal_dim == cfg.objective.goal_dim, ErrorCode::ValidationFailed,
          "pretraining goal width must match between dims and objective");
    objectives::validate(cfg.objective);
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.preset = name;
    if (name == "desk") return cfg;
    if (name == "paper") {
        // published scale, recorded for reference; far beyond this harness
        cfg.dims.cv = 2048;
        cfg.dims.hb = 512;
        cfg.budget.pretrain_frames = 100000000;
        cfg.budget.downstream_frames = 50000000;
        cfg.budget.houses = 10000;
        return cfg;
    }
    fail(ErrorCode::InvalidArgument, "unknown preset: " + name);
}

std::string to_json(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["encoder_seed"] = cfg.encoder_seed;
    j["preset"] = cfg.preset;
    j["val_fraction"] = cfg.val_fraction;
    const sim::GenParams& g = cfg.gen;
    j["gen"] = {
        {"min_size", g.min_size},
        {"max_size", g.max_size},
        {"max_rooms", g.max_rooms},
        {"min_room", g.min_room},
        {"objects_per_room_min", g.objects_per_room_min},
        {"objects_per_room_max", g.objects_per_room_max},
        {"categories", g.categories},
        {"obs_window", g.obs_window},
        {"return_radius", g.return_radius},
    };
    const agent::Dims& d = cfg.dims;
    j["dims"] = {
        {"cv", d.cv},
        {"hb", d.hb},
        {"window", d.window},
        {"obs_channels", d.obs_channels},
        {"compress_hidden", d.compress_hidden},
        {"fuse_hidden", d.fuse_hidden},
        {"goal_dim", d.goal_dim},
        {"act_embed", d.act_embed},
    };
    const objectives::ObjectiveSpec& o = cfg.objective;
    j["objective"] = {
        {"kind", objectives::objective_name(o.kind)},
        {"k", o.k},
        {"cap", o.cap},
        {"d_max", o.d_max},
        {"goal_dim", o.goal_dim},
        {"n_pairs", o.n_pairs},
        {"anchors_per_episode", o.anchors_per_episode},
    };
    j["optim"] = {
        {"lr", cfg.optim.lr},
        {"beta1", cfg.optim.beta1},
        {"beta2", cfg.optim.beta2},
        {"eps", cfg.optim.eps},
    };
    const BudgetConfig& b = cfg.budget;
    j["budget"] = {
        {"pretrain_frames", b.pretrain_frames},
        {"downstream_frames", b.downstream_frames},
        {"houses", b.houses},
        {"episodes_per_house", b.episodes_per_house},
        {"downstream_houses", b.downstream_houses},
        {"downstream_episodes_per_house", b.downstream_episodes_per_house},
        {"batch_episodes", b.batch_episodes},
        {"eval_every", b.eval_every},
        {"max_episode_len", b.max_episode_len},
    };
    return j.dump(2) + "\n";
}

ExperimentConfig from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::CorruptRecord, std::string("config parse: ") + e.what());
    }
    ExperimentConfig cfg;
    if (j.contains("preset")) cfg = preset(j.at("preset").get<std::string>());
    auto opt = [&](const json& src, const char* key, auto& field) {
        if (src.contains(key)) field = src.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt(j, "seed", cfg.seed);
    opt(j, "encoder_seed", cfg.encoder_seed);
    opt(j, "val_fraction", cfg.val_fraction);
    if (j.contains("gen")) {
        const json& g = j.at("gen");
        opt(g, "min_size", cfg.gen.min_size);
        opt(g, "max_size", cfg.gen.max_size);
        opt(g, "max_rooms", cfg.gen.max_rooms);
        opt(g, "min_room", cfg.gen.min_room);
        opt(g, "objects_per_room_min", cfg.gen.objects_per_room_min);
        opt(g, "objects_per_room_max", cfg.gen.objects_per_room_max);
        opt(g, "categories", cfg.gen.categories);
        opt(g, "obs_window", cfg.gen.obs_window);
        opt(g, "return_radius", cfg.gen.return_radius);
    }
    if (j.contains("dims")) {
        const json& d = j.at("dims");
        opt(d, "cv", cfg.dims.cv);
        opt(d, "hb", cfg.dims.hb);
        opt(d, "window", cfg.dims.window);
        opt(d, "obs_channels", cfg.dims.obs_channels);
        opt(d, "compress_hidden", cfg.dims.compress_hidden);
        opt(d, "fuse_hidden", cfg.dims.fuse_hidden);
        opt(d, "goal_dim", cfg.dims.goal_dim);
        opt(d, "act_embed", cfg.dims.act_embed);
    }
    if (j.contains("objective")) {
        const json& o = j.at("objective");
        if (o.contains("kind"))
            cfg.objective.kind = objectives::parse_objective(o.at("kind").get<std::string>());
        opt(o, "k", cfg.objective.k);
        opt(o, "cap", cfg.objective.cap);
        opt(o, "d_max", cfg.objective.d_max);
        opt(o, "goal_dim", cfg.objective.goal_dim);
        opt(o, "n_pairs", cfg.objective.n_pairs);
        opt(o, "anchors_per_episode", cfg.objective.anchors_per_episode);
    }
    if (j.contains("optim")) {
        const json& o = j.at("optim");
        opt(o, "lr", cfg.optim.lr);
        opt(o, "beta1", cfg.optim.beta1);
        opt(o, "beta2", cfg.optim.beta2);
        opt(o, "eps", cfg.optim.eps);
    }
    if (j.contains("budget")) {
        const json& b = j.at("budget");
        opt(b, "pretrain_frames", cfg.budget.pretrain_frames);
        opt(b, "downstream_frames", cfg.budget.downstream_frames);
        opt(b, "houses", cfg.budget.houses);
        opt(b, "episodes_per_house", cfg.budget.episodes_per_house);
        opt(b, "downstream_houses", cfg.budget.downstream_houses);
        opt(b, "downstream_episodes_per_house", cfg.budget.downstream_episodes_per_house);
        opt(b, "batch_episodes", cfg.budget.batch_episodes);
        opt(b, "eval_every", cfg.budget.eval_every);
        opt(b, "max_episode_len", cfg.budget.max_episode_len);
    }
    return cfg;
}

ExperimentConfig load_file(const std::string& path) {
    std::vector<uint8_t> bytes = read_file(path);
    return from_json(std::string(bytes.begin(), bytes.end()));
}

uint64_t fingerprint(const ExperimentConfig& cfg) {
    // nlohmann::json keeps object keys sorted, so the dump is canonical
    const std::string canon = to_json(cfg);
    return fnv1a(canon.data(), canon.size());
}

} // namespace bplab::config
