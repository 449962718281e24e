#include "bplab/bplab.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "common/binio.hpp"
#include "config/config.hpp"
#include "runner/gradcheck.hpp"
#include "runner/report.hpp"
#include "runner/train.hpp"
#include "runner/triplet.hpp"
#include "tensor/checkpoint.hpp"

using namespace bplab;

struct bplab_ctx {
    config::ExperimentConfig cfg;
};

namespace {

thread_local std::string g_last_error;

int set_error(ErrorCode code, const std::string& msg) {
    g_last_error = msg;
    return static_cast<int>(code);
}

int set_error(const char* msg) {
    g_last_error = msg;
    return BPLAB_UNKNOWN;
}

template <class Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return BPLAB_OK;
    } catch (const Error& e) {
        return set_error(e.code(), e.what());
    } catch (const std::exception& e) {
        return set_error(e.what());
    } catch (...) {
        return set_error("unknown failure");
    }
}

sim::Task parse_task(const char* name) {
    check(name != nullptr, ErrorCode::InvalidArgument, "task is null");
    const std::string s = name;
    if (s == "explore") return sim::Task::Explore;
    if (s == "objectnav") return sim::Task::ObjectNav;
    if (s == "leavereturn") return sim::Task::LeaveReturn;
    fail(ErrorCode::InvalidArgument, "unknown task: " + s);
}

std::ofstream open_metrics(const char* path) {
    std::ofstream out;
    if (path && *path) {
        out.open(path);
        check(out.good(), ErrorCode::Io, std::string("cannot open metrics file ") + path);
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    write_file(path, std::vector<uint8_t>(text.begin(), text.end()));
}

} // namespace

extern "C" {

const char* bplab_last_error(void) { return g_last_error.c_str(); }

int bplab_version(void) { return 1; }

int bplab_objective_count(void) { return objectives::kObjectiveCount; }

const char* bplab_objective_name(int index) {
    if (index < 0 || index >= objectives::kObjectiveCount) return nullptr;
    return objectives::objective_name(objectives::objective_order()[index]);
}

int bplab_ctx_create(const char* config_json, bplab_ctx** out) {
    return guarded([&] {
        check(out != nullptr, ErrorCode::InvalidArgument, "out pointer is null");
        config::ExperimentConfig cfg;
        if (config_json && *config_json) cfg = config::from_json(config_json);
        config::validate(cfg);
        *out = new bplab_ctx{cfg};
    });
}

void bplab_ctx_destroy(bplab_ctx* ctx) { delete ctx; }

int bplab_ctx_config_json(const bplab_ctx* ctx, char* buf, size_t cap, size_t* written) {
    return guarded([&] {
        check(ctx != nullptr, ErrorCode::InvalidArgument, "ctx is null");
        const std::string text = config::to_json(ctx->cfg);
        if (written) *written = text.size();
        if (buf && cap > 0) {
            const size_t n = std::min(cap - 1, text.size());
            std::memcpy(buf, text.data(), n);
            buf[n] = '\0';
        }
    });
}

uint64_t bplab_ctx_fingerprint(const bplab_ctx* ctx) {
    return ctx ? config::fingerprint(ctx->cfg) : 0;
}

int bplab_gen_data(bplab_ctx* ctx, const char* task, int houses, uint64_t seed,
                   const char* out_dir) {
    return guarded([&] {
        check(ctx && out_dir, ErrorCode::InvalidArgument, "ctx and out_dir are required");
        const sim::Task t = parse_task(task);
        const config::ExperimentConfig& cfg = ctx->cfg;
        const bool explore = t == sim::Task::Explore;
        const int n_houses =
            houses > 0 ? houses : (explore ? cfg.budget.houses : cfg.budget.downstream_houses);
        const int per_house = explore ? cfg.budget.episodes_per_house
                                      : cfg.budget.downstream_episodes_per_house;
        const uint64_t s =
            seed ? seed : Rng::stream(cfg.seed, "data", static_cast<uint64_t>(t)).next_u64();
        data::Dataset ds =
            data::build_dataset(t, n_houses, per_house, s, cfg.gen, cfg.encoder_seed);
        data::write_dataset(ds, out_dir);
        write_text(std::string(out_dir) + "/config.json", config::to_json(cfg));
    });
}

int bplab_pretrain(bplab_ctx* ctx, const char* objective, const char* data_dir,
                   const char* ckpt_path, const char* metrics_path, double* best_metric) {
    return guarded([&] {
        check(ctx && data_dir && ckpt_path, ErrorCode::InvalidArgument,
              "ctx, data_dir, and ckpt_path are required");
        config::ExperimentConfig cfg = ctx->cfg;
        if (objective && *objective) cfg.objective.kind = objectives::parse_objective(objective);
        data::Dataset ds = data::read_dataset(data_dir);
        std::ofstream metrics = open_metrics(metrics_path);
        runner::PretrainResult res =
            runner::pretrain(cfg, ds, ckpt_path, metrics.is_open() ? &metrics : nullptr);
        if (best_metric) *best_metric = res.best;
    });
}

int bplab_transfer(bplab_ctx* ctx, const char* ckpt_path, const char* task_data_dir, int seed_tag,
                   int end_to_end, const char* rep_name, const char* results_dir,
                   const char* metrics_path, double* eval_accuracy) {
    return guarded([&] {
        check(ctx && task_data_dir, ErrorCode::InvalidArgument,
              "ctx and task_data_dir are required");
        check(end_to_end || (ckpt_path && *ckpt_path), ErrorCode::InvalidArgument,
              "frozen transfer needs a checkpoint");
        data::Dataset ds = data::read_dataset(task_data_dir);
        std::string rep = rep_name ? rep_name : "";
        if (rep.empty()) {
            if (end_to_end) {
                rep = "end-to-end";
            } else {
                tensor::ParamStore<float> probe(0);
                tensor::CheckpointMeta meta = tensor::load_checkpoint(probe, ckpt_path);
                auto it = meta.extra.find("objective");
                rep = it != meta.extra.end() ? it->second : "unknown";
            }
        }
        std::ofstream metrics = open_metrics(metrics_path);
        runner::TransferResult res =
            runner::train_downstream(ctx->cfg, ckpt_path ? ckpt_path : "", ds, seed_tag,
                                     end_to_end != 0, metrics.is_open() ? &metrics : nullptr);
        if (results_dir && *results_dir)
            runner::append_record(results_dir,
                                  {rep, sim::task_name(res.eval.task), seed_tag,
                                   res.eval.accuracy, config::fingerprint(ctx->cfg)});
        if (eval_accuracy) *eval_accuracy = res.eval.accuracy;
    });
}

int bplab_baselines(bplab_ctx* ctx, const char* pretrain_data_dir, const char* task_data_dir,
                    const char* results_dir, double* move_ahead, double* modal_a,
                    double* modal_t) {
    return guarded([&] {
        check(ctx && pretrain_data_dir && task_data_dir, ErrorCode::InvalidArgument,
              "ctx and both data dirs are required");
        data::Dataset pre = data::read_dataset(pretrain_data_dir);
        check(pre.manifest.task == sim::Task::Explore, ErrorCode::TaskMismatch,
              "baseline statistics come from exploration data");
        data::Dataset ds = data::read_dataset(task_data_dir);
        runner::ModalTables tables = runner::build_modal_tables(pre);
        const uint64_t fp = config::fingerprint(ctx->cfg);
        double* outs[] = {move_ahead, modal_a, modal_t};
        const runner::BaselineKind kinds[] = {runner::BaselineKind::MoveAhead,
                                              runner::BaselineKind::ModalA,
                                              runner::BaselineKind::ModalT};
        for (int i = 0; i < 3; ++i) {
            runner::EvalResult res = runner::baseline_eval(kinds[i], tables, ds);
            if (results_dir && *results_dir)
                runner::append_record(results_dir, {runner::baseline_name(kinds[i]),
                                                    sim::task_name(res.task), 0, res.accuracy,
                                                    fp});
            if (outs[i]) *outs[i] = res.accuracy;
        }
    });
}

int bplab_gradcheck(const char* objective, double* max_rel_err) {
    return guarded([&] {
        check(objective && max_rel_err, ErrorCode::InvalidArgument,
              "objective and out pointer are required");
        runner::GradAudit audit =
            runner::gradcheck_objective(objectives::parse_objective(objective));
        *max_rel_err = audit.max_rel_err;
    });
}

int bplab_report(const char* results_dir, const char* csv_path, const char* text_path) {
    return guarded([&] {
        check(results_dir, ErrorCode::InvalidArgument, "results_dir is required");
        std::vector<runner::RunRecord> records = runner::read_records(results_dir);
        if (csv_path && *csv_path) write_text(csv_path, runner::report_csv(records));
        if (text_path && *text_path) write_text(text_path, runner::report_text(records));
    });
}

} // extern "C"
