#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <bplab/bplab.h>

// Command-line front end. Everything below the argument layer goes through
// the C API; the only JSON handled here is config merging (flags > file >
// defaults) and the dataset manifest cross-check.

namespace {

using nlohmann::json;

struct CtxGuard {
    bplab_ctx* p = nullptr;
    ~CtxGuard() { bplab_ctx_destroy(p); }
};

int die(const std::string& what) {
    std::cerr << "error: " << what;
    const char* detail = bplab_last_error();
    if (detail && *detail) std::cerr << ": " << detail;
    std::cerr << "\n";
    return 1;
}

json parse_set_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text); // bare words become strings
    }
}

// --config file, then --set dotted.path=value overrides
int build_ctx(const std::string& config_path, const std::vector<std::string>& sets,
              CtxGuard& ctx) {
    json j = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in.good()) {
            std::cerr << "error: cannot read config file " << config_path << "\n";
            return 1;
        }
        try {
            in >> j;
        } catch (const json::exception& e) {
            std::cerr << "error: config parse: " << e.what() << "\n";
            return 1;
        }
    }
    for (const std::string& kv : sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::cerr << "error: --set expects dotted.path=value, got '" << kv << "'\n";
            return 1;
        }
        std::string path = "/" + kv.substr(0, eq);
        for (char& c : path)
            if (c == '.') c = '/';
        try {
            j[json::json_pointer(path)] = parse_set_value(kv.substr(eq + 1));
        } catch (const json::exception& e) {
            std::cerr << "error: --set " << kv << ": " << e.what() << "\n";
            return 1;
        }
    }
    if (bplab_ctx_create(j.dump().c_str(), &ctx.p) != BPLAB_OK) return die("invalid config");
    return 0;
}

void add_config_flags(CLI::App* cmd, std::string& config_path, std::vector<std::string>& sets) {
    cmd->add_option("--config", config_path, "experiment config JSON file");
    cmd->add_option("--set", sets, "override a config value, e.g. --set dims.hb=64");
}

std::string manifest_task(const std::string& data_dir) {
    std::ifstream in(data_dir + "/manifest.json");
    if (!in.good()) return "";
    try {
        json j;
        in >> j;
        return j.value("task", "");
    } catch (const json::exception&) {
        return "";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bplab: two-stage embodied representation learning pipeline"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    app.footer("BPLB_THREADS caps internal worker pools.");

    std::string config_path;
    std::vector<std::string> sets;

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate an expert dataset");
    std::string gen_task, gen_out;
    int gen_houses = 0;
    uint64_t gen_seed = 0;
    gen->add_option("--task", gen_task, "explore | objectnav | leavereturn")->required();
    gen->add_option("--houses", gen_houses, "house count (0: from config)");
    gen->add_option("--seed", gen_seed, "dataset seed (0: derived from config seed)");
    gen->add_option("--out", gen_out, "output directory")->required();
    add_config_flags(gen, config_path, sets);

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "pretrain one objective on exploration data");
    std::string pre_objective, pre_data, pre_out, pre_metrics;
    pre->add_option("--objective", pre_objective, "objective name")->required();
    pre->add_option("--data", pre_data, "exploration dataset directory")->required();
    pre->add_option("--out", pre_out, "checkpoint path")->required();
    pre->add_option("--metrics", pre_metrics, "line-delimited JSON metrics file");
    add_config_flags(pre, config_path, sets);

    // transfer
    auto* tr = app.add_subcommand("transfer", "frozen transfer to a downstream task");
    std::string tr_ckpt, tr_task, tr_data, tr_results, tr_rep, tr_metrics;
    int tr_seeds = 3;
    bool tr_e2e = false;
    tr->add_option("--ckpt", tr_ckpt, "pretrained checkpoint");
    tr->add_option("--task", tr_task, "objectnav | leavereturn (cross-checked with --data)");
    tr->add_option("--data", tr_data, "downstream dataset directory")->required();
    tr->add_option("--seeds", tr_seeds, "number of repetitions")->check(CLI::PositiveNumber);
    tr->add_option("--results", tr_results, "results directory for records.jsonl");
    tr->add_option("--rep", tr_rep, "row label (default: checkpoint objective)");
    tr->add_option("--metrics", tr_metrics, "metrics file prefix (seed index appended)");
    tr->add_flag("--end-to-end", tr_e2e, "train everything from random init, no checkpoint");
    add_config_flags(tr, config_path, sets);

    // baselines
    auto* base = app.add_subcommand("baselines", "count-based baselines on a downstream task");
    std::string base_pre, base_eval, base_results;
    base->add_option("--pretrain-data", base_pre, "exploration dataset directory")->required();
    base->add_option("--eval-data", base_eval, "downstream dataset directory")->required();
    base->add_option("--results", base_results, "results directory for records.jsonl");
    add_config_flags(base, config_path, sets);

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of objective gradients");
    std::string gc_objective = "all";
    double gc_tol = 1e-4;
    gc->add_option("--objective", gc_objective, "objective name or 'all'");
    gc->add_option("--tol", gc_tol, "max relative error tolerance");

    // report
    auto* rep = app.add_subcommand("report", "aggregate records into a results table");
    std::string rep_in, rep_out, rep_csv;
    rep->add_option("--in", rep_in, "results directory")->required();
    rep->add_option("--out", rep_out, "text report path");
    rep->add_option("--csv", rep_csv, "CSV report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (gen->parsed()) {
        CtxGuard ctx;
        if (int rc = build_ctx(config_path, sets, ctx)) return rc;
        if (bplab_gen_data(ctx.p, gen_task.c_str(), gen_houses, gen_seed, gen_out.c_str()) !=
            BPLAB_OK)
            return die("gen-data failed");
        std::printf("wrote %s dataset to %s (config %016llx)\n", gen_task.c_str(),
                    gen_out.c_str(),
                    static_cast<unsigned long long>(bplab_ctx_fingerprint(ctx.p)));
        return 0;
    }

    if (pre->parsed()) {
        CtxGuard ctx;
        if (int rc = build_ctx(config_path, sets, ctx)) return rc;
        double best = 0;
        if (bplab_pretrain(ctx.p, pre_objective.c_str(), pre_data.c_str(), pre_out.c_str(),
                           pre_metrics.empty() ? nullptr : pre_metrics.c_str(),
                           &best) != BPLAB_OK)
            return die("pretrain failed");
        std::printf("%s: best validation %.4f -> %s\n", pre_objective.c_str(), best,
                    pre_out.c_str());
        return 0;
    }

    if (tr->parsed()) {
        CtxGuard ctx;
        if (int rc = build_ctx(config_path, sets, ctx)) return rc;
        if (!tr_task.empty()) {
            const std::string actual = manifest_task(tr_data);
            if (actual != tr_task) {
                std::cerr << "error: --task " << tr_task << " but " << tr_data << " holds '"
                          << actual << "' data\n";
                return 1;
            }
        }
        for (int seed = 0; seed < tr_seeds; ++seed) {
            std::string metrics;
            if (!tr_metrics.empty()) metrics = tr_metrics + "." + std::to_string(seed);
            double acc = 0;
            if (bplab_transfer(ctx.p, tr_ckpt.empty() ? nullptr : tr_ckpt.c_str(),
                               tr_data.c_str(), seed, tr_e2e ? 1 : 0,
                               tr_rep.empty() ? nullptr : tr_rep.c_str(),
                               tr_results.empty() ? nullptr : tr_results.c_str(),
                               metrics.empty() ? nullptr : metrics.c_str(), &acc) != BPLAB_OK)
                return die("transfer failed (seed " + std::to_string(seed) + ")");
            std::printf("seed %d: eval accuracy %.4f\n", seed, acc);
        }
        return 0;
    }

    if (base->parsed()) {
        CtxGuard ctx;
        if (int rc = build_ctx(config_path, sets, ctx)) return rc;
        double ma = 0, mla = 0, mlt = 0;
        if (bplab_baselines(ctx.p, base_pre.c_str(), base_eval.c_str(),
                            base_results.empty() ? nullptr : base_results.c_str(), &ma, &mla,
                            &mlt) != BPLAB_OK)
            return die("baselines failed");
        std::printf("move-ahead %.4f  modal-a %.4f  modal-t %.4f\n", ma, mla, mlt);
        return 0;
    }

    if (gc->parsed()) {
        std::vector<std::string> names;
        if (gc_objective == "all") {
            for (int i = 0; i < bplab_objective_count(); ++i) names.push_back(bplab_objective_name(i));
        } else {
            names.push_back(gc_objective);
        }
        bool ok = true;
        for (const std::string& name : names) {
            double err = 0;
            if (bplab_gradcheck(name.c_str(), &err) != BPLAB_OK)
                return die("gradcheck failed for " + name);
            const bool pass = err < gc_tol;
            ok = ok && pass;
            std::printf("%-16s max relative error %.3e  [%s]\n", name.c_str(), err,
                        pass ? "ok" : "FAIL");
        }
        if (!ok) {
            std::cerr << "error: gradient check exceeded tolerance " << gc_tol << "\n";
            return 1;
        }
        return 0;
    }

    if (rep->parsed()) {
        if (bplab_report(rep_in.c_str(), rep_csv.empty() ? nullptr : rep_csv.c_str(),
                         rep_out.empty() ? nullptr : rep_out.c_str()) != BPLAB_OK)
            return die("report failed");
        if (!rep_out.empty()) {
            std::ifstream in(rep_out);
            std::cout << in.rdbuf();
        }
        return 0;
    }

    return 2;
}
