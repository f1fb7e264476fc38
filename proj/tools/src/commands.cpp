// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr_cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "lmr/attention_export.hpp"
#include "lmr/checkpoint.hpp"
#include "lmr/dataset.hpp"
#include "lmr/errors.hpp"
#include "lmr/grad_check.hpp"
#include "lmr/instructions.hpp"
#include "lmr/metrics.hpp"
#include "lmr/query_complexity.hpp"
#include "lmr/synthetic_world.hpp"
#include "lmr/text_embedder.hpp"
#include "lmr/trainer.hpp"
#include "lmr_cli/run_config.hpp"

namespace lmr::cli {

namespace fs = std::filesystem;

namespace {

// Raised for usage problems detected after parsing.
struct UsageError : Error {
    using Error::Error;
};

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* app, CommonArgs& args) {
    app->add_option("-c,--config", args.config_file, "INI config file ([world] [model] [train] [loss] [eval])");
    app->add_option("--set", args.overrides, "Override one key, e.g. --set train.epochs=5")->allow_extra_args(false);
}

RunConfig build_config(const CommonArgs& args) {
    RunConfig cfg;
    if (!args.config_file.empty()) cfg.load_file(args.config_file);
    for (const auto& o : args.overrides) cfg.apply_override(o);
    cfg.validate();
    return cfg;
}

void echo_config(const RunConfig& cfg, const std::optional<fs::path>& dir, std::ostream& out) {
    out << "--- effective config";
    if (dir) out << " (" << write_effective_config(cfg, *dir).string() << ")";
    out << " ---\n" << cfg.to_ini() << "---\n";
}

bool is_generated_file(const fs::path& p) {
    const std::string name = p.filename().string();
    return name == "manifest.jsonl" || name == "dataset.json" || p.extension() == ".fmt1" ||
           (name.rfind("effective_config.", 0) == 0 && p.extension() == ".ini");
}

std::vector<Sample> require_dataset(const std::string& dir, std::size_t threads) {
    if (dir.empty() || !fs::is_directory(dir) || !fs::exists(fs::path(dir) / "manifest.jsonl")) {
        throw UsageError("missing data: '" + dir + "' is not a dataset directory (no manifest.jsonl)");
    }
    DatasetOptions opt;
    opt.threads = threads;
    return load_dataset(dir, opt);
}

void check_dims(const ModelConfig& m, const std::vector<Sample>& data) {
    for (const auto& s : data) {
        if (s.visual.cols() != m.visual_dim || s.context.cols() != m.text_dim || s.query.cols() != m.text_dim) {
            throw ShapeError("episode " + s.record.qid + " has feature widths visual=" +
                             std::to_string(s.visual.cols()) + " text=" + std::to_string(s.context.cols()) +
                             " but model expects visual=" + std::to_string(m.visual_dim) +
                             " text=" + std::to_string(m.text_dim));
        }
    }
}

// The run config's model section wins when it was set explicitly; otherwise
// the model stored in the checkpoint is used.
Checkpoint open_checkpoint(const std::string& path, const RunConfig& cfg) {
    if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
    return cfg.any_explicit("model") ? load_checkpoint(path, cfg.model) : load_checkpoint(path);
}

int cmd_gen(const RunConfig& cfg, const std::string& out_dir, bool force, std::ostream& out) {
    const fs::path dir(out_dir);
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw UsageError(out_dir + " exists and is not a directory");
        if (!fs::is_empty(dir)) {
            if (!force) throw UsageError("refusing to write into non-empty directory " + out_dir + " (use --force)");
            std::vector<fs::path> stale;
            for (const auto& e : fs::directory_iterator(dir)) {
                if (e.is_regular_file() && is_generated_file(e.path())) stale.push_back(e.path());
            }
            for (const auto& p : stale) fs::remove(p);
        }
    }
    const auto bundles = generate_dataset(cfg.world, cfg.train.threads);
    write_dataset(bundles, cfg.world, dir);
    echo_config(cfg, dir, out);
    std::size_t windows = 0;
    for (const auto& b : bundles) windows += b.record.windows.size();
    out << "episodes: " << bundles.size() << "\nclips per episode: " << cfg.world.clip_count
        << "\nwindows: " << windows << "\nwritten to: " << dir.string() << "\n";
    return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir,
              const std::string& resume_path, std::ostream& out) {
    const auto data = require_dataset(data_dir, cfg.train.threads);
    check_dims(cfg.model, data);
    std::optional<TrainState> resume;
    if (!resume_path.empty()) {
        if (!fs::exists(resume_path)) throw UsageError("checkpoint not found: " + resume_path);
        resume = load_checkpoint(resume_path, cfg.model).state;
        out << "resuming from epoch " << resume->epoch << " (step " << resume->step << ")\n";
    }
    echo_config(cfg, fs::path(out_dir), out);
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochLoss& e) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "epoch %u/%u  l1=%.4f giou=%.4f ce=%.4f l_mr=%.4f l_cont=%.4f total=%.4f\n",
                      e.epoch, cfg.train.epochs, e.mean.l1, e.mean.giou, e.mean.ce, e.mean.l_mr, e.mean.l_cont,
                      e.mean.total);
        out << buf << std::flush;
    };
    const auto state = train(cfg.train, cfg.model, cfg.loss, data, out_dir, std::move(resume), hooks);
    out << "trained " << state.epoch << " epochs, " << state.step << " steps; checkpoint "
        << (fs::path(out_dir) / "model.lmrc").string() << "\n";
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt, const std::string& data_dir, const std::string& out_dir,
             const std::string& cqval, bool ablate, std::ostream& out) {
    const auto ck = open_checkpoint(ckpt, cfg);
    auto data = require_dataset(data_dir, cfg.eval.threads);
    check_dims(ck.model, data);
    std::vector<EpisodeRecord> manifest;
    for (const auto& s : data) manifest.push_back(s.record);
    if (!cqval.empty()) {
        const auto kept = build_cqval_split(manifest, parse_cqval(cqval));
        data = filter_samples(data, kept);
        out << "C-QVal " << cqval << ": " << kept.size() << " of " << manifest.size() << " queries\n";
        manifest = kept;
    }
    if (ablate) {
        ablate_context(data);
        out << "context stream ablated (zeroed)\n";
    }
    const auto preds = predict(ck.model, ck.state.params, data, cfg.eval.threads);
    const auto report = evaluate(preds, manifest);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        echo_config(cfg, fs::path(out_dir), out);
        std::ofstream(fs::path(out_dir) / "report.csv") << report_csv(report);
        std::ofstream(fs::path(out_dir) / "report.txt") << report_table(report);
        write_predictions(preds, fs::path(out_dir) / "predictions.jsonl");
    }
    out << report_table(report);
    return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, const GradCheckOptions& opt, bool verbose, std::ostream& out) {
    auto setup = tiny_grad_check_setup(opt.seed);
    setup.weights = cfg.loss;
    const auto report = grad_check(setup, opt);
    if (verbose || report.probes.size() <= 20) {
        for (const auto& p : report.probes) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "probe %-28s analytic=% .9e numeric=% .9e rel_err=%.3e\n", p.param.c_str(),
                          p.analytic, p.numeric, p.rel_error);
            out << buf;
        }
    }
    char buf[256];
    std::snprintf(buf, sizeof buf, "probes: %zu  skipped: %zu  max_rel_error: %.3e  tolerance: %.3e\n",
                  report.probes.size(), report.skipped, report.max_rel_error, report.tolerance);
    out << buf;
    if (const auto* w = report.worst()) out << "worst parameter: " << w->param << "\n";
    out << (report.passed ? "PASS" : "FAIL") << "\n";
    return report.passed ? kExitOk : kExitFailure;
}

int cmd_split(const std::string& manifest_path, const std::string& cqval, const std::string& out_path,
              std::ostream& out) {
    if (!fs::exists(manifest_path)) throw UsageError("manifest not found: " + manifest_path);
    const auto manifest = load_manifest(manifest_path);
    const auto kept = build_cqval_split(manifest, parse_cqval(cqval));
    write_manifest(kept, out_path);
    out << "kept " << kept.size() << " of " << manifest.size() << " queries -> " << out_path << "\n";
    return kExitOk;
}

int cmd_prompts(const std::string& manifest_path, std::uint64_t seed, const std::string& out_path, std::ostream& out) {
    if (!fs::exists(manifest_path)) throw UsageError("manifest not found: " + manifest_path);
    ManifestOptions mo;
    mo.require_windows = false;
    const auto manifest = load_manifest(manifest_path, mo);
    emit_prompt_batch(manifest, seed, out_path);
    out << "wrote prompt batch for " << manifest.size() << " episodes -> " << out_path << "\n";
    return kExitOk;
}

int cmd_ingest(const std::string& descriptions, const std::string& data_dir, std::ostream& out) {
    if (!fs::exists(descriptions)) throw UsageError("descriptions not found: " + descriptions);
    const fs::path dir(data_dir);
    if (!fs::exists(dir / "manifest.jsonl")) throw UsageError("missing data: no manifest.jsonl in " + data_dir);
    const auto manifest = load_manifest(dir / "manifest.jsonl");
    const auto text = dataset_text_config(dir);
    std::map<std::string, std::vector<DescriptionRecord>> by_vid;
    for (auto& d : load_descriptions(descriptions)) by_vid[d.vid].push_back(std::move(d));
    std::set<std::string> done;
    for (const auto& r : manifest) {
        if (!done.insert(r.vid).second) continue;
        auto it = by_vid.find(r.vid);
        if (it == by_vid.end()) throw CoverageError("no descriptions for video " + r.vid);
        write_feature_matrix(embed_descriptions(it->second, text, r.clip_count), dir / (r.vid + ".context.fmt1"));
    }
    out << "embedded descriptions for " << done.size() << " videos into " << data_dir << "\n";
    return kExitOk;
}

int cmd_attn(const RunConfig& cfg, const std::string& ckpt, const std::string& data_dir, const std::string& qid,
             const std::string& query_text, const std::string& out_path, std::ostream& out) {
    const auto ck = open_checkpoint(ckpt, cfg);
    const auto data = require_dataset(data_dir, cfg.eval.threads);
    const Sample* sample = nullptr;
    for (const auto& s : data) {
        if (s.record.qid == qid) sample = &s;
    }
    if (!sample) throw UsageError("qid " + qid + " not in " + data_dir);
    FeatureMatrix query = sample->query;
    if (!query_text.empty()) query = embed_query_sequence(query_text, dataset_text_config(data_dir));
    ForwardOptions fo;
    fo.record_attention = true;
    const auto fwd = forward<float>(ck.model, ck.state.params, sample->visual, sample->context, query, fo);
    export_attention(fwd, out_path);
    out << "attention for " << qid << " (" << query.rows() << " query tokens) -> " << out_path << "\n";
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"lmr: context-enhanced video moment retrieval on feature files"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    CommonArgs common;
    std::string out_dir, data_dir, ckpt, resume, cqval, manifest, out_file, qid, query_text, descriptions;
    bool force = false, ablate = false, verbose = false;
    std::uint64_t seed = 0;
    GradCheckOptions gc;

    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    add_common(gen, common);
    gen->add_option("-o,--out", out_dir, "Output directory")->required();
    gen->add_flag("--force", force, "Overwrite generated files in a non-empty directory");

    auto* tr = app.add_subcommand("train", "Train a model on a dataset directory");
    add_common(tr, common);
    tr->add_option("-d,--data", data_dir, "Dataset directory")->required();
    tr->add_option("-o,--out", out_dir, "Run directory for checkpoints and loss_history.csv")->required();
    tr->add_option("--from-checkpoint", resume, "Resume from a checkpoint");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    add_common(ev, common);
    ev->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
    ev->add_option("-d,--data", data_dir, "Dataset directory")->required();
    ev->add_option("-o,--out", out_dir, "Directory for report.csv, report.txt and predictions.jsonl");
    ev->add_option("--cqval", cqval, "Least clause count and word count, e.g. 2,10");
    ev->add_flag("--ablate-context", ablate, "Zero the context stream before inference");

    auto* gcmd = app.add_subcommand("gradcheck", "Finite-difference gradient check on the tiny config");
    add_common(gcmd, common);
    gcmd->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();
    gcmd->add_option("--probes", gc.probes, "Number of scalar parameters probed")->capture_default_str();
    gcmd->add_option("--step", gc.step, "Central-difference step")->capture_default_str();
    gcmd->add_option("--seed", gc.seed, "Probe and initialization seed")->capture_default_str();
    gcmd->add_option("--param", gc.name_prefix, "Only probe parameters with this name prefix");
    gcmd->add_flag("-v,--verbose", verbose, "Print every probe");

    auto* sp = app.add_subcommand("split", "Write a C-QVal sub-manifest");
    sp->add_option("-m,--manifest", manifest, "Input manifest.jsonl")->required();
    sp->add_option("--cqval", cqval, "Least clause count and word count, e.g. 2,10")->required();
    sp->add_option("-o,--out", out_file, "Output manifest")->required();

    auto* pr = app.add_subcommand("prompts", "Emit per-clip description requests");
    pr->add_option("-m,--manifest", manifest, "Input manifest.jsonl")->required();
    pr->add_option("-o,--out", out_file, "Output JSONL")->required();
    pr->add_option("--seed", seed, "Instruction sampling seed")->capture_default_str();

    auto* in = app.add_subcommand("ingest", "Embed a description file into context features");
    in->add_option("--descriptions", descriptions, "Description JSONL")->required();
    in->add_option("-d,--data", data_dir, "Dataset directory")->required();

    auto* at = app.add_subcommand("attn", "Export query-to-context attention per clip");
    add_common(at, common);
    at->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
    at->add_option("-d,--data", data_dir, "Dataset directory")->required();
    at->add_option("--qid", qid, "Episode to inspect")->required();
    at->add_option("--query", query_text, "Replace the episode's query text");
    at->add_option("-o,--out", out_file, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) return cmd_gen(build_config(common), out_dir, force, out);
        if (*tr) return cmd_train(build_config(common), data_dir, out_dir, resume, out);
        if (*ev) return cmd_eval(build_config(common), ckpt, data_dir, out_dir, cqval, ablate, out);
        if (*gcmd) return cmd_gradcheck(build_config(common), gc, verbose, out);
        if (*sp) return cmd_split(manifest, cqval, out_file, out);
        if (*pr) return cmd_prompts(manifest, seed, out_file, out);
        if (*in) return cmd_ingest(descriptions, data_dir, out);
        if (*at) return cmd_attn(build_config(common), ckpt, data_dir, qid, query_text, out_file, out);
    } catch (const TrainingError& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"lmr"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace lmr::cli
