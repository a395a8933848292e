#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "trajfuse/pipeline.hpp"

using namespace trajfuse;

namespace {

struct CommonArgs {
    std::string manifest;
    std::string method;
    std::string out;
    std::string dataset;
    int64_t seed = -1;
    bool allow_short = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--manifest", args.manifest, "run manifest JSON")->required();
    cmd->add_option("--method", args.method, "override the manifest method");
    cmd->add_option("--out", args.out, "override the output directory");
    cmd->add_option("--dataset", args.dataset, "override the dataset root");
    cmd->add_option("--seed", args.seed, "override the run seed");
    cmd->add_flag("--allow-short", args.allow_short, "admit clips below 41 frames");
}

RunManifest resolve(const CommonArgs& args) {
    RunManifest m = RunManifest::load(args.manifest);
    if (!args.method.empty()) {
        auto meth = method_from_name(args.method);
        if (!meth) throw ParseError("unknown method '" + args.method + "'");
        m.method = *meth;
    }
    if (!args.out.empty()) m.out_dir = args.out;
    if (!args.dataset.empty()) m.dataset_root = args.dataset;
    if (args.seed >= 0) {
        m.seed = static_cast<uint64_t>(args.seed);
        m.train.seed = m.seed;
    }
    if (args.allow_short) m.allow_short = true;
    if (m.out_dir.empty()) m.out_dir = "out";
    if (m.dataset_root.empty()) m.dataset_root = m.out_dir / "dataset";
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dense-trajectory and pose-feature activity recognition pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    EvalOptions eval_opts;

    auto* synth = app.add_subcommand("synth-gen", "generate the synthetic dataset");
    auto* extract = app.add_subcommand("extract", "extract per-clip descriptors");
    auto* traincb = app.add_subcommand("train-codebook", "train k-means codebooks");
    auto* encode = app.add_subcommand("encode", "encode bag-of-words clip features");
    auto* train = app.add_subcommand("train", "train one-vs-all classifiers");
    auto* predict = app.add_subcommand("predict", "score test clips");
    auto* eval = app.add_subcommand("eval", "evaluate predictions (mAP)");
    auto* analyze = app.add_subcommand("analyze", "compute complexity measures");
    auto* report = app.add_subcommand("report", "emit CSV/SVG reports");

    for (CLI::App* cmd : {synth, extract, traincb, encode, train, predict, eval, analyze, report})
        add_common(cmd, args);
    eval->add_option("--top-n", eval_opts.top_n, "restrict to the N largest training classes");
    eval->add_option("--subset", eval_opts.subset, "clip subset: all | single-fully-visible")
        ->check(CLI::IsMember({"all", "single-fully-visible"}));

    CLI11_PARSE(app, argc, argv);

    try {
        RunManifest m = resolve(args);
        if (synth->parsed()) {
            DatasetIndex idx = cmd_synth_gen(m);
            std::printf("generated %zu clips under %s\n", idx.clips.size(),
                        m.dataset_root.string().c_str());
        } else if (extract->parsed()) {
            cmd_extract(m);
            std::printf("extracted features for method %s\n", method_name(m.method));
        } else if (traincb->parsed()) {
            cmd_train_codebook(m);
            std::printf("trained codebooks for method %s\n", method_name(m.method));
        } else if (encode->parsed()) {
            cmd_encode(m);
            std::printf("encoded clip features for method %s\n", method_name(m.method));
        } else if (train->parsed()) {
            cmd_train(m);
            std::printf("trained classifiers for method %s\n", method_name(m.method));
        } else if (predict->parsed()) {
            cmd_predict(m);
            std::printf("wrote predictions for method %s\n", method_name(m.method));
        } else if (eval->parsed()) {
            EvalReport rep = cmd_eval(m, eval_opts);
            std::printf("method %s: mAP %.4f over %zu classes (%zu excluded)\n",
                        method_name(m.method), rep.map, rep.class_ids.size(),
                        rep.excluded_classes.size());
        } else if (analyze->parsed()) {
            cmd_analyze(m);
            std::printf("wrote complexity profiles\n");
        } else if (report->parsed()) {
            cmd_report(m);
            std::printf("wrote reports under %s\n",
                        (m.out_dir / "report").string().c_str());
        }
    } catch (const PipelineError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 2;
    }
    return 0;
}
