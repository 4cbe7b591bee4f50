// Command-line front end: synthetic data generation, preprocessing, model
// training, sampling, classification, series reconstruction, evaluation and
// the bundled experiment reproductions.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "resp/commands.hpp"

namespace {

struct CommonArgs {
    std::string config_file;
    std::string out_dir;
    std::string seed;
    std::vector<std::string> set_pairs;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "key=value configuration file");
    cmd->add_option("--out-dir", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "master seed");
    cmd->add_option("--set", args.set_pairs, "extra key=value overrides")->take_all();
}

resp::cli::RunConfig build_config(const CommonArgs& args) {
    resp::cli::RunConfig cfg;
    if (!args.config_file.empty()) cfg.merge_file(args.config_file);
    for (const std::string& pair : args.set_pairs) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos)
            throw resp::ConfigError("--set expects key=value, got '" + pair + "'");
        cfg.set(pair.substr(0, eq), pair.substr(eq + 1));
    }
    if (!args.out_dir.empty()) cfg.set("out_dir", args.out_dir);
    if (!args.seed.empty()) cfg.set("seed", args.seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"breathing signal modeling toolkit"};
    app.require_subcommand(1);

    CommonArgs synth_args, pre_args, train_args, gen_args, cls_args, rec_args, eval_args,
        repro_args;
    std::string marker_csv, thresholds_json, dataset_path, bundle_path, experiment;
    std::string train_variant, labels_fraction, labels_count, latent_dim, classes, eval_protocol,
        gen_class, gen_count;

    CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic sinusoid dataset");
    add_common(c_synth, synth_args);

    CLI::App* c_pre = app.add_subcommand("preprocess", "compress a marker trace into vectors");
    add_common(c_pre, pre_args);
    c_pre->add_option("--input", marker_csv, "marker CSV (t,x,y,z)")->required();
    c_pre->add_option("--thresholds", thresholds_json,
                      "reuse stored slope thresholds instead of recomputing");

    CLI::App* c_train = app.add_subcommand("train", "train a model on a dataset");
    add_common(c_train, train_args);
    c_train->add_option("--dataset", dataset_path, "dataset file")->required();
    c_train->add_option("--variant", train_variant, "vae|aae|saae|classifier");
    c_train->add_option("--labels-fraction", labels_fraction, "fraction of labels to use");
    c_train->add_option("--labels-count", labels_count, "number of labels to use");
    c_train->add_option("--latent-dim", latent_dim, "latent dimensionality");
    c_train->add_option("--classes", classes, "number of classes");

    CLI::App* c_gen = app.add_subcommand("generate", "sample new vectors from a trained model");
    add_common(c_gen, gen_args);
    c_gen->add_option("--bundle", bundle_path, "model bundle")->required();
    c_gen->add_option("--class", gen_class, "down|regular|up|any");
    c_gen->add_option("--count", gen_count, "number of samples");

    CLI::App* c_cls = app.add_subcommand("classify", "predict classes for a dataset");
    add_common(c_cls, cls_args);
    c_cls->add_option("--bundle", bundle_path, "model bundle")->required();
    c_cls->add_option("--dataset", dataset_path, "dataset file")->required();

    CLI::App* c_rec = app.add_subcommand("reconstruct", "turn a vector back into a time series");
    add_common(c_rec, rec_args);
    c_rec->add_option("--bundle", bundle_path, "reconstruction bundle")->required();
    c_rec->add_option("--dataset", dataset_path, "dataset file")->required();

    CLI::App* c_eval = app.add_subcommand("eval", "run an evaluation protocol");
    add_common(c_eval, eval_args);
    c_eval->add_option("--bundle", bundle_path, "model bundle")->required();
    c_eval->add_option("--dataset", dataset_path, "dataset file")->required();
    c_eval->add_option("--protocol", eval_protocol,
                       "classification|recon_error|cas|distinguishability|latent|grid");

    CLI::App* c_repro = app.add_subcommand("repro", "reproduce a bundled experiment");
    add_common(c_repro, repro_args);
    c_repro->add_option("--experiment", experiment, "s1|s2|recon")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        resp::cli::CommandResult res;
        if (c_synth->parsed()) {
            res = resp::cli::cmd_synth(build_config(synth_args));
        } else if (c_pre->parsed()) {
            res = resp::cli::cmd_preprocess(build_config(pre_args), marker_csv, thresholds_json);
        } else if (c_train->parsed()) {
            resp::cli::RunConfig cfg = build_config(train_args);
            if (!train_variant.empty()) cfg.set("model.variant", train_variant);
            if (!labels_fraction.empty()) cfg.set("train.label_fraction", labels_fraction);
            if (!labels_count.empty()) cfg.set("train.label_count", labels_count);
            if (!latent_dim.empty()) cfg.set("model.latent_dim", latent_dim);
            if (!classes.empty()) cfg.set("model.classes", classes);
            res = resp::cli::cmd_train(std::move(cfg), dataset_path);
        } else if (c_gen->parsed()) {
            resp::cli::RunConfig cfg = build_config(gen_args);
            if (!gen_class.empty()) cfg.set("generate.class", gen_class);
            if (!gen_count.empty()) cfg.set("generate.count", gen_count);
            res = resp::cli::cmd_generate(std::move(cfg), bundle_path);
        } else if (c_cls->parsed()) {
            res = resp::cli::cmd_classify(build_config(cls_args), bundle_path, dataset_path);
        } else if (c_rec->parsed()) {
            res = resp::cli::cmd_reconstruct(build_config(rec_args), bundle_path, dataset_path);
        } else if (c_eval->parsed()) {
            resp::cli::RunConfig cfg = build_config(eval_args);
            if (!eval_protocol.empty()) cfg.set("eval.protocol", eval_protocol);
            res = resp::cli::cmd_eval(std::move(cfg), bundle_path, dataset_path);
        } else if (c_repro->parsed()) {
            res = resp::cli::cmd_repro(build_config(repro_args), experiment);
        }
        std::printf("ok out_dir=%s\n", res.out_dir.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
