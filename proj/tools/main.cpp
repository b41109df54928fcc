// cnsnet experiment runner: train / eval / sweep / synth-bench / export-synth.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 internal invariant violation.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cnsnet/checkpoint.hpp"
#include "cnsnet/data.hpp"
#include "cnsnet/metrics.hpp"
#include "cnsnet/recognition.hpp"
#include "cnsnet/serialize.hpp"
#include "cnsnet/training.hpp"

namespace fs = std::filesystem;
using namespace cnsnet;

namespace {

// ---- option plumbing ---------------------------------------------------------

struct Options {
    // data
    std::string dataset;
    std::string idx_labels;
    std::string format = "text";
    bool no_pad622 = false;
    // split
    int known_prefix = 0; // 0 = unset
    std::string known_ids;
    double train_frac = 0.72;
    double val_frac = 0.08;
    // architecture
    std::string arch = "dense";
    std::string clf_hidden = "512,256";
    std::string gen_hidden = "128,256";
    std::string disc_hidden = "256,128";
    int latent = 64;
    int img_h = 0;
    int img_w = 0;
    // training
    int rounds = 500;
    int batch = 64;
    double lr = 0.0002;
    double beta = 1.0;
    double gamma = 1.0;
    bool baseline = false;
    bool disable_flattening = false;
    bool disable_exclusion = false;
    bool non_saturating = false;
    std::uint64_t seed = 0;
    // threshold policy
    std::string policy = "percentile";
    double theta = 0.5;
    double percentile = 5.0;
    double grid_min = 0.05;
    double grid_max = 0.95;
    int grid_steps = 19;
    // io
    std::string out;
    std::string config_path;
    std::string checkpoint;
    std::string split_path;
    std::string norm_path;
    // export-synth
    int count = 1000;
    // synth-bench
    int k_total = 10;
    int dim = 25;
    double sigma = 0.035;
    int per_family = 500;
    double knob = 3.0;
};

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(std::stoi(cell));
        } catch (const std::exception&) {
            throw InvalidConfig(std::string("bad ") + what + " list entry '" + cell + "'");
        }
    }
    if (out.empty()) throw InvalidConfig(std::string("empty ") + what + " list");
    return out;
}

// Flags override config-file values override defaults. CLI11 has already
// written flag values into the fields, so a config value lands only where the
// flag was not given.
struct Overlay {
    CLI::App* cmd;
    const json* cfg;

    template <class T>
    void operator()(const std::string& flag, const char* key, T& field) const {
        auto* opt = cmd->get_option_no_throw(flag);
        if (opt && opt->count() > 0) return;
        if (cfg->contains(key)) {
            try {
                field = cfg->at(key).get<T>();
            } catch (const json::exception& e) {
                throw InvalidConfig(std::string("config key '") + key + "': " + e.what());
            }
        }
    }
};

void apply_config_file(CLI::App* cmd, Options& o) {
    if (o.config_path.empty()) return;
    const json cfg = load_json(o.config_path);
    Overlay ov{cmd, &cfg};
    ov("--dataset", "dataset", o.dataset);
    ov("--idx-labels", "idx_labels", o.idx_labels);
    ov("--format", "format", o.format);
    ov("--no-pad622", "no_pad622", o.no_pad622);
    ov("--known-prefix", "known_prefix", o.known_prefix);
    ov("--known-ids", "known_ids", o.known_ids);
    ov("--train-frac", "train_frac", o.train_frac);
    ov("--val-frac", "val_frac", o.val_frac);
    ov("--arch", "arch", o.arch);
    ov("--clf-hidden", "clf_hidden", o.clf_hidden);
    ov("--gen-hidden", "gen_hidden", o.gen_hidden);
    ov("--disc-hidden", "disc_hidden", o.disc_hidden);
    ov("--latent", "latent", o.latent);
    ov("--img-h", "img_h", o.img_h);
    ov("--img-w", "img_w", o.img_w);
    ov("--rounds", "rounds", o.rounds);
    ov("--batch", "batch", o.batch);
    ov("--lr", "lr", o.lr);
    ov("--beta", "beta", o.beta);
    ov("--gamma", "gamma", o.gamma);
    ov("--baseline", "baseline", o.baseline);
    ov("--disable-flattening", "disable_flattening", o.disable_flattening);
    ov("--disable-exclusion", "disable_exclusion", o.disable_exclusion);
    ov("--non-saturating", "non_saturating", o.non_saturating);
    ov("--seed", "seed", o.seed);
    ov("--policy", "policy", o.policy);
    ov("--theta", "theta", o.theta);
    ov("--percentile", "percentile", o.percentile);
    ov("--grid-min", "grid_min", o.grid_min);
    ov("--grid-max", "grid_max", o.grid_max);
    ov("--grid-steps", "grid_steps", o.grid_steps);
    ov("--out", "out", o.out);
    ov("--checkpoint", "checkpoint", o.checkpoint);
    ov("--split", "split", o.split_path);
    ov("--norm", "norm", o.norm_path);
    ov("--count", "count", o.count);
    ov("--k-total", "k_total", o.k_total);
    ov("--dim", "dim", o.dim);
    ov("--sigma", "sigma", o.sigma);
    ov("--per-family", "per_family", o.per_family);
    ov("--knob", "knob", o.knob);
}

fs::path resolve_out_dir(const Options& o) {
    std::string out = o.out;
    if (out.empty()) {
        if (const char* env = std::getenv("CNSNET_OUT"))
            out = env;
        else
            out = "out";
    }
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

Dataset load_dataset(const Options& o) {
    if (o.dataset.empty()) throw InvalidConfig("no dataset path given (--dataset)");
    Dataset ds;
    if (o.format == "idx") {
        if (o.idx_labels.empty())
            throw InvalidConfig("IDX format needs --idx-labels alongside --dataset");
        ds = load_idx_images(o.dataset, o.idx_labels);
    } else {
        ds = load_feature_table(o.dataset, table_format_from(o.format));
    }
    if (ds.feature_dim == 622 && !o.no_pad622) ds = pad_dataset_to_625(ds);
    return ds;
}

KnownSelection known_selection(const Options& o) {
    if (!o.known_ids.empty()) return KnownSelection::explicit_ids(parse_int_list(o.known_ids, "known id"));
    if (o.known_prefix > 0) return KnownSelection::prefix(o.known_prefix);
    throw InvalidConfig("select known families via --known-prefix or --known-ids");
}

ArchitectureConfig arch_config(const Options& o, std::int64_t feature_dim) {
    ArchitectureConfig cfg;
    cfg.variant = arch_variant_from(o.arch);
    cfg.classifier_hidden = parse_int_list(o.clf_hidden, "classifier hidden");
    cfg.generator_hidden = parse_int_list(o.gen_hidden, "generator hidden");
    cfg.discriminator_hidden = parse_int_list(o.disc_hidden, "discriminator hidden");
    cfg.latent_dim = o.latent;
    cfg.feature_dim = feature_dim;
    if (cfg.variant == ArchVariant::conv) {
        std::int64_t h = o.img_h, w = o.img_w;
        if (h == 0 && w == 0) {
            const auto side = static_cast<std::int64_t>(std::lround(std::sqrt(
                static_cast<double>(feature_dim))));
            if (side * side != feature_dim)
                throw InvalidConfig("conv variant: give --img-h/--img-w (feature dim " +
                                    std::to_string(feature_dim) + " is not square)");
            h = w = side;
        }
        cfg.image_height = h;
        cfg.image_width = w;
    }
    return cfg;
}

TrainConfig train_config(const Options& o, const ArchitectureConfig& arch) {
    TrainConfig cfg;
    cfg.rounds = o.rounds;
    cfg.batch_size = o.batch;
    cfg.learning_rate = o.lr;
    cfg.weights = LossWeights{o.beta, o.gamma};
    cfg.seed = o.seed;
    cfg.arch = arch;
    cfg.enable_synthesizer = !o.baseline;
    cfg.enable_flattening = !o.disable_flattening;
    cfg.enable_exclusion = !o.disable_exclusion;
    cfg.non_saturating_generator = o.non_saturating;
    cfg.validate();
    return cfg;
}

ThresholdPolicy threshold_policy(const Options& o) {
    if (o.policy == "fixed") return ThresholdPolicy::fixed(o.theta);
    if (o.policy == "percentile") return ThresholdPolicy::percentile(o.percentile);
    if (o.policy == "sweep") {
        if (o.grid_steps < 1) throw InvalidConfig("sweep policy needs --grid-steps >= 1");
        std::vector<double> grid;
        for (int i = 0; i < o.grid_steps; ++i)
            grid.push_back(o.grid_min + (o.grid_max - o.grid_min) * static_cast<double>(i) /
                                            static_cast<double>(std::max(1, o.grid_steps - 1)));
        return ThresholdPolicy::sweep(std::move(grid));
    }
    throw InvalidConfig("unknown threshold policy '" + o.policy + "' (fixed|percentile|sweep)");
}

json resolved_json(const Options& o, const std::string& command) {
    return json{{"command", command},
                {"dataset", o.dataset},
                {"idx_labels", o.idx_labels},
                {"format", o.format},
                {"no_pad622", o.no_pad622},
                {"known_prefix", o.known_prefix},
                {"known_ids", o.known_ids},
                {"train_frac", o.train_frac},
                {"val_frac", o.val_frac},
                {"arch", o.arch},
                {"clf_hidden", o.clf_hidden},
                {"gen_hidden", o.gen_hidden},
                {"disc_hidden", o.disc_hidden},
                {"latent", o.latent},
                {"img_h", o.img_h},
                {"img_w", o.img_w},
                {"rounds", o.rounds},
                {"batch", o.batch},
                {"lr", o.lr},
                {"beta", o.beta},
                {"gamma", o.gamma},
                {"baseline", o.baseline},
                {"disable_flattening", o.disable_flattening},
                {"disable_exclusion", o.disable_exclusion},
                {"non_saturating", o.non_saturating},
                {"seed", o.seed},
                {"policy", o.policy},
                {"theta", o.theta},
                {"percentile", o.percentile},
                {"count", o.count},
                {"k_total", o.k_total},
                {"dim", o.dim},
                {"sigma", o.sigma},
                {"per_family", o.per_family},
                {"knob", o.knob}};
}

struct DigestedConfig {
    json snapshot;
    std::string digest;
};

DigestedConfig write_resolved_config(const Options& o, const std::string& command,
                                     const fs::path& out_dir) {
    DigestedConfig dc;
    dc.snapshot = resolved_json(o, command);
    dc.digest = digest_of_json(dc.snapshot);
    dc.snapshot["config_digest"] = dc.digest;
    save_json((out_dir / "resolved_config.json").string(), dc.snapshot);
    return dc;
}

// Normalization for eval-side commands: recompute train-only stats from the
// manifest; a provided stats file must agree exactly.
NormStats eval_normalization(Dataset& ds, const OpenSetSplit& split, const Options& o) {
    if (dataset_digest(ds) != split.dataset_digest)
        throw FormatError("dataset does not match the split manifest (digest mismatch)");
    const NormStats stats = compute_norm_stats(ds, split.train);
    if (!o.norm_path.empty()) {
        const NormStats stored = load_norm_stats(o.norm_path);
        if (!(stored == stats))
            throw FormatError("stored normalization stats do not match the train-only recomputation");
    }
    apply_normalization(ds, stats);
    return stats;
}

void check_checkpoint_against(const ModelTriple<float>& model, const Dataset& ds,
                              const OpenSetSplit& split) {
    if (model.config.feature_dim != ds.feature_dim)
        throw InvalidConfig("checkpoint expects feature dimension " +
                            std::to_string(model.config.feature_dim) + ", dataset has " +
                            std::to_string(ds.feature_dim));
    if (model.k != static_cast<int>(split.known_ids.size()))
        throw InvalidConfig("checkpoint expects " + std::to_string(model.k) +
                            " known families, split has " +
                            std::to_string(split.known_ids.size()));
}

// ---- commands ---------------------------------------------------------------

int cmd_train(CLI::App* cmd, Options& o) {
    apply_config_file(cmd, o);
    const fs::path out_dir = resolve_out_dir(o);
    const auto dc = write_resolved_config(o, "train", out_dir);

    Dataset ds = load_dataset(o);
    const auto split = make_split(ds, known_selection(o), o.train_frac, o.val_frac, o.seed);
    const NormStats stats = compute_norm_stats(ds, split.train);
    apply_normalization(ds, stats);

    const auto arch = arch_config(o, ds.feature_dim);
    const auto cfg = train_config(o, arch);
    const auto train_set = to_training_set<float>(ds, split, split.train);
    const auto test_set = to_training_set<float>(ds, split, split.test);

    const auto result = cooperative_train<float>(
        train_set, cfg, &test_set, [&](int round, const ModelTriple<float>& m) {
            char name[48];
            std::snprintf(name, sizeof name, "checkpoint_round_%04d.cnsn", round);
            save_checkpoint((out_dir / name).string(), m, dc.digest);
        });

    save_checkpoint((out_dir / "checkpoint.cnsn").string(), result.model, dc.digest);
    save_split_manifest((out_dir / "split.json").string(), split);
    save_norm_stats((out_dir / "norm_stats.json").string(), stats);
    {
        std::ofstream trace((out_dir / "trace.csv").string());
        if (!trace) throw IoError("cannot write trace.csv");
        write_trace_csv(trace, result.trace, dc.digest);
    }
    const auto& last = result.trace.back();
    std::printf("trained %d rounds on %lld known instances (k=%d): "
                "L_D=%.4f L_G=%.4f L_P=%.4f test_acc=%.4f\n",
                cfg.rounds, static_cast<long long>(train_set.size()), train_set.k, last.loss_d,
                last.loss_g, last.loss_p, last.test_acc);
    std::printf("outputs in %s\n", out_dir.string().c_str());
    return 0;
}

int cmd_eval(CLI::App* cmd, Options& o) {
    apply_config_file(cmd, o);
    if (o.checkpoint.empty()) throw InvalidConfig("eval needs --checkpoint");
    if (o.split_path.empty()) throw InvalidConfig("eval needs --split");
    const fs::path out_dir = resolve_out_dir(o);
    const auto dc = write_resolved_config(o, "eval", out_dir);

    const auto model = load_checkpoint(o.checkpoint);
    Dataset ds = load_dataset(o);
    const auto split = load_split_manifest(o.split_path);
    check_checkpoint_against(model, ds, split);
    eval_normalization(ds, split, o);

    const auto validation = rows_as_tensor<float>(ds, split.validation);
    const auto policy = threshold_policy(o);
    double theta = 0.0;
    if (policy.kind == ThresholdPolicy::Kind::sweep) {
        // pseudo-unknowns for calibration come from the synthesizer
        Rng rng(o.seed ^ 0x5eedf00dULL);
        const auto z = sample_latent<float>(std::max<std::int64_t>(validation.dim(0), 64),
                                            model.config.latent_dim, rng);
        const auto fake = generator_forward(model, z);
        const auto pseudo = max_probabilities(model, fake);
        theta = calibrate_threshold(model, validation, policy, &pseudo);
    } else {
        theta = calibrate_threshold(model, validation, policy);
    }

    const auto known_test = to_training_set<float>(ds, split, split.test);
    const auto known_outcomes = recognize(model, known_test.features, theta);
    std::vector<RecognitionOutcome> unknown_outcomes;
    if (!split.unknown_test.empty()) {
        const auto unknown = rows_as_tensor<float>(ds, split.unknown_test);
        unknown_outcomes = recognize(model, unknown, theta);
    }

    const auto report = build_metrics_report(known_outcomes, known_test.labels, unknown_outcomes,
                                             known_test.k, theta, dc.digest);
    json rj{{"c_acc", report.c_acc},
            {"c_acc_conditional", report.c_acc_conditional},
            {"confusion", report.confusion.cells},
            {"rejected_known_per_family", report.confusion.rejected_per_family},
            {"threshold", report.threshold},
            {"config_digest", report.config_digest},
            {"detection_available", report.detection_available}};
    if (report.detection_available) {
        rj["tpr_known"] = report.rates.tpr_known;
        rj["tnr_unknown"] = report.rates.tnr_unknown;
        rj["d_acc"] = report.rates.d_acc;
        rj["counts"] = json{{"tp_k", report.counts.tp_k},
                            {"fn_k", report.counts.fn_k},
                            {"tn_u", report.counts.tn_u},
                            {"fp_u", report.counts.fp_u}};
    }
    save_json((out_dir / "metrics.json").string(), rj);

    {
        std::ofstream csv((out_dir / "outcomes.csv").string());
        if (!csv) throw IoError("cannot write outcomes.csv");
        csv << "# config_digest=" << dc.digest << "\n";
        csv << "instance_id,decision,family,confidence\n";
        csv << std::setprecision(9);
        auto emit = [&](const std::vector<std::int64_t>& rows,
                        const std::vector<RecognitionOutcome>& outcomes) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto& oc = outcomes[i];
                csv << ds.origins[static_cast<std::size_t>(rows[i])] << ','
                    << (oc.is_unknown ? "unknown" : "known") << ',';
                if (!oc.is_unknown) csv << split.known_ids[static_cast<std::size_t>(oc.family)];
                csv << ',' << oc.confidence << "\n";
            }
        };
        emit(split.test, known_outcomes);
        if (!unknown_outcomes.empty()) emit(split.unknown_test, unknown_outcomes);
    }

    if (report.detection_available)
        std::printf("theta=%.6f C_Acc=%.4f TPR=%.4f TNR=%.4f D_Acc=%.4f\n", theta, report.c_acc,
                    report.rates.tpr_known, report.rates.tnr_unknown, report.rates.d_acc);
    else
        std::printf("theta=%.6f C_Acc=%.4f (no unknown test instances; detection block omitted)\n",
                    theta, report.c_acc);
    std::printf("outputs in %s\n", out_dir.string().c_str());
    return 0;
}

int cmd_sweep(CLI::App* cmd, Options& o) {
    apply_config_file(cmd, o);
    if (o.checkpoint.empty()) throw InvalidConfig("sweep needs --checkpoint");
    if (o.split_path.empty()) throw InvalidConfig("sweep needs --split");
    if (o.grid_steps < 1) throw InvalidConfig("sweep needs --grid-steps >= 1");
    if (!(o.grid_min > 0.0 && o.grid_max < 1.0 && o.grid_min <= o.grid_max))
        throw InvalidConfig("sweep grid must lie inside (0,1)");
    const fs::path out_dir = resolve_out_dir(o);
    const auto dc = write_resolved_config(o, "sweep", out_dir);

    const auto model = load_checkpoint(o.checkpoint);
    Dataset ds = load_dataset(o);
    const auto split = load_split_manifest(o.split_path);
    check_checkpoint_against(model, ds, split);
    eval_normalization(ds, split, o);
    if (split.unknown_test.empty()) throw InvalidInput("sweep needs unknown test instances");

    const auto known_test = to_training_set<float>(ds, split, split.test);
    const auto known_probs = classifier_probabilities(model, known_test.features);
    const auto unknown = rows_as_tensor<float>(ds, split.unknown_test);
    const auto unknown_probs = classifier_probabilities(model, unknown);

    struct Scored {
        double max_prob;
        bool correct;
    };
    std::vector<Scored> known;
    for (std::int64_t i = 0; i < known_probs.dim(0); ++i) {
        const auto row = known_probs.row(i);
        const auto am = argmax(row);
        known.push_back({static_cast<double>(row[am]),
                         static_cast<int>(am) == known_test.labels[static_cast<std::size_t>(i)]});
    }
    std::vector<double> unknown_max;
    for (std::int64_t i = 0; i < unknown_probs.dim(0); ++i) {
        const auto row = unknown_probs.row(i);
        unknown_max.push_back(static_cast<double>(row[argmax(row)]));
    }

    std::ofstream csv((out_dir / "sweep.csv").string());
    if (!csv) throw IoError("cannot write sweep.csv");
    csv << "# config_digest=" << dc.digest << "\n";
    csv << "theta,tpr,tnr,d_acc,c_acc\n";
    csv << std::setprecision(9);
    for (int g = 0; g < o.grid_steps; ++g) {
        const double theta = o.grid_min + (o.grid_max - o.grid_min) * static_cast<double>(g) /
                                              static_cast<double>(std::max(1, o.grid_steps - 1));
        std::int64_t tp = 0, correct = 0, tn = 0;
        for (const auto& s : known) {
            if (!(s.max_prob < theta)) {
                ++tp;
                if (s.correct) ++correct;
            }
        }
        for (double p : unknown_max)
            if (p < theta) ++tn;
        const double tpr = static_cast<double>(tp) / static_cast<double>(known.size());
        const double tnr = static_cast<double>(tn) / static_cast<double>(unknown_max.size());
        const double c_acc = static_cast<double>(correct) / static_cast<double>(known.size());
        csv << theta << ',' << tpr << ',' << tnr << ',' << 0.5 * (tpr + tnr) << ',' << c_acc
            << "\n";
    }
    std::printf("sweep of %d thresholds written to %s\n", o.grid_steps,
                (out_dir / "sweep.csv").string().c_str());
    return 0;
}

int cmd_synth_bench(CLI::App* cmd, Options& o) {
    apply_config_file(cmd, o);
    const fs::path out_dir = resolve_out_dir(o);
    write_resolved_config(o, "synth-bench", out_dir);

    SyntheticBenchmarkSpec spec;
    spec.k_total = o.k_total;
    spec.feature_dim = o.dim;
    spec.sigma = o.sigma;
    spec.instances_per_family = o.per_family;
    spec.spacing_over_sigma = o.knob;
    spec.seed = o.seed;
    const auto ds = generate_synthetic(spec);
    save_feature_table((out_dir / "synthetic.bin").string(), ds, TableFormat::binary);

    const int prefix = o.known_prefix > 0 ? o.known_prefix : o.k_total - 2;
    const auto split = make_split(ds, KnownSelection::prefix(prefix), o.train_frac, o.val_frac,
                                  o.seed);
    save_split_manifest((out_dir / "split.json").string(), split);

    // sanity: nearest-mean oracle on a fresh draw from the same family means
    SyntheticBenchmarkSpec fresh_spec = spec;
    fresh_spec.draw_seed = spec.seed + 0x9e3779b9ULL;
    const double oracle_acc =
        nearest_mean_accuracy(generate_synthetic(fresh_spec), resolve_family_means(spec));
    std::printf("wrote %lld instances (%d families, d=%d) to %s\n",
                static_cast<long long>(ds.size()), o.k_total, o.dim, out_dir.string().c_str());
    std::printf("nearest-mean oracle accuracy on a fresh draw: %.4f\n", oracle_acc);
    return 0;
}

int cmd_export_synth(CLI::App* cmd, Options& o) {
    apply_config_file(cmd, o);
    if (o.checkpoint.empty()) throw InvalidConfig("export-synth needs --checkpoint");
    if (o.count < 0) throw InvalidConfig("--count must be non-negative");
    const fs::path out_dir = resolve_out_dir(o);
    const auto dc = write_resolved_config(o, "export-synth", out_dir);

    const auto model = load_checkpoint(o.checkpoint);

    std::ofstream csv((out_dir / "synthesized.csv").string());
    if (!csv) throw IoError("cannot write synthesized.csv");
    csv << "# config_digest=" << dc.digest << "\n";
    csv << "source";
    for (std::int64_t j = 0; j < model.config.feature_dim; ++j) csv << ",f" << j;
    csv << "\n";
    csv << std::setprecision(9);

    if (o.count > 0) {
        Rng rng(o.seed ^ 0xa5a5c7e1ULL);
        const auto z = sample_latent<float>(o.count, model.config.latent_dim, rng);
        const auto fake = generator_forward(model, z);
        for (std::int64_t i = 0; i < fake.dim(0); ++i) {
            csv << "synthesized";
            for (float v : fake.row(i)) csv << ',' << v;
            csv << "\n";
        }
        // an equal-size sample of known training rows for comparison
        if (!o.dataset.empty() && !o.split_path.empty()) {
            Dataset ds = load_dataset(o);
            const auto split = load_split_manifest(o.split_path);
            eval_normalization(ds, split, o);
            auto rows = split.train;
            Rng pick(o.seed + 1);
            pick.shuffle(rows.begin(), rows.end());
            rows.resize(std::min<std::size_t>(rows.size(), static_cast<std::size_t>(o.count)));
            for (auto r : rows) {
                csv << "known";
                for (float v : ds.row(r)) csv << ',' << v;
                csv << "\n";
            }
        }
    }
    std::printf("wrote %d synthesized rows to %s\n", o.count,
                (out_dir / "synthesized.csv").string().c_str());
    return 0;
}

void add_common_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_path, "JSON config file (flags override its values)");
    cmd->add_option("--seed", o.seed, "run seed");
    cmd->add_option("--out", o.out, "output directory (default $CNSNET_OUT or ./out)");
    cmd->add_option("--dataset", o.dataset, "dataset path");
    cmd->add_option("--format", o.format, "dataset format: text|binary|idx");
    cmd->add_option("--idx-labels", o.idx_labels, "IDX label file (format=idx)");
    cmd->add_flag("--no-pad622", o.no_pad622, "do not zero-pad 622-wide features to 625");
}

void add_split_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--known-prefix", o.known_prefix, "first N family ids are known");
    cmd->add_option("--known-ids", o.known_ids, "explicit known family ids, comma separated");
    cmd->add_option("--train-frac", o.train_frac, "train fraction of known instances");
    cmd->add_option("--val-frac", o.val_frac, "validation fraction of known instances");
}

void add_policy_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--policy", o.policy, "threshold policy: fixed|percentile|sweep");
    cmd->add_option("--theta", o.theta, "fixed threshold value");
    cmd->add_option("--percentile", o.percentile, "percentile q for the percentile policy");
    cmd->add_option("--grid-min", o.grid_min, "sweep grid start");
    cmd->add_option("--grid-max", o.grid_max, "sweep grid end");
    cmd->add_option("--grid-steps", o.grid_steps, "sweep grid size");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"open-set malware family recognition with a conservative novelty synthesizer"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    Options o;

    auto* train = app.add_subcommand("train", "train the model triple on known families");
    add_common_flags(train, o);
    add_split_flags(train, o);
    train->add_option("--arch", o.arch, "architecture variant: dense|conv");
    train->add_option("--clf-hidden", o.clf_hidden, "classifier hidden widths, comma separated");
    train->add_option("--gen-hidden", o.gen_hidden, "generator hidden widths");
    train->add_option("--disc-hidden", o.disc_hidden, "discriminator hidden widths");
    train->add_option("--latent", o.latent, "latent dimension");
    train->add_option("--img-h", o.img_h, "image height (conv variant)");
    train->add_option("--img-w", o.img_w, "image width (conv variant)");
    train->add_option("--rounds", o.rounds, "training rounds");
    train->add_option("--batch", o.batch, "mini-batch size");
    train->add_option("--lr", o.lr, "learning rate");
    train->add_option("--beta", o.beta, "flattening regularizer weight");
    train->add_option("--gamma", o.gamma, "exclusion regularizer weight");
    train->add_flag("--baseline", o.baseline,
                    "plain softmax classifier: disables the synthesizer and both regularizers");
    train->add_flag("--disable-flattening", o.disable_flattening, "ablation: drop the KL term");
    train->add_flag("--disable-exclusion", o.disable_exclusion, "ablation: drop the g-hot term");
    train->add_flag("--non-saturating", o.non_saturating,
                    "use -log D(G(z)) instead of the saturating generator term");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    add_common_flags(eval, o);
    add_policy_flags(eval, o);
    eval->add_option("--checkpoint", o.checkpoint, "checkpoint file");
    eval->add_option("--split", o.split_path, "split manifest file");
    eval->add_option("--norm", o.norm_path, "stored normalization stats to verify against");

    auto* sweep = app.add_subcommand("sweep", "threshold sweep over a grid");
    add_common_flags(sweep, o);
    sweep->add_option("--checkpoint", o.checkpoint, "checkpoint file");
    sweep->add_option("--split", o.split_path, "split manifest file");
    sweep->add_option("--norm", o.norm_path, "stored normalization stats to verify against");
    sweep->add_option("--grid-min", o.grid_min, "grid start");
    sweep->add_option("--grid-max", o.grid_max, "grid end");
    sweep->add_option("--grid-steps", o.grid_steps, "grid size");

    auto* bench = app.add_subcommand("synth-bench", "generate the Gaussian-family benchmark");
    add_common_flags(bench, o);
    add_split_flags(bench, o);
    bench->add_option("--k-total", o.k_total, "total family count");
    bench->add_option("--dim", o.dim, "feature dimension");
    bench->add_option("--sigma", o.sigma, "isotropic family spread");
    bench->add_option("--per-family", o.per_family, "instances per family");
    bench->add_option("--knob", o.knob, "overlap knob: mean spacing / sigma");

    auto* exprt = app.add_subcommand("export-synth", "export synthesized instances as CSV");
    add_common_flags(exprt, o);
    exprt->add_option("--checkpoint", o.checkpoint, "checkpoint file");
    exprt->add_option("--split", o.split_path, "split manifest (for the known sample)");
    exprt->add_option("--norm", o.norm_path, "stored normalization stats to verify against");
    exprt->add_option("--count", o.count, "number of latents to draw");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) return cmd_train(train, o);
        if (eval->parsed()) return cmd_eval(eval, o);
        if (sweep->parsed()) return cmd_sweep(sweep, o);
        if (bench->parsed()) return cmd_synth_bench(bench, o);
        if (exprt->parsed()) return cmd_export_synth(exprt, o);
        std::fprintf(stderr, "error: no command given\n");
        return 1;
    } catch (const InvalidConfig& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ContractViolation& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        // data-layer family: parse/format/io/split/invalid-input/undefined-metric
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
