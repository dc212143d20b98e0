#include "dualref/cli.hpp"

#include "dualref/checkpoint.hpp"
#include "dualref/config.hpp"
#include "dualref/errors.hpp"
#include "dualref/io.hpp"
#include "dualref/parallel.hpp"
#include "dualref/trainer.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>

namespace dualref::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSplits[] = {"source", "target_train", "query", "gallery"};

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string out;
};

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) {
        throw IoError(IoErrorKind::Open, "cannot write " + path.string());
    }
    os << j.dump(2) << '\n';
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config, std::uint64_t seed,
                    const json& artifacts) {
    fs::create_directories(dir);
    json m;
    m["command"] = command;
    m["config"] = config;
    m["seed"] = seed;
    m["artifacts"] = artifacts;
    m["version"] = kVersion;
    m["started_at"] = utc_now();
    write_json(dir / "manifest.json", m);
}

TrainConfig resolve_config(const Globals& g) {
    TrainConfig cfg = g.config.empty() ? TrainConfig{} : load_config(g.config);
    if (g.seed) {
        cfg.seed = *g.seed;
    }
    cfg.validate();
    return cfg;
}

Dataset load_split(const fs::path& dir, const std::string& name, Role role) {
    return io::read_dataset(dir, name, role);
}

bool has_labels(const fs::path& dir, const std::string& name) { return fs::exists(dir / (name + ".csv")); }

Matrix load_target_raw(const fs::path& dir, std::vector<int>* truth) {
    if (has_labels(dir, "target_train")) {
        auto d = load_split(dir, "target_train", Role::TargetTrain);
        *truth = d.identity;
        return d.raw;
    }
    return io::read_features(dir / "target_train.drft");
}

json retrieval_json(const eval::RetrievalResult& r, std::size_t nq, std::size_t ng) {
    return json{{"mAP", r.mAP}, {"R1", r.rank(1)}, {"R5", r.rank(5)}, {"R10", r.rank(10)},
                {"num_query", nq}, {"num_gallery", ng}};
}

std::optional<json> maybe_eval(const nn::EncoderState& enc, const fs::path& data) {
    if (!has_labels(data, "query") || !has_labels(data, "gallery")) {
        return std::nullopt;
    }
    const auto q = load_split(data, "query", Role::TargetQuery);
    const auto g = load_split(data, "gallery", Role::TargetGallery);
    return retrieval_json(train::evaluate_retrieval(enc, q, g), q.size(), g.size());
}

void print_epoch(std::ostream& err, const train::EpochMetrics& m) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%5d %5d %8zu %8.4f %8.4f %8.4f %8.4f %8.4f\n", m.epoch, m.num_clusters,
                  m.num_outliers, m.fscore_refined.value_or(-1.0), m.cls, m.tri, m.spread, m.total);
    err << buf;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dual-refinement domain adaptation on feature vectors", "dualref"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "training config JSON");
    app.add_option("--seed", g.seed, "random seed (overrides the config)");
    app.add_option("--threads", g.threads, "worker threads for compute kernels")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "output directory");
    app.set_version_flag("--version", std::string(kVersion));
    app.fallthrough();

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
    SynthSpec spec;
    gen->add_option("--ids", spec.num_identities);
    gen->add_option("--per-id", spec.samples_per_identity);
    gen->add_option("--cameras", spec.num_cameras);
    gen->add_option("--d-in", spec.d_in);
    gen->add_option("--rank", spec.identity_rank);
    gen->add_option("--spread", spec.identity_spread);
    gen->add_option("--noise", spec.intra_noise);
    gen->add_option("--cam-shift", spec.camera_shift_scale);
    gen->add_option("--domain-shift", spec.domain_shift);

    std::string data, ckpt, dump_jaccard, dump_labels, dump_bank;
    std::string resume_dir;

    auto* pre = app.add_subcommand("pretrain", "train the encoder on the labeled source split");
    pre->add_option("--data", data, "dataset directory")->required();

    auto* ad = app.add_subcommand("adapt", "alternating off-line / on-line adaptation");
    ad->add_option("--data", data, "dataset directory")->required();
    ad->add_option("--ckpt", ckpt, "pretrained encoder prefix (pretrains first when omitted)");
    ad->add_option("--resume", resume_dir, "continue the run stored in this directory");
    ad->add_option("--dump-jaccard", dump_jaccard, "write the last Jaccard matrix here");
    ad->add_option("--dump-labels", dump_labels, "write per-epoch pseudo labels into this directory");
    ad->add_option("--dump-bank", dump_bank, "write the final memory bank here");

    auto* cl = app.add_subcommand("cluster", "one off-line stage from a checkpoint");
    cl->add_option("--data", data, "dataset directory")->required();
    cl->add_option("--ckpt", ckpt, "encoder prefix")->required();
    cl->add_option("--dump-jaccard", dump_jaccard, "write the Jaccard matrix here");

    auto* ev = app.add_subcommand("eval", "retrieval metrics from a checkpoint");
    ev->add_option("--data", data, "dataset directory")->required();
    ev->add_option("--ckpt", ckpt, "encoder prefix")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        set_max_threads(g.threads);

        if (gen->parsed()) {
            if (g.out.empty()) {
                err << "usage error: gen-data requires --out\n";
                return kExitUsage;
            }
            spec.seed = resolve_config(g).seed;
            const auto synth = generate_synthetic(spec);
            const fs::path dir = g.out;
            fs::create_directories(dir);
            const Dataset* parts[] = {&synth.source, &synth.target_train, &synth.target_query, &synth.target_gallery};
            json sizes;
            for (int s = 0; s < 4; ++s) {
                io::write_dataset(dir, kSplits[s], *parts[s]);
                sizes[kSplits[s]] = parts[s]->size();
            }
            json spec_json{{"ids", spec.num_identities},       {"per_id", spec.samples_per_identity},
                           {"cameras", spec.num_cameras},      {"d_in", spec.d_in},
                           {"rank", spec.identity_rank},       {"spread", spec.identity_spread},
                           {"noise", spec.intra_noise},        {"cam_shift", spec.camera_shift_scale},
                           {"domain_shift", spec.domain_shift}};
            write_manifest(dir, "gen-data", spec_json, spec.seed, sizes);
            out << json{{"out", dir.string()}, {"splits", sizes}}.dump() << '\n';
            return 0;
        }

        const bool resume = !resume_dir.empty();
        if (resume) {
            g.out = resume_dir;
        }
        if (g.out.empty() && (pre->parsed() || ad->parsed())) {
            err << "usage error: " << (pre->parsed() ? "pretrain" : "adapt") << " requires --out\n";
            return kExitUsage;
        }
        const TrainConfig cfg = resolve_config(g);
        Rng rng(cfg.seed);
        const fs::path data_dir = data;

        if (pre->parsed()) {
            const fs::path run_dir = g.out;
            write_manifest(run_dir, "pretrain", to_json(cfg), cfg.seed, {{"encoder", "pretrained"}});
            const auto source = load_split(data_dir, "source", Role::Source);
            train::PretrainReport report;
            const auto enc = train::pretrain_source(source, cfg, rng, &report);
            ckpt::save_encoder(run_dir / "pretrained", enc);
            std::string csv = "epoch,loss\n";
            for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", e, report.epoch_loss[e]);
                csv += buf;
            }
            std::ofstream(run_dir / "pretrain_metrics.csv") << csv;
            json j{{"ckpt", (run_dir / "pretrained").string()},
                   {"train_accuracy", report.train_accuracy},
                   {"final_loss", report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back()}};
            if (auto r = maybe_eval(enc, data_dir)) {
                j["retrieval"] = *r;
            }
            err << "pretrain: " << report.epoch_loss.size() << " epochs, train accuracy " << report.train_accuracy
                << '\n';
            out << j.dump() << '\n';
            return 0;
        }

        if (ad->parsed()) {
            const fs::path run_dir = g.out;
            json artifacts{{"final", "final"}, {"bank", "final_bank"}, {"metrics", "metrics.csv"},
                           {"iterations", "iterations.csv"}};
            if (!resume || !fs::exists(run_dir / "manifest.json")) {
                write_manifest(run_dir, "adapt", to_json(cfg), cfg.seed, artifacts);
            }
            nn::EncoderState pretrained;
            if (!ckpt.empty()) {
                pretrained = ckpt::load_encoder(ckpt).state;
            } else if (resume && fs::exists(run_dir / "pretrained.json")) {
                pretrained = ckpt::load_encoder(run_dir / "pretrained").state;
            } else {
                const auto source = load_split(data_dir, "source", Role::Source);
                pretrained = train::pretrain_source(source, cfg, rng);
                ckpt::save_encoder(run_dir / "pretrained", pretrained);
            }
            std::vector<int> truth;
            const Matrix target = load_target_raw(data_dir, &truth);
            train::AdaptOptions opts;
            opts.truth = truth;
            opts.run_dir = run_dir;
            opts.resume = resume;
            if (!dump_labels.empty()) {
                opts.dump_labels_dir = dump_labels;
            }
            if (!dump_jaccard.empty()) {
                opts.dump_jaccard = dump_jaccard;
            }
            if (!dump_bank.empty()) {
                opts.dump_bank = dump_bank;
            }
            err << "epoch     L outliers  F(ref)      cls      tri   spread    total\n";
            opts.on_epoch = [&err](const train::EpochMetrics& m, const nn::EncoderState&, const bank::MemoryBank&) {
                print_epoch(err, m);
            };
            const auto res = train::adapt(pretrained, target, cfg, rng, opts);
            json j{{"ckpt", (run_dir / "final").string()}, {"epochs", res.epochs.size()}};
            if (!res.epochs.empty()) {
                const auto& last = res.epochs.back();
                j["num_clusters"] = last.num_clusters;
                j["num_outliers"] = last.num_outliers;
                j["total"] = last.total;
                if (last.fscore_refined) {
                    j["fscore_refined"] = *last.fscore_refined;
                }
            }
            if (auto r = maybe_eval(res.encoder, data_dir)) {
                j["retrieval"] = *r;
            }
            out << j.dump() << '\n';
            return 0;
        }

        const auto enc = ckpt::load_encoder(ckpt).state;

        if (cl->parsed()) {
            std::vector<int> truth;
            const Matrix target = load_target_raw(data_dir, &truth);
            const auto st = train::offline_epoch(enc, target, cfg, rng, 0, truth);
            json j{{"num_clusters", st.labels.num_clusters},
                   {"num_outliers", st.num_outliers},
                   {"eps", st.eps},
                   {"changed_fraction", st.labels.changed_fraction()},
                   {"N", st.labels.size()}};
            if (st.coarse_fscore) {
                const auto& c = *st.coarse_fscore;
                const auto& r = *st.refined_fscore;
                j["fscore"] = r.fscore;
                j["precision"] = r.precision;
                j["recall"] = r.recall;
                j["coarse"] = {{"fscore", c.fscore}, {"precision", c.precision}, {"recall", c.recall}};
                err << "coarse  F " << c.fscore << "  P " << c.precision << "  R " << c.recall << '\n'
                    << "refined F " << r.fscore << "  P " << r.precision << "  R " << r.recall << '\n';
            }
            if (!dump_jaccard.empty()) {
                io::write_features(dump_jaccard, st.jaccard);
            }
            if (!g.out.empty()) {
                const fs::path dir = g.out;
                write_manifest(dir, "cluster", to_json(cfg), cfg.seed, {{"labels", "labels.csv"}});
                std::ofstream os(dir / "labels.csv");
                os << "index,coarse,refined\n";
                for (std::size_t i = 0; i < st.labels.size(); ++i) {
                    os << i << ',' << st.labels.coarse[i] << ',' << st.labels.refined[i] << '\n';
                }
                j["labels"] = (dir / "labels.csv").string();
            }
            err << st.labels.num_clusters << " clusters, " << st.num_outliers << " outliers\n";
            out << j.dump() << '\n';
            return 0;
        }

        // eval
        const auto q = load_split(data_dir, "query", Role::TargetQuery);
        const auto gal = load_split(data_dir, "gallery", Role::TargetGallery);
        const auto r = train::evaluate_retrieval(enc, q, gal);
        err << "mAP " << r.mAP << "  R1 " << r.rank(1) << "  R5 " << r.rank(5) << "  R10 " << r.rank(10) << '\n';
        json j = retrieval_json(r, q.size(), gal.size());
        // Clustering quality of the same encoder on target_train, when its identities are known.
        j["precision"] = nullptr;
        j["recall"] = nullptr;
        j["fscore"] = nullptr;
        j["N"] = nullptr;
        j["N_outlier"] = nullptr;
        if (has_labels(data_dir, "target_train")) {
            std::vector<int> truth;
            const Matrix target = load_target_raw(data_dir, &truth);
            const auto st = train::offline_epoch(enc, target, cfg, rng, 0, truth);
            const auto& f = *st.refined_fscore;
            j["precision"] = f.precision;
            j["recall"] = f.recall;
            j["fscore"] = f.fscore;
            j["N"] = f.num_samples;
            j["N_outlier"] = f.num_outliers;
            err << "F " << f.fscore << "  P " << f.precision << "  R " << f.recall << '\n';
        }
        out << j.dump() << '\n';
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const NumericalError& e) {
        err << "diverged: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace dualref::cli
