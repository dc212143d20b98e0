#include "dualref/trainer.hpp"

#include "dualref/checkpoint.hpp"
#include "dualref/errors.hpp"
#include "dualref/io.hpp"
#include "dualref/metric_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

namespace dualref::train {

using nlohmann::json;

namespace {

Matrix gather_rows(const Matrix& m, std::span<const int> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
    }
    return out;
}

std::vector<int> remap_identities(const std::vector<int>& identity, int* num_classes) {
    std::map<int, int> ids;
    std::vector<int> out;
    out.reserve(identity.size());
    for (int id : identity) {
        const auto it = ids.emplace(id, static_cast<int>(ids.size())).first;
        out.push_back(it->second);
    }
    if (num_classes != nullptr) {
        *num_classes = static_cast<int>(ids.size());
    }
    return out;
}

// Gradient of f / ||f|| pulled back to f, row by row.
Matrix normalize_backward(const Matrix& features, const Matrix& grad_normalized) {
    Matrix out = Matrix::Zero(features.rows(), features.cols());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const double n = features.row(i).norm();
        if (n <= 0.0) {
            continue;
        }
        const RowVector u = features.row(i) / n;
        out.row(i) = (grad_normalized.row(i) - u * u.dot(grad_normalized.row(i))) / n;
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) {
        throw IoError(IoErrorKind::Open, "cannot write " + path.string());
    }
    os << text;
}

std::string epoch_tag(int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "epoch_%03d", epoch);
    return buf;
}

json to_json(const EpochMetrics& m) {
    json j;
    j["epoch"] = m.epoch;
    j["num_clusters"] = m.num_clusters;
    j["num_outliers"] = m.num_outliers;
    j["eps"] = m.eps;
    j["fscore_coarse"] = m.fscore_coarse ? json(*m.fscore_coarse) : json(nullptr);
    j["fscore_refined"] = m.fscore_refined ? json(*m.fscore_refined) : json(nullptr);
    j["changed_fraction"] = m.changed_fraction;
    j["iterations"] = m.iterations;
    j["batch_p"] = m.batch_p;
    j["cls"] = m.cls;
    j["tri"] = m.tri;
    j["spread"] = m.spread;
    j["total"] = m.total;
    return j;
}

EpochMetrics epoch_from_json(const json& j) {
    EpochMetrics m;
    m.epoch = j.at("epoch");
    m.num_clusters = j.at("num_clusters");
    m.num_outliers = j.at("num_outliers");
    m.eps = j.at("eps");
    if (!j.at("fscore_coarse").is_null()) {
        m.fscore_coarse = j.at("fscore_coarse").get<double>();
    }
    if (!j.at("fscore_refined").is_null()) {
        m.fscore_refined = j.at("fscore_refined").get<double>();
    }
    m.changed_fraction = j.at("changed_fraction");
    m.iterations = j.at("iterations");
    m.batch_p = j.at("batch_p");
    m.cls = j.at("cls");
    m.tri = j.at("tri");
    m.spread = j.at("spread");
    m.total = j.at("total");
    return m;
}

}  // namespace

Matrix extract_features(const nn::EncoderState& encoder, const Matrix& raw) { return nn::forward(encoder, raw); }

double classification_accuracy(const nn::EncoderState& encoder, const Dataset& data) {
    const auto labels = remap_identities(data.identity, nullptr);
    const Matrix logits = nn::classifier_logits(encoder, extract_features(encoder, data.raw));
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        logits.row(i).maxCoeff(&best);
        correct += static_cast<int>(best) == labels[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

std::vector<int> pk_sample(std::span<const int> labels, int num_clusters, int p, int k, Rng& rng) {
    if (p < 1 || k < 1) {
        throw std::invalid_argument("pk_sample: P and K must be >= 1");
    }
    std::vector<std::vector<int>> members(static_cast<std::size_t>(std::max(num_clusters, 0)));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y == kOutlier) {
            continue;
        }
        if (y < 0 || y >= num_clusters) {
            throw std::invalid_argument("pk_sample: label out of range");
        }
        members[static_cast<std::size_t>(y)].push_back(static_cast<int>(i));
    }
    std::vector<int> eligible;
    for (std::size_t l = 0; l < members.size(); ++l) {
        if (!members[l].empty()) {
            eligible.push_back(static_cast<int>(l));
        }
    }
    if (static_cast<int>(eligible.size()) < p) {
        throw std::invalid_argument("pk_sample: only " + std::to_string(eligible.size()) + " clusters for P = " +
                                    std::to_string(p));
    }
    std::vector<int> batch;
    batch.reserve(static_cast<std::size_t>(p * k));
    for (int c = 0; c < p; ++c) {
        const auto pick = c + static_cast<std::size_t>(rng.below(eligible.size() - static_cast<std::size_t>(c)));
        std::swap(eligible[static_cast<std::size_t>(c)], eligible[pick]);
        std::vector<int> pool = members[static_cast<std::size_t>(eligible[static_cast<std::size_t>(c)])];
        if (static_cast<int>(pool.size()) >= k) {
            for (int s = 0; s < k; ++s) {
                const auto j = s + static_cast<std::size_t>(rng.below(pool.size() - static_cast<std::size_t>(s)));
                std::swap(pool[static_cast<std::size_t>(s)], pool[j]);
                batch.push_back(pool[static_cast<std::size_t>(s)]);
            }
        } else {
            for (int s = 0; s < k; ++s) {
                batch.push_back(pool[static_cast<std::size_t>(rng.below(pool.size()))]);
            }
        }
    }
    return batch;
}

JointResult joint_objective(const nn::EncoderState& encoder, const bank::MemoryBank& bank, const Matrix& batch_raw,
                            std::span<const int> batch_indices, std::span<const int> coarse,
                            std::span<const int> refined, const TrainConfig& cfg) {
    const Eigen::Index b = batch_raw.rows();
    if (static_cast<std::size_t>(b) != coarse.size() || coarse.size() != refined.size() ||
        coarse.size() != batch_indices.size()) {
        throw std::invalid_argument("joint_objective: batch metadata length mismatch");
    }
    JointResult out;
    nn::ForwardCache cache;
    out.features = nn::forward(encoder, batch_raw, &cache);
    out.grads = encoder.params.zeros_like();
    Matrix grad_f = Matrix::Zero(b, out.features.cols());
    auto& rep = out.report;

    std::vector<int> sup;
    for (Eigen::Index i = 0; i < b; ++i) {
        if (coarse[static_cast<std::size_t>(i)] != kOutlier) {
            sup.push_back(static_cast<int>(i));
        }
    }
    if (!sup.empty()) {
        const Matrix fs = gather_rows(out.features, sup);
        std::vector<int> yc, yr;
        for (int i : sup) {
            yc.push_back(coarse[static_cast<std::size_t>(i)]);
            yr.push_back(refined[static_cast<std::size_t>(i)]);
        }
        const Matrix probs = nn::classifier_forward(encoder, fs);
        const auto ce_n = loss::cross_entropy(probs, yc);
        const auto ce_r = loss::cross_entropy(probs, yr);
        const auto tri_n = loss::batch_hard_triplet_relaxed(fs, yc, cfg.triplet_margin);
        const auto tri_r = loss::batch_hard_triplet_relaxed(fs, yr, cfg.triplet_margin);
        const double a = cfg.alpha;
        rep.cls_noisy = ce_n.loss;
        rep.cls_refined = ce_r.loss;
        rep.tri_noisy = tri_n.loss;
        rep.tri_refined = tri_r.loss;
        const Matrix grad_logits = (1.0 - a) * ce_n.grad_logits + a * ce_r.grad_logits;
        Matrix gfs = nn::classifier_backward(encoder, fs, grad_logits, out.grads);
        gfs += (1.0 - a) * tri_n.grad_features + a * tri_r.grad_features;
        for (std::size_t r = 0; r < sup.size(); ++r) {
            grad_f.row(sup[r]) += gfs.row(static_cast<Eigen::Index>(r));
        }
    }
    const auto blended = loss::blend_metric_losses({rep.cls_noisy, rep.tri_noisy}, {rep.cls_refined, rep.tri_refined},
                                                   cfg.alpha);
    rep.cls = blended.cls;
    rep.tri = blended.tri;

    if (bank.size() > 0) {
        const Matrix fn = l2_normalized_rows(out.features);
        const auto positives = bank::positive_sets(bank, fn, batch_indices);
        auto sp = bank::spread_loss(fn, bank, positives, cfg.spread_margin);
        rep.spread = sp.loss;
        if (cfg.mu != 0.0) {
            grad_f += cfg.mu * normalize_backward(out.features, sp.grad_features);
        }
        out.grad_bank = std::move(sp.grad_bank);
    }
    rep.total = loss::total_loss(blended, rep.spread, cfg.mu);
    rep.grad_features = grad_f;

    auto back = nn::backward(encoder, cache, grad_f);
    out.grads.w1 = std::move(back.grads.w1);
    out.grads.b1 = std::move(back.grads.b1);
    out.grads.w2 = std::move(back.grads.w2);
    out.grads.b2 = std::move(back.grads.b2);
    return out;
}

loss::LossReport online_iteration(nn::EncoderState& encoder, bank::MemoryBank& bank, const Matrix& target_raw,
                                  std::span<const int> batch, const EpochState& epoch_state, const TrainConfig& cfg,
                                  double lr) {
    std::vector<int> coarse, refined;
    for (int i : batch) {
        coarse.push_back(epoch_state.labels.coarse.at(static_cast<std::size_t>(i)));
        refined.push_back(epoch_state.labels.refined.at(static_cast<std::size_t>(i)));
    }
    auto jr = joint_objective(encoder, bank, gather_rows(target_raw, batch), batch, coarse, refined, cfg);
    if (!std::isfinite(jr.report.total)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch_state.epoch));
    }
    nn::adam_step(encoder, jr.grads, lr, cfg.adam());
    if (bank.size() > 0) {
        if (bank.mode == bank::BankMode::Instant) {
            if (lr != 0.0) {
                bank::instant_update(bank, jr.grad_bank, lr);
            }
        } else {
            bank::momentum_update(bank, l2_normalized_rows(jr.features), batch);
        }
    }
    return std::move(jr.report);
}

nn::EncoderState pretrain_source(const Dataset& source, const TrainConfig& cfg, Rng& rng, PretrainReport* report) {
    cfg.validate();
    source.validate();
    int classes = 0;
    const auto labels = remap_identities(source.identity, &classes);
    auto encoder = nn::make_encoder(source.d_in(), cfg.hidden(), cfg.feature_dim, classes, cfg.act(), rng);
    const auto schedule = cfg.pretrain_schedule();
    const int batch = cfg.batch_size();
    const int iters = cfg.pretrain_iters_per_epoch > 0
                          ? cfg.pretrain_iters_per_epoch
                          : static_cast<int>((source.size() + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch));
    const int p = std::min(cfg.batch_p, classes);
    const bank::MemoryBank no_bank;
    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        const double lr = nn::lr_at(schedule, epoch);
        double sum = 0.0;
        for (int it = 0; it < iters; ++it) {
            const auto idx = pk_sample(labels, classes, p, cfg.batch_k, rng);
            std::vector<int> y;
            for (int i : idx) {
                y.push_back(labels[static_cast<std::size_t>(i)]);
            }
            auto jr = joint_objective(encoder, no_bank, gather_rows(source.raw, idx), idx, y, y, cfg);
            if (!std::isfinite(jr.report.total)) {
                throw NumericalError("non-finite loss during source pretraining");
            }
            nn::adam_step(encoder, jr.grads, lr, cfg.adam());
            sum += jr.report.total;
        }
        if (report != nullptr) {
            report->epoch_loss.push_back(iters > 0 ? sum / iters : 0.0);
        }
    }
    if (report != nullptr) {
        report->train_accuracy = classification_accuracy(encoder, source);
    }
    return encoder;
}

EpochState offline_epoch(const nn::EncoderState& encoder, const Matrix& target_raw, const TrainConfig& cfg, Rng& rng,
                         int epoch, std::span<const int> truth) {
    const Eigen::Index n = target_raw.rows();
    if (n < 2) {
        throw std::invalid_argument("offline_epoch: need at least two target samples");
    }
    const Matrix features = extract_features(encoder, target_raw);
    const Matrix normalized = l2_normalized_rows(features);
    const int k_rr = std::min<int>(cfg.k_rr, static_cast<int>(n) - 1);
    auto g = graph::build_distance_graph(normalized, k_rr, cfg.reciprocal_expansion);

    EpochState st;
    st.epoch = epoch;
    st.eps = std::max(cluster::offdiagonal_percentile(g.jaccard, cfg.eps_percentile), 1e-9);
    const auto coarse = cluster::dbscan(g.jaccard, st.eps, cfg.min_pts);
    if (coarse.num_clusters == 0) {
        throw NumericalError("epoch " + std::to_string(epoch) + ": DBSCAN marked every sample as an outlier (eps = " +
                             std::to_string(st.eps) + ")");
    }
    st.prototypes = refine::select_prototypes(features, coarse, cfg.fine_clusters, rng.fork(), cfg.kmeans_max_iter);
    st.labels = refine::assign_refined_labels(refine::refined_similarity(normalized, st.prototypes), coarse);
    st.num_outliers = st.labels.num_outliers();
    if (!truth.empty()) {
        st.coarse_fscore = eval::pairwise_fscore(st.labels.coarse, truth);
        st.refined_fscore = eval::pairwise_fscore(st.labels.refined, truth);
    }
    st.jaccard = std::move(g.jaccard);
    return st;
}

std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
    std::string s = "epoch,L,outliers,eps,fscore_coarse,fscore_refined,changed_fraction,iterations,batch_p,cls,tri,spread,total\n";
    for (const auto& m : rows) {
        s += std::to_string(m.epoch) + ',' + std::to_string(m.num_clusters) + ',' + std::to_string(m.num_outliers) +
             ',' + fmt(m.eps) + ',' + (m.fscore_coarse ? fmt(*m.fscore_coarse) : "") + ',' +
             (m.fscore_refined ? fmt(*m.fscore_refined) : "") + ',' + fmt(m.changed_fraction) + ',' +
             std::to_string(m.iterations) + ',' + std::to_string(m.batch_p) + ',' + fmt(m.cls) + ',' + fmt(m.tri) +
             ',' + fmt(m.spread) + ',' + fmt(m.total) + '\n';
    }
    return s;
}

std::string iterations_csv(const std::vector<IterationRecord>& rows) {
    std::string s = "epoch,iter,cls,tri,spread,total\n";
    for (const auto& r : rows) {
        s += std::to_string(r.epoch) + ',' + std::to_string(r.iter) + ',' + fmt(r.cls) + ',' + fmt(r.tri) + ',' +
             fmt(r.spread) + ',' + fmt(r.total) + '\n';
    }
    return s;
}

AdaptResult adapt(const nn::EncoderState& pretrained, const Matrix& target_raw, const TrainConfig& cfg, Rng& rng,
                  const AdaptOptions& options) {
    cfg.validate();
    if (!options.truth.empty() && options.truth.size() != static_cast<std::size_t>(target_raw.rows())) {
        throw std::invalid_argument("adapt: diagnostic identities do not match target size");
    }
    AdaptResult res;
    res.encoder = pretrained;
    int start_epoch = 0;
    const auto& dir = options.run_dir;
    if (dir) {
        std::filesystem::create_directories(*dir);
    }

    if (options.resume && dir && std::filesystem::exists(*dir / "progress.json")) {
        std::ifstream is(*dir / "progress.json");
        const json progress = json::parse(is);
        const int last = progress.at("last_epoch");
        const auto tag = epoch_tag(last);
        res.encoder = ckpt::load_encoder(*dir / tag).state;
        res.bank = ckpt::load_bank(*dir / (tag + "_bank"));
        rng.restore(progress.at("rng_state").get<std::string>());
        for (const auto& e : progress.at("epochs")) {
            res.epochs.push_back(epoch_from_json(e));
        }
        for (const auto& r : progress.at("iterations")) {
            res.iterations.push_back(IterationRecord{r.at(0), r.at(1), r.at(2), r.at(3), r.at(4), r.at(5)});
        }
        start_epoch = last + 1;
    } else {
        res.bank = bank::init_bank(extract_features(res.encoder, target_raw), cfg.bank(), cfg.bank_momentum, cfg.k_pos);
    }

    const auto schedule = cfg.adaptation_schedule();
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const EpochState st = offline_epoch(res.encoder, target_raw, cfg, rng, epoch, options.truth);
        const int clusters = st.labels.num_clusters;
        EpochMetrics m;
        m.epoch = epoch;
        m.num_clusters = clusters;
        m.num_outliers = st.num_outliers;
        m.eps = st.eps;
        if (st.coarse_fscore) {
            m.fscore_coarse = st.coarse_fscore->fscore;
            m.fscore_refined = st.refined_fscore->fscore;
        }
        m.changed_fraction = st.labels.changed_fraction();
        m.batch_p = std::min(cfg.batch_p, clusters);
        if (m.batch_p < cfg.batch_p) {
            std::cerr << "warning: epoch " << epoch << " found " << clusters << " clusters; using P = " << m.batch_p
                      << '\n';
        }
        nn::reinit_classifier(res.encoder, clusters, rng, cfg.classifier_init_std);

        const std::size_t labeled = st.labels.size() - st.num_outliers;
        const auto batch_size = static_cast<std::size_t>(cfg.batch_size());
        m.iterations = cfg.iters_per_epoch > 0 ? cfg.iters_per_epoch
                                               : static_cast<int>((labeled + batch_size - 1) / batch_size);
        const double lr = nn::lr_at(schedule, epoch);
        for (int it = 0; it < m.iterations; ++it) {
            const auto batch = pk_sample(st.labels.coarse, clusters, m.batch_p, cfg.batch_k, rng);
            const auto rep = online_iteration(res.encoder, res.bank, target_raw, batch, st, cfg, lr);
            res.iterations.push_back(IterationRecord{epoch, it, rep.cls, rep.tri, rep.spread, rep.total});
            m.cls += rep.cls;
            m.tri += rep.tri;
            m.spread += rep.spread;
            m.total += rep.total;
            if (options.on_bank_update) {
                options.on_bank_update(res.bank);
            }
        }
        if (m.iterations > 0) {
            m.cls /= m.iterations;
            m.tri /= m.iterations;
            m.spread /= m.iterations;
            m.total /= m.iterations;
        }
        res.epochs.push_back(m);

        if (options.dump_labels_dir) {
            std::filesystem::create_directories(*options.dump_labels_dir);
            std::string csv = "index,coarse,refined\n";
            for (std::size_t i = 0; i < st.labels.size(); ++i) {
                csv += std::to_string(i) + ',' + std::to_string(st.labels.coarse[i]) + ',' +
                       std::to_string(st.labels.refined[i]) + '\n';
            }
            write_text(*options.dump_labels_dir / (epoch_tag(epoch) + "_labels.csv"), csv);
        }
        if (options.dump_jaccard) {
            io::write_features(*options.dump_jaccard, st.jaccard);
        }
        if (dir) {
            const auto tag = epoch_tag(epoch);
            ckpt::save_encoder(*dir / tag, res.encoder, json{{"epoch", epoch}});
            ckpt::save_bank(*dir / (tag + "_bank"), res.bank);
            write_text(*dir / "metrics.csv", metrics_csv(res.epochs));
            write_text(*dir / "iterations.csv", iterations_csv(res.iterations));
            json progress;
            progress["last_epoch"] = epoch;
            progress["rng_state"] = rng.state();
            progress["epochs"] = json::array();
            for (const auto& e : res.epochs) {
                progress["epochs"].push_back(to_json(e));
            }
            progress["iterations"] = json::array();
            for (const auto& r : res.iterations) {
                progress["iterations"].push_back(json::array({r.epoch, r.iter, r.cls, r.tri, r.spread, r.total}));
            }
            write_text(*dir / "progress.json", progress.dump() + "\n");
        }
        if (options.on_epoch) {
            options.on_epoch(m, res.encoder, res.bank);
        }
    }
    if (dir) {
        ckpt::save_encoder(*dir / "final", res.encoder, json{{"epoch", cfg.epochs - 1}});
        ckpt::save_bank(*dir / "final_bank", res.bank);
        write_text(*dir / "metrics.csv", metrics_csv(res.epochs));
        write_text(*dir / "iterations.csv", iterations_csv(res.iterations));
    }
    if (options.dump_bank) {
        io::write_features(*options.dump_bank, res.bank.entries);
    }
    return res;
}

eval::RetrievalResult evaluate_retrieval(const nn::EncoderState& encoder, const Dataset& query, const Dataset& gallery) {
    const Matrix qf = l2_normalized_rows(extract_features(encoder, query.raw));
    const Matrix gf = l2_normalized_rows(extract_features(encoder, gallery.raw));
    return eval::retrieval_eval({qf, query.identity, query.camera}, {gf, gallery.identity, gallery.camera});
}

}  // namespace dualref::train
