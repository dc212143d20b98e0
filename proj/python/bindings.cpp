#include "dualref/checkpoint.hpp"
#include "dualref/cli.hpp"
#include "dualref/clustering.hpp"
#include "dualref/config.hpp"
#include "dualref/data_model.hpp"
#include "dualref/errors.hpp"
#include "dualref/evaluation.hpp"
#include "dualref/metric_graph.hpp"
#include "dualref/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace dualref;

namespace {

TrainConfig parse_config(const std::string& json_text) {
    return config_from_json(json_text.empty() ? nlohmann::json::object() : nlohmann::json::parse(json_text));
}

py::dict dataset_dict(const Dataset& d) {
    py::dict out;
    out["raw"] = d.raw;
    out["identity"] = d.identity;
    out["camera"] = d.camera;
    return out;
}

Dataset make_dataset(Role role, const Matrix& raw, const std::vector<int>& identity, const std::vector<int>& camera) {
    Dataset d;
    d.role = role;
    d.raw = raw;
    d.identity = identity;
    d.camera = camera;
    d.validate();
    return d;
}

py::dict retrieval_dict(const eval::RetrievalResult& r) {
    py::dict out;
    out["mAP"] = r.mAP;
    out["cmc"] = r.cmc;
    out["average_precision"] = r.average_precision;
    return out;
}

py::dict fscore_dict(const eval::FScore& f) {
    py::dict out;
    out["precision"] = f.precision;
    out["recall"] = f.recall;
    out["fscore"] = f.fscore;
    out["tp"] = f.counts.tp;
    out["fp"] = f.counts.fp;
    out["fn"] = f.counts.fn;
    out["N"] = f.num_samples;
    out["N_outlier"] = f.num_outliers;
    return out;
}

}  // namespace

PYBIND11_MODULE(_dualref, m) {
    m.doc() = "Native core of the dualref package";

    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("default_config", [] { return to_json(TrainConfig{}).dump(); });
    m.def("validate_config", [](const std::string& text) { return to_json(parse_config(text)).dump(); });

    m.def(
        "generate_synthetic",
        [](int ids, int per_id, int cameras, int d_in, int rank, double spread, double noise, double cam_shift,
           double domain_shift, std::uint64_t seed) {
            SynthSpec s;
            s.num_identities = ids;
            s.samples_per_identity = per_id;
            s.num_cameras = cameras;
            s.d_in = d_in;
            s.identity_rank = rank;
            s.identity_spread = spread;
            s.intra_noise = noise;
            s.camera_shift_scale = cam_shift;
            s.domain_shift = domain_shift;
            s.seed = seed;
            const auto d = generate_synthetic(s);
            py::dict out;
            out["source"] = dataset_dict(d.source);
            out["target_train"] = dataset_dict(d.target_train);
            out["query"] = dataset_dict(d.target_query);
            out["gallery"] = dataset_dict(d.target_gallery);
            return out;
        },
        py::arg("ids"), py::arg("per_id"), py::arg("cameras"), py::arg("d_in"), py::arg("rank"), py::arg("spread"),
        py::arg("noise"), py::arg("cam_shift"), py::arg("domain_shift"), py::arg("seed"));

    m.def(
        "jaccard_distance",
        [](const Matrix& features, int k_rr, bool expand) { return graph::build_distance_graph(features, k_rr, expand).jaccard; },
        py::arg("features"), py::arg("k_rr"), py::arg("expand") = false);

    m.def(
        "dbscan", [](const Matrix& dist, double eps, int min_pts) { return cluster::dbscan(dist, eps, min_pts).assignment; },
        py::arg("dist"), py::arg("eps"), py::arg("min_pts"));

    m.def(
        "kmeans",
        [](const Matrix& points, int r, std::uint64_t seed, int max_iter) {
            const auto k = cluster::kmeans(points, r, seed, max_iter);
            py::dict out;
            out["centers"] = k.centers;
            out["assignment"] = k.assignment;
            out["inertia"] = k.inertia;
            out["inertia_history"] = k.inertia_history;
            out["iterations"] = k.iterations;
            return out;
        },
        py::arg("points"), py::arg("r"), py::arg("seed"), py::arg("max_iter") = 100);

    m.def(
        "pairwise_fscore",
        [](const std::vector<int>& pseudo, const std::vector<int>& truth) { return fscore_dict(eval::pairwise_fscore(pseudo, truth)); },
        py::arg("pseudo"), py::arg("truth"));

    m.def(
        "retrieval_eval",
        [](const Matrix& qf, const std::vector<int>& qid, const std::vector<int>& qcam, const Matrix& gf,
           const std::vector<int>& gid, const std::vector<int>& gcam) {
            return retrieval_dict(eval::retrieval_eval({qf, qid, qcam}, {gf, gid, gcam}));
        },
        py::arg("query_features"), py::arg("query_ids"), py::arg("query_cams"), py::arg("gallery_features"),
        py::arg("gallery_ids"), py::arg("gallery_cams"));

    py::class_<nn::EncoderState>(m, "Encoder")
        .def_property_readonly("d_in", &nn::EncoderState::d_in)
        .def_property_readonly("d_out", &nn::EncoderState::d_out)
        .def_property_readonly("hidden", &nn::EncoderState::hidden)
        .def_property_readonly("num_classes", &nn::EncoderState::num_classes)
        .def_property_readonly("step", [](const nn::EncoderState& s) { return s.step; })
        .def("parameters", [](const nn::EncoderState& s) { return Vector(s.params.flatten()); })
        .def("extract", [](const nn::EncoderState& s, const Matrix& raw) { return train::extract_features(s, raw); },
             py::arg("raw"))
        .def("save", [](const nn::EncoderState& s, const std::string& prefix) { ckpt::save_encoder(prefix, s); },
             py::arg("prefix"))
        .def_static("load", [](const std::string& prefix) { return ckpt::load_encoder(prefix).state; },
                    py::arg("prefix"));

    m.def(
        "pretrain",
        [](const Matrix& raw, const std::vector<int>& identity, const std::vector<int>& camera, const std::string& config) {
            const TrainConfig cfg = parse_config(config);
            Rng rng(cfg.seed);
            train::PretrainReport report;
            auto enc = train::pretrain_source(make_dataset(Role::Source, raw, identity, camera), cfg, rng, &report);
            py::dict info;
            info["epoch_loss"] = report.epoch_loss;
            info["train_accuracy"] = report.train_accuracy;
            return py::make_tuple(std::move(enc), info);
        },
        py::arg("raw"), py::arg("identity"), py::arg("camera"), py::arg("config") = "");

    m.def(
        "cluster",
        [](const nn::EncoderState& enc, const Matrix& target_raw, const std::string& config, std::vector<int> truth) {
            const TrainConfig cfg = parse_config(config);
            Rng rng(cfg.seed);
            const auto st = train::offline_epoch(enc, target_raw, cfg, rng, 0, truth);
            py::dict out;
            out["coarse"] = st.labels.coarse;
            out["refined"] = st.labels.refined;
            out["num_clusters"] = st.labels.num_clusters;
            out["num_outliers"] = st.num_outliers;
            out["eps"] = st.eps;
            if (st.coarse_fscore) {
                out["fscore_coarse"] = fscore_dict(*st.coarse_fscore);
                out["fscore_refined"] = fscore_dict(*st.refined_fscore);
            }
            return out;
        },
        py::arg("encoder"), py::arg("target_raw"), py::arg("config") = "", py::arg("truth") = std::vector<int>{});

    m.def(
        "adapt",
        [](const nn::EncoderState& pretrained, const Matrix& target_raw, const std::string& config,
           std::vector<int> truth, const std::string& run_dir) {
            const TrainConfig cfg = parse_config(config);
            Rng rng(cfg.seed);
            train::AdaptOptions opts;
            opts.truth = truth;
            if (!run_dir.empty()) {
                opts.run_dir = run_dir;
            }
            train::AdaptResult res;
            {
                py::gil_scoped_release release;
                res = train::adapt(pretrained, target_raw, cfg, rng, opts);
            }
            py::list epochs;
            for (const auto& e : res.epochs) {
                py::dict d;
                d["epoch"] = e.epoch;
                d["num_clusters"] = e.num_clusters;
                d["num_outliers"] = e.num_outliers;
                d["eps"] = e.eps;
                d["fscore_coarse"] = e.fscore_coarse ? py::cast(*e.fscore_coarse) : py::none();
                d["fscore_refined"] = e.fscore_refined ? py::cast(*e.fscore_refined) : py::none();
                d["changed_fraction"] = e.changed_fraction;
                d["iterations"] = e.iterations;
                d["cls"] = e.cls;
                d["tri"] = e.tri;
                d["spread"] = e.spread;
                d["total"] = e.total;
                epochs.append(d);
            }
            return py::make_tuple(std::move(res.encoder), Matrix(res.bank.entries), epochs);
        },
        py::arg("pretrained"), py::arg("target_raw"), py::arg("config") = "", py::arg("truth") = std::vector<int>{},
        py::arg("run_dir") = "");

    m.def(
        "evaluate_retrieval",
        [](const nn::EncoderState& enc, const Matrix& q, const std::vector<int>& qid, const std::vector<int>& qcam,
           const Matrix& g, const std::vector<int>& gid, const std::vector<int>& gcam) {
            return retrieval_dict(train::evaluate_retrieval(enc, make_dataset(Role::TargetQuery, q, qid, qcam),
                                                            make_dataset(Role::TargetGallery, g, gid, gcam)));
        },
        py::arg("encoder"), py::arg("query_raw"), py::arg("query_ids"), py::arg("query_cams"), py::arg("gallery_raw"),
        py::arg("gallery_ids"), py::arg("gallery_cams"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));

    m.attr("__version__") = cli::kVersion;
}
