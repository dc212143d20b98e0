#include "dualref/checkpoint.hpp"

#include "dualref/errors.hpp"
#include "dualref/io.hpp"

#include <fstream>

namespace dualref::ckpt {

using nlohmann::json;

namespace {

std::filesystem::path with_ext(const std::filesystem::path& prefix, const char* ext) {
    return std::filesystem::path(prefix.string() + ext);
}

json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError(IoErrorKind::Open, "cannot read " + path.string());
    }
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw IoError(IoErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) {
        throw IoError(IoErrorKind::Open, "cannot write " + path.string());
    }
    os << j.dump(2) << '\n';
}

}  // namespace

void save_encoder(const std::filesystem::path& prefix, const nn::EncoderState& state, const json& extra) {
    const Vector p = state.params.flatten();
    Matrix rows(3, p.size());
    rows.row(0) = p.transpose();
    rows.row(1) = state.m.flatten().transpose();
    rows.row(2) = state.v.flatten().transpose();
    io::write_features(with_ext(prefix, ".drft"), rows);
    json meta;
    meta["format"] = "dualref-encoder";
    meta["activation"] = nn::to_string(state.activation);
    meta["d_in"] = state.d_in();
    meta["hidden"] = state.hidden();
    meta["d_out"] = state.d_out();
    meta["num_classes"] = state.num_classes();
    meta["step"] = state.step;
    meta["classifier_step"] = state.classifier_step;
    meta["extra"] = extra;
    write_json(with_ext(prefix, ".json"), meta);
}

LoadedEncoder load_encoder(const std::filesystem::path& prefix) {
    const json meta = read_json(with_ext(prefix, ".json"));
    LoadedEncoder out;
    try {
        if (meta.at("format") != "dualref-encoder") {
            throw IoError(IoErrorKind::SchemaError, prefix.string() + ": not an encoder checkpoint");
        }
        auto& s = out.state;
        s.activation = nn::activation_from_string(meta.at("activation").get<std::string>());
        const int d_in = meta.at("d_in");
        const int hidden = meta.at("hidden");
        const int d_out = meta.at("d_out");
        const int classes = meta.at("num_classes");
        s.params.w1 = Matrix::Zero(hidden, d_in);
        s.params.b1 = Vector::Zero(hidden);
        s.params.w2 = Matrix::Zero(d_out, hidden);
        s.params.b2 = Vector::Zero(d_out);
        s.params.wc = Matrix::Zero(classes, d_out);
        s.params.bc = Vector::Zero(classes);
        s.m = s.params.zeros_like();
        s.v = s.params.zeros_like();
        s.step = meta.at("step");
        s.classifier_step = meta.at("classifier_step");
        out.extra = meta.value("extra", json::object());
    } catch (const json::exception& e) {
        throw IoError(IoErrorKind::SchemaError, prefix.string() + ": " + e.what());
    }
    const Matrix rows = io::read_features(with_ext(prefix, ".drft"));
    const auto n = static_cast<Eigen::Index>(out.state.params.size());
    if (rows.rows() != 3 || rows.cols() != n) {
        throw IoError(IoErrorKind::DimensionMismatch, prefix.string() + ": parameter block does not match shapes");
    }
    out.state.params.unflatten(rows.row(0).transpose());
    out.state.m.unflatten(rows.row(1).transpose());
    out.state.v.unflatten(rows.row(2).transpose());
    return out;
}

void save_bank(const std::filesystem::path& prefix, const bank::MemoryBank& b) {
    io::write_features(with_ext(prefix, ".drft"), b.entries);
    json meta;
    meta["format"] = "dualref-bank";
    meta["mode"] = bank::to_string(b.mode);
    meta["momentum"] = b.momentum;
    meta["k_pos"] = b.k_pos;
    write_json(with_ext(prefix, ".json"), meta);
}

bank::MemoryBank load_bank(const std::filesystem::path& prefix) {
    const json meta = read_json(with_ext(prefix, ".json"));
    bank::MemoryBank b;
    try {
        b.mode = bank::bank_mode_from_string(meta.at("mode").get<std::string>());
        b.momentum = meta.at("momentum");
        b.k_pos = meta.at("k_pos");
    } catch (const json::exception& e) {
        throw IoError(IoErrorKind::SchemaError, prefix.string() + ": " + e.what());
    }
    // float32 storage: renormalize so the unit-norm invariant holds in 64-bit.
    b.entries = l2_normalized_rows(io::read_features(with_ext(prefix, ".drft")));
    return b;
}

}  // namespace dualref::ckpt
