#include "dualref/data_model.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>
#include <stdexcept>

namespace dualref {

const char* to_string(Role role) {
    switch (role) {
        case Role::Source: return "source";
        case Role::TargetTrain: return "target_train";
        case Role::TargetQuery: return "query";
        case Role::TargetGallery: return "gallery";
    }
    return "unknown";
}

Sample Dataset::sample(std::size_t i) const {
    return Sample{static_cast<int>(i), identity.at(i), camera.at(i), raw.row(static_cast<Eigen::Index>(i)).transpose()};
}

void Dataset::validate() const {
    if (raw.rows() == 0 || raw.cols() == 0) {
        throw std::invalid_argument("dataset is empty");
    }
    if (identity.size() != size() || camera.size() != size()) {
        throw std::invalid_argument("dataset metadata length does not match sample count");
    }
    for (int c : camera) {
        if (c < 0) {
            throw std::invalid_argument("negative camera id");
        }
    }
}

void SynthSpec::validate() const {
    if (num_identities < 1 || samples_per_identity < 1 || num_cameras < 1 || d_in < 1 || identity_rank < 1) {
        throw std::invalid_argument("synthetic spec counts must be >= 1");
    }
    if (identity_rank > d_in) {
        throw std::invalid_argument("identity_rank exceeds d_in");
    }
    if (identity_spread < 0 || intra_noise < 0 || camera_shift_scale < 0 || domain_shift < 0) {
        throw std::invalid_argument("synthetic spec magnitudes must be >= 0");
    }
    if (num_cameras < 2) {
        throw std::invalid_argument("num_cameras must be >= 2 so every query has a cross-camera match");
    }
    if (samples_per_identity < 2) {
        throw std::invalid_argument("samples_per_identity must be >= 2 to split query and gallery");
    }
}

Matrix random_rotation(int dim, double magnitude, Rng& rng) {
    Matrix a(dim, dim);
    const double scale = magnitude / std::sqrt(static_cast<double>(dim));
    for (int i = 0; i < dim; ++i) {
        a(i, i) = 0.0;
        for (int j = i + 1; j < dim; ++j) {
            const double x = scale * rng.normal();
            a(i, j) = x;
            a(j, i) = -x;
        }
    }
    const Matrix id = Matrix::Identity(dim, dim);
    return (id - a).partialPivLu().solve(id + a);
}

namespace {

struct DomainModel {
    Matrix basis;          // d_in x rank, orthonormal columns
    Matrix camera_offset;  // cameras x d_in
};

DomainModel make_domain(const SynthSpec& spec, Rng& rng) {
    Matrix g(spec.d_in, spec.identity_rank);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        g.data()[i] = rng.normal();
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    DomainModel model;
    model.basis = qr.householderQ() * Matrix::Identity(spec.d_in, spec.identity_rank);
    model.camera_offset.resize(spec.num_cameras, spec.d_in);
    for (Eigen::Index i = 0; i < model.camera_offset.size(); ++i) {
        model.camera_offset.data()[i] = spec.camera_shift_scale * rng.normal();
    }
    return model;
}

Matrix draw_centers(const SynthSpec& spec, const DomainModel& model, int count, Rng& rng) {
    Matrix z(count, spec.identity_rank);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z.data()[i] = spec.identity_spread * rng.normal();
    }
    return z * model.basis.transpose();
}

// Camera of the s-th sample of an identity: round robin from a random start.
Matrix draw_samples(const SynthSpec& spec, const DomainModel& model, const Matrix& centers, int first_id,
                    std::vector<int>& ids, std::vector<int>& cams, Rng& rng) {
    const int per = spec.samples_per_identity;
    Matrix raw(centers.rows() * per, spec.d_in);
    Eigen::Index row = 0;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        for (int s = 0; s < per; ++s, ++row) {
            const int cam = s % spec.num_cameras;
            for (int k = 0; k < spec.d_in; ++k) {
                raw(row, k) = centers(c, k) + model.camera_offset(cam, k) + spec.intra_noise * rng.normal();
            }
            ids.push_back(first_id + static_cast<int>(c));
            cams.push_back(cam);
        }
    }
    return raw;
}

void round_to_float(Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
    }
}

}  // namespace

SynthData generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int ids = spec.num_identities;

    SynthData out;

    DomainModel src = make_domain(spec, rng);
    Matrix src_centers = draw_centers(spec, src, ids, rng);
    out.source.role = Role::Source;
    out.source.raw = draw_samples(spec, src, src_centers, 0, out.source.identity, out.source.camera, rng);

    // The target shares the identity subspace but has its own cameras and
    // centers, then goes through the domain transform.
    DomainModel tgt = src;
    for (Eigen::Index i = 0; i < tgt.camera_offset.size(); ++i) {
        tgt.camera_offset.data()[i] = spec.camera_shift_scale * rng.normal();
    }
    Matrix tgt_centers = draw_centers(spec, tgt, 2 * ids, rng);
    const Matrix rotation = random_rotation(spec.d_in, spec.domain_shift, rng);
    RowVector offset(spec.d_in);
    for (int k = 0; k < spec.d_in; ++k) {
        offset(k) = spec.domain_shift * rng.normal() / std::sqrt(static_cast<double>(spec.d_in));
    }

    std::vector<int> train_ids, train_cams, test_ids, test_cams;
    Matrix train = draw_samples(spec, tgt, tgt_centers.topRows(ids), ids, train_ids, train_cams, rng);
    Matrix test = draw_samples(spec, tgt, tgt_centers.bottomRows(ids), 2 * ids, test_ids, test_cams, rng);
    train = (train * rotation.transpose()).rowwise() + offset;
    test = (test * rotation.transpose()).rowwise() + offset;

    out.target_train.role = Role::TargetTrain;
    out.target_train.raw = std::move(train);
    out.target_train.identity = std::move(train_ids);
    out.target_train.camera = std::move(train_cams);

    // Sample 0 (camera 0) of each test identity is a query; with four or more
    // samples, sample 1 (camera 1) is a second query. Sample s >= 2 covers
    // cameras other than the queries' own, so cross-camera matches exist.
    const int per = spec.samples_per_identity;
    const int queries_per_id = per >= 4 ? 2 : 1;
    std::vector<Eigen::Index> q_rows, g_rows;
    for (int c = 0; c < ids; ++c) {
        for (int s = 0; s < per; ++s) {
            (s < queries_per_id ? q_rows : g_rows).push_back(static_cast<Eigen::Index>(c) * per + s);
        }
    }
    auto take = [&](const std::vector<Eigen::Index>& rows, Role role) {
        Dataset d;
        d.role = role;
        d.raw.resize(static_cast<Eigen::Index>(rows.size()), spec.d_in);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            d.raw.row(static_cast<Eigen::Index>(r)) = test.row(rows[r]);
            d.identity.push_back(test_ids[static_cast<std::size_t>(rows[r])]);
            d.camera.push_back(test_cams[static_cast<std::size_t>(rows[r])]);
        }
        return d;
    };
    out.target_query = take(q_rows, Role::TargetQuery);
    out.target_gallery = take(g_rows, Role::TargetGallery);

    round_to_float(out.source.raw);
    round_to_float(out.target_train.raw);
    round_to_float(out.target_query.raw);
    round_to_float(out.target_gallery.raw);
    return out;
}

}  // namespace dualref
