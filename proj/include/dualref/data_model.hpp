#pragma once

#include "dualref/random.hpp"
#include "dualref/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dualref {

enum class Role { Source, TargetTrain, TargetQuery, TargetGallery };

const char* to_string(Role role);

struct Sample {
    int index = 0;
    int identity = 0;
    int camera = 0;
    Vector raw;
};

/// Samples stored column-wise: row i of `raw` together with identity[i] and camera[i].
struct Dataset {
    Role role = Role::Source;
    Matrix raw;
    std::vector<int> identity;
    std::vector<int> camera;

    std::size_t size() const { return static_cast<std::size_t>(raw.rows()); }
    int d_in() const { return static_cast<int>(raw.cols()); }
    Sample sample(std::size_t i) const;

    /// Throws std::invalid_argument when the dataset is empty or columns disagree.
    void validate() const;
};

/// Knobs of the synthetic identity generator.
///
/// Identity centers live in a random `identity_rank`-dimensional subspace of the
/// input space, scaled by `identity_spread`. Each sample adds isotropic noise and
/// a per-camera offset. The target domain additionally goes through a random
/// rotation-plus-offset whose magnitude is `domain_shift`.
struct SynthSpec {
    int num_identities = 64;
    int samples_per_identity = 20;
    int num_cameras = 4;
    int d_in = 32;
    int identity_rank = 8;
    double identity_spread = 1.0;
    double intra_noise = 0.35;
    double camera_shift_scale = 0.25;
    double domain_shift = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthData {
    Dataset source;
    Dataset target_train;
    Dataset target_query;
    Dataset target_gallery;
};

/// Pure function of `spec`. Source, target-train and target-test identities are
/// disjoint. Every query has at least one gallery sample of the same identity on
/// another camera. Raw values are rounded to float32 so they survive the
/// on-disk format unchanged.
SynthData generate_synthetic(const SynthSpec& spec);

/// Orthogonal matrix (I - A)^-1 (I + A) for a random skew-symmetric A of scale `magnitude`.
Matrix random_rotation(int dim, double magnitude, Rng& rng);

}  // namespace dualref
