#pragma once

#include "dualref/data_model.hpp"
#include "dualref/types.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace dualref::io {

/// Feature file: "DRFT", u32 rows, u32 cols (little-endian), then rows*cols
/// float32 little-endian values in row-major order.
void write_features(const std::filesystem::path& path, const Matrix& m);

/// Reads a feature file. When `expected_cols` is given, a file with another
/// width fails with DimensionMismatch; trailing bytes fail the same way.
Matrix read_features(const std::filesystem::path& path, std::optional<int> expected_cols = std::nullopt);

struct LabelTable {
    std::vector<int> identity;
    std::vector<int> camera;

    std::size_t size() const { return identity.size(); }
};

/// CSV with header `index,identity,camera` (column order free). Rows are
/// placed at their index, so indices must cover 0..n-1 exactly once.
LabelTable read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& identity, const std::vector<int>& camera);

/// Writes `<dir>/<name>.drft` and `<dir>/<name>.csv`.
void write_dataset(const std::filesystem::path& dir, const std::string& name, const Dataset& d);
Dataset read_dataset(const std::filesystem::path& dir, const std::string& name, Role role);

}  // namespace dualref::io
