#include "dualref/io.hpp"

#include "dualref/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace dualref::io {

namespace {

constexpr std::array<char, 4> kMagic = {'D', 'R', 'F', 'T'};

void put_u32(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                   static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b.data(), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) {
            field.pop_back();
        }
        while (!field.empty() && field.front() == ' ') {
            field.erase(field.begin());
        }
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

int parse_int(const std::string& s, std::size_t line_no) {
    int v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) {
        throw IoError(IoErrorKind::ParseError, "line " + std::to_string(line_no) + ": '" + s + "' is not an integer");
    }
    return v;
}

}  // namespace

void write_features(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError(IoErrorKind::Open, "cannot write " + path.string());
    }
    os.write(kMagic.data(), 4);
    put_u32(os, static_cast<std::uint32_t>(m.rows()));
    put_u32(os, static_cast<std::uint32_t>(m.cols()));
    std::vector<char> buf(static_cast<std::size_t>(m.size()) * 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i]));
        for (int b = 0; b < 4; ++b) {
            buf[static_cast<std::size_t>(i) * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
        }
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) {
        throw IoError(IoErrorKind::Open, "write failed for " + path.string());
    }
}

Matrix read_features(const std::filesystem::path& path, std::optional<int> expected_cols) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError(IoErrorKind::Open, "cannot read " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
        throw IoError(IoErrorKind::BadMagic, path.string());
    }
    if (bytes.size() < 12) {
        throw IoError(IoErrorKind::Truncated, path.string() + ": header incomplete");
    }
    const std::uint32_t rows = get_u32(bytes.data() + 4);
    const std::uint32_t cols = get_u32(bytes.data() + 8);
    const std::uint64_t payload = static_cast<std::uint64_t>(rows) * cols * 4;
    if (bytes.size() - 12 < payload) {
        throw IoError(IoErrorKind::Truncated, path.string() + ": expected " + std::to_string(payload) +
                                                  " payload bytes, found " + std::to_string(bytes.size() - 12));
    }
    if (bytes.size() - 12 > payload) {
        throw IoError(IoErrorKind::DimensionMismatch, path.string() + ": trailing bytes after payload");
    }
    if (expected_cols && static_cast<int>(cols) != *expected_cols) {
        throw IoError(IoErrorKind::DimensionMismatch, path.string() + ": expected " + std::to_string(*expected_cols) +
                                                          " columns, found " + std::to_string(cols));
    }
    Matrix m(rows, cols);
    const unsigned char* p = bytes.data() + 12;
    for (Eigen::Index i = 0; i < m.size(); ++i, p += 4) {
        m.data()[i] = static_cast<double>(std::bit_cast<float>(get_u32(p)));
    }
    return m;
}

LabelTable read_labels(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError(IoErrorKind::Open, "cannot read " + path.string());
    }
    std::string line;
    if (!std::getline(is, line)) {
        throw IoError(IoErrorKind::SchemaError, path.string() + ": missing header");
    }
    const auto header = split_csv(line);
    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw IoError(IoErrorKind::SchemaError, path.string() + ": missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_index = column("index");
    const std::size_t c_identity = column("identity");
    const std::size_t c_camera = column("camera");

    std::map<int, std::pair<int, int>> rows;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != header.size()) {
            throw IoError(IoErrorKind::SchemaError, "line " + std::to_string(line_no) + ": wrong field count");
        }
        const int index = parse_int(fields[c_index], line_no);
        const int identity = parse_int(fields[c_identity], line_no);
        const int camera = parse_int(fields[c_camera], line_no);
        if (!rows.emplace(index, std::make_pair(identity, camera)).second) {
            throw IoError(IoErrorKind::DuplicateIndex, "index " + std::to_string(index));
        }
    }
    LabelTable table;
    int expected = 0;
    for (const auto& [index, value] : rows) {
        if (index != expected) {
            throw IoError(IoErrorKind::MissingIndex, "index " + std::to_string(expected) + " absent");
        }
        table.identity.push_back(value.first);
        table.camera.push_back(value.second);
        ++expected;
    }
    return table;
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& identity, const std::vector<int>& camera) {
    std::ofstream os(path);
    if (!os) {
        throw IoError(IoErrorKind::Open, "cannot write " + path.string());
    }
    os << "index,identity,camera\n";
    for (std::size_t i = 0; i < identity.size(); ++i) {
        os << i << ',' << identity[i] << ',' << camera.at(i) << '\n';
    }
}

void write_dataset(const std::filesystem::path& dir, const std::string& name, const Dataset& d) {
    write_features(dir / (name + ".drft"), d.raw);
    write_labels(dir / (name + ".csv"), d.identity, d.camera);
}

Dataset read_dataset(const std::filesystem::path& dir, const std::string& name, Role role) {
    Dataset d;
    d.role = role;
    d.raw = read_features(dir / (name + ".drft"));
    auto labels = read_labels(dir / (name + ".csv"));
    if (labels.size() != d.size()) {
        throw IoError(IoErrorKind::DimensionMismatch, name + ": " + std::to_string(labels.size()) + " label rows for " +
                                                          std::to_string(d.size()) + " feature rows");
    }
    d.identity = std::move(labels.identity);
    d.camera = std::move(labels.camera);
    return d;
}

}  // namespace dualref::io
