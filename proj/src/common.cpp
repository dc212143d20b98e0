#include "dualref/errors.hpp"
#include "dualref/parallel.hpp"
#include "dualref/random.hpp"
#include "dualref/types.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <limits>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>
#include <vector>

namespace dualref {

Matrix l2_normalized_rows(const Matrix& m) {
    Matrix out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double n = out.row(i).norm();
        if (n > 0.0) {
            out.row(i) /= n;
        }
    }
    return out;
}

bool rows_unit_norm(const Matrix& m, double tol) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (std::abs(m.row(i).norm() - 1.0) > tol) {
            return false;
        }
    }
    return true;
}

const char* to_string(IoErrorKind kind) {
    switch (kind) {
        case IoErrorKind::Open: return "Open";
        case IoErrorKind::BadMagic: return "BadMagic";
        case IoErrorKind::Truncated: return "Truncated";
        case IoErrorKind::DimensionMismatch: return "DimensionMismatch";
        case IoErrorKind::SchemaError: return "SchemaError";
        case IoErrorKind::ParseError: return "ParseError";
        case IoErrorKind::DuplicateIndex: return "DuplicateIndex";
        case IoErrorKind::MissingIndex: return "MissingIndex";
    }
    return "Unknown";
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("Rng::below: n must be positive");
    }
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return x % n;
}

std::string Rng::state() const {
    std::ostringstream os;
    os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    os.precision(17);
    os << std::hexfloat << spare_;
    return os.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream is(state);
    int spare_flag = 0;
    std::string spare_text;
    is >> engine_ >> spare_flag >> spare_text;
    if (!is && !is.eof()) {
        throw Error("malformed generator state");
    }
    has_spare_ = spare_flag != 0;
    spare_ = std::strtod(spare_text.c_str(), nullptr);
}

std::uint64_t Rng::splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {
std::atomic<int> g_max_threads{1};
}

void set_max_threads(int threads) { g_max_threads = std::max(1, threads); }

int max_threads() { return g_max_threads; }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    const auto workers = static_cast<std::size_t>(std::min<int>(max_threads(), static_cast<int>(std::max<std::size_t>(n, 1))));
    if (workers <= 1 || n < 64) {
        body(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) {
            break;
        }
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
}

}  // namespace dualref
