#include "dualref/evaluation.hpp"

#include "dualref/parallel.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace dualref::eval {

namespace {
std::uint64_t pairs(std::uint64_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }
}  // namespace

FScore pairwise_fscore(std::span<const int> pseudo, std::span<const int> truth) {
    if (pseudo.size() != truth.size()) {
        throw std::invalid_argument("pairwise_fscore: label length mismatch");
    }
    std::map<int, std::uint64_t> by_pseudo;
    std::map<int, std::uint64_t> by_truth;
    std::map<std::pair<int, int>, std::uint64_t> joint;
    FScore out;
    out.num_samples = pseudo.size();
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
        if (pseudo[i] == kOutlier) {
            ++out.num_outliers;
            continue;
        }
        ++by_pseudo[pseudo[i]];
        ++by_truth[truth[i]];
        ++joint[{pseudo[i], truth[i]}];
    }
    std::uint64_t same_pseudo = 0;
    std::uint64_t same_truth = 0;
    for (const auto& [k, n] : by_pseudo) {
        same_pseudo += pairs(n);
    }
    for (const auto& [k, n] : by_truth) {
        same_truth += pairs(n);
    }
    for (const auto& [k, n] : joint) {
        out.counts.tp += pairs(n);
    }
    out.counts.fp = same_pseudo - out.counts.tp;
    out.counts.fn = same_truth - out.counts.tp;
    const auto tp = static_cast<double>(out.counts.tp);
    out.precision = same_pseudo == 0 ? 0.0 : tp / static_cast<double>(same_pseudo);
    out.recall = same_truth == 0 ? 0.0 : tp / static_cast<double>(same_truth);
    const double denom = out.precision + out.recall;
    out.fscore = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
    return out;
}

double RetrievalResult::rank(int r) const {
    if (cmc.empty()) {
        return 0.0;
    }
    const auto idx = static_cast<std::size_t>(std::clamp(r, 1, static_cast<int>(cmc.size())) - 1);
    return cmc[idx];
}

double average_precision(std::span<const char> relevant) {
    double hits = 0.0;
    double sum = 0.0;
    for (std::size_t r = 0; r < relevant.size(); ++r) {
        if (relevant[r]) {
            hits += 1.0;
            sum += hits / static_cast<double>(r + 1);
        }
    }
    return hits > 0.0 ? sum / hits : 0.0;
}

RetrievalResult retrieval_eval(const LabeledFeatures& query, const LabeledFeatures& gallery) {
    const Eigen::Index nq = query.features.rows();
    const Eigen::Index ng = gallery.features.rows();
    if (static_cast<std::size_t>(nq) != query.identity.size() || static_cast<std::size_t>(nq) != query.camera.size() ||
        static_cast<std::size_t>(ng) != gallery.identity.size() || static_cast<std::size_t>(ng) != gallery.camera.size()) {
        throw std::invalid_argument("retrieval_eval: metadata length mismatch");
    }
    if (nq == 0 || ng == 0) {
        throw std::invalid_argument("retrieval_eval: empty query or gallery");
    }
    if (query.features.cols() != gallery.features.cols()) {
        throw std::invalid_argument("retrieval_eval: feature width mismatch");
    }
    for (Eigen::Index q = 0; q < nq; ++q) {
        bool any = false;
        for (Eigen::Index g = 0; g < ng && !any; ++g) {
            any = gallery.identity[static_cast<std::size_t>(g)] == query.identity[static_cast<std::size_t>(q)] &&
                  gallery.camera[static_cast<std::size_t>(g)] != query.camera[static_cast<std::size_t>(q)];
        }
        if (!any) {
            throw std::invalid_argument("retrieval_eval: query " + std::to_string(q) + " has no valid gallery match");
        }
    }

    RetrievalResult out;
    out.average_precision.assign(static_cast<std::size_t>(nq), 0.0);
    std::vector<std::vector<char>> hit_lists(static_cast<std::size_t>(nq));
    parallel_for(static_cast<std::size_t>(nq), [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<double, Eigen::Index>> ranked;
        for (std::size_t q = begin; q < end; ++q) {
            const auto qi = static_cast<Eigen::Index>(q);
            ranked.clear();
            for (Eigen::Index g = 0; g < ng; ++g) {
                const auto gs = static_cast<std::size_t>(g);
                if (gallery.identity[gs] == query.identity[q] && gallery.camera[gs] == query.camera[q]) {
                    continue;
                }
                ranked.emplace_back((query.features.row(qi) - gallery.features.row(g)).norm(), g);
            }
            std::sort(ranked.begin(), ranked.end());
            auto& hits = hit_lists[q];
            hits.reserve(ranked.size());
            for (const auto& [d, g] : ranked) {
                hits.push_back(gallery.identity[static_cast<std::size_t>(g)] == query.identity[q] ? 1 : 0);
            }
            out.average_precision[q] = average_precision(hits);
        }
    });
    out.cmc.assign(static_cast<std::size_t>(ng), 0.0);
    for (const auto& hits : hit_lists) {
        const auto first = std::find(hits.begin(), hits.end(), 1);
        for (auto r = static_cast<std::size_t>(first - hits.begin()); r < out.cmc.size(); ++r) {
            out.cmc[r] += 1.0;
        }
    }
    for (double& c : out.cmc) {
        c /= static_cast<double>(nq);
    }
    out.mAP = std::accumulate(out.average_precision.begin(), out.average_precision.end(), 0.0) / static_cast<double>(nq);
    return out;
}

}  // namespace dualref::eval
