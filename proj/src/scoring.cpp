#include "metam/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "metam/errors.hpp"
#include "metam/parallel.hpp"

namespace metam {

std::vector<double> solve_linear_system(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    // LU with partial pivoting; systems here are l x l with l <= 16
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        }
        if (std::abs(a[piv * n + col]) < 1e-300) {
            throw ConfigError("singular system in importance estimation");
        }
        if (piv != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[piv * n + k]);
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i * n + k] * x[k];
        x[i] = s / a[i * n + i];
    }
    return x;
}

std::vector<double> estimate_importance(std::span<const Observation> observations,
                                        std::size_t dim, double ridge) {
    if (observations.empty()) {
        return std::vector<double>(dim, 1.0 / static_cast<double>(dim));
    }
    std::vector<double> a(dim * dim, 0.0);
    std::vector<double> b(dim, 0.0);
    for (const auto& obs : observations) {
        const auto& p = obs.profile.values;
        if (p.size() != dim) throw DimensionMismatch("observation dimension mismatch");
        for (std::size_t i = 0; i < dim; ++i) {
            b[i] += p[i] * obs.gain;
            for (std::size_t j = 0; j < dim; ++j) a[i * dim + j] += p[i] * p[j];
        }
    }
    for (std::size_t i = 0; i < dim; ++i) a[i * dim + i] += ridge;
    return solve_linear_system(std::move(a), std::move(b));
}

double profile_based_score(const ProfileVector& p, std::span<const double> beta) {
    if (p.values.size() != beta.size()) {
        throw DimensionMismatch("profile/beta dimension mismatch");
    }
    double dot = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        dot += beta[i] * p.values[i];
        norm += std::abs(beta[i]);
    }
    norm = std::max(norm, 1e-12);
    return std::clamp(dot / norm, 0.0, 1.0);
}

ImportanceWeights::ImportanceWeights(std::size_t dim, double ridge_)
    : beta(dim, 1.0 / static_cast<double>(dim)), ridge(ridge_) {}

void ImportanceWeights::observe(ProfileVector p, double gain) {
    observations.push_back({std::move(p), gain});
    beta = estimate_importance(observations, beta.size(), ridge);
}

QualityState::QualityState(const std::map<std::string, ProfileVector>& profiles,
                           std::size_t dim, double ridge, bool parallel)
    : weights(dim, ridge), parallel_(parallel) {
    for (const auto& [id, p] : profiles) utility_score[id] = 0.0;
    refresh_profile_scores(profiles);
}

double QualityState::quality(const std::string& aug_id) const {
    return profile_score.at(aug_id) + utility_score.at(aug_id);
}

void QualityState::refresh_profile_scores(
    const std::map<std::string, ProfileVector>& profiles) {
    std::vector<const std::pair<const std::string, ProfileVector>*> items;
    items.reserve(profiles.size());
    for (const auto& kv : profiles) items.push_back(&kv);
    std::vector<double> scores(items.size());
    parallel_for(items.size(), parallel_, [&](std::size_t i) {
        scores[i] = profile_based_score(items[i]->second, weights.beta);
    });
    for (std::size_t i = 0; i < items.size(); ++i) {
        profile_score[items[i]->first] = scores[i];
    }
}

void QualityState::update(const std::string& queried_aug, double observed_utility,
                          double current_utility, const ClusterSet& clusters,
                          const std::map<std::string, ProfileVector>& profiles) {
    const double gain = std::max(observed_utility - current_utility, 0.0);
    queried[queried_aug] = observed_utility;
    utility_score[queried_aug] = gain;

    const auto& center = clusters.center_of(queried_aug);
    const bool skip_propagation =
        clusters.homogeneous.count(center) &&
        clusters.homogeneous.at(center) == ClusterSet::Homogeneity::No;
    if (!skip_propagation) {
        const auto& pq = profiles.at(queried_aug);
        for (const auto& [id, c] : clusters.assignment) {
            if (c != center || id == queried_aug || queried.count(id)) continue;
            const double d = chebyshev_distance(profiles.at(id), pq);
            const double propagated = std::max(1.0 - d, 0.0) * gain;
            utility_score[id] = std::max(utility_score[id], propagated);
        }
    }

    weights.observe(profiles.at(queried_aug), gain);
    refresh_profile_scores(profiles);
}

}  // namespace metam
