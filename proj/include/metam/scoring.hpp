#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "metam/clustering.hpp"
#include "metam/profiles.hpp"

namespace metam {

struct Observation {
    ProfileVector profile;
    double gain = 0.0;
};

// Solves (sum p_i p_i^T + ridge I) beta = sum p_i q_i. With no observations
// returns the uniform vector (1/l, ..., 1/l).
std::vector<double> estimate_importance(std::span<const Observation> observations,
                                        std::size_t dim, double ridge = 1e-3);

// weighted average of profile values under normalized weights, clamped to [0,1]
double profile_based_score(const ProfileVector& p, std::span<const double> beta);

struct ImportanceWeights {
    std::vector<double> beta;
    std::vector<Observation> observations;
    double ridge = 1e-3;

    explicit ImportanceWeights(std::size_t dim, double ridge_ = 1e-3);
    void observe(ProfileVector p, double gain);  // records and re-estimates
};

// quality(aug) = profile_score(aug) + utility_score(aug)
struct QualityState {
    std::map<std::string, double> profile_score;
    std::map<std::string, double> utility_score;
    std::map<std::string, double> queried;  // aug id -> last observed utility
    ImportanceWeights weights;

    QualityState(const std::map<std::string, ProfileVector>& profiles, std::size_t dim,
                 double ridge = 1e-3, bool parallel = true);

    double quality(const std::string& aug_id) const;

    // Records the query: gain = max(observed - current, 0) becomes the queried
    // augmentation's utility score and propagates (1 - d)·gain to unqueried
    // same-cluster members (keeping the max), unless the cluster failed its
    // homogeneity check. Beta is re-estimated and all profile scores refreshed.
    void update(const std::string& queried_aug, double observed_utility,
                double current_utility, const ClusterSet& clusters,
                const std::map<std::string, ProfileVector>& profiles);

private:
    bool parallel_;
    void refresh_profile_scores(const std::map<std::string, ProfileVector>& profiles);
};

// dense solve of a small symmetric positive system, exposed for tests
std::vector<double> solve_linear_system(std::vector<double> a, std::vector<double> b);

}  // namespace metam
