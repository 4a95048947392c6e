#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "metam/core.hpp"
#include "metam/profiles.hpp"

namespace metam {

double chebyshev_distance(const ProfileVector& a, const ProfileVector& b);

// ε-cover of the augmentations in profile space: every member lies within
// Chebyshev ε of its center, centers are assigned to themselves.
struct ClusterSet {
    enum class Homogeneity { Untested, Yes, No };

    std::vector<std::string> centers;
    std::map<std::string, std::string> assignment;  // aug id -> center id
    double epsilon = 0.0;
    std::map<std::string, Homogeneity> homogeneous;

    const std::string& center_of(const std::string& aug_id) const;
    std::vector<std::string> members_of(const std::string& center_id) const;
    std::size_t cluster_count() const { return centers.size(); }

    // failed homogeneity check: every member becomes its own cluster
    void dissolve(const std::string& center_id);
};

// Greedy k-center until the cover radius is at most epsilon. The first center
// is a seeded uniform draw; each round promotes the point farthest from its
// center (ties by lexicographic id) and reassigns. Assignment ties also break
// lexicographically, so incremental reassignment matches a full rescan.
ClusterSet cluster_partition(const std::vector<std::string>& aug_ids,
                             const std::map<std::string, ProfileVector>& profiles,
                             double epsilon, std::uint64_t seed, bool parallel = true);

// Queries min(|cluster|, ceil(log2 |cluster|) + 1) seeded-random members and
// accepts homogeneity iff a strict majority of the sampled utilities lie
// within a (1+epsilon) multiplicative band around their mean (absolute
// deviation <= epsilon when the mean is 0).
bool homogeneity_check(const std::vector<std::string>& cluster_members,
                       const std::function<double(const std::string&)>& query_utility,
                       double epsilon, Rng& rng);

// exposed for the serial-vs-parallel kernel tests and the benchmark:
// given flattened row-major points, updates per-point (distance, assignment)
// against a newly promoted center
void kcenter_update_serial(const std::vector<double>& points, std::size_t dim,
                           std::size_t new_center, std::vector<double>& dist,
                           std::vector<std::size_t>& assign);
void kcenter_update_parallel(const std::vector<double>& points, std::size_t dim,
                             std::size_t new_center, std::vector<double>& dist,
                             std::vector<std::size_t>& assign);

}  // namespace metam
