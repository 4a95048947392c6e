#include "metam/clustering.hpp"

#include <algorithm>
#include <cmath>

#include "metam/errors.hpp"
#include "metam/parallel.hpp"

namespace metam {

double chebyshev_distance(const ProfileVector& a, const ProfileVector& b) {
    if (a.values.size() != b.values.size()) {
        throw DimensionMismatch("profile dimensions differ: " +
                                std::to_string(a.values.size()) + " vs " +
                                std::to_string(b.values.size()));
    }
    double d = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        d = std::max(d, std::abs(a.values[i] - b.values[i]));
    }
    return d;
}

const std::string& ClusterSet::center_of(const std::string& aug_id) const {
    auto it = assignment.find(aug_id);
    if (it == assignment.end()) throw ConfigError("unassigned augmentation: " + aug_id);
    return it->second;
}

std::vector<std::string> ClusterSet::members_of(const std::string& center_id) const {
    std::vector<std::string> out;
    for (const auto& [id, c] : assignment) {
        if (c == center_id) out.push_back(id);
    }
    return out;
}

void ClusterSet::dissolve(const std::string& center_id) {
    auto members = members_of(center_id);
    centers.erase(std::remove(centers.begin(), centers.end(), center_id), centers.end());
    homogeneous.erase(center_id);
    for (const auto& m : members) {
        assignment[m] = m;
        centers.push_back(m);
        homogeneous[m] = Homogeneity::No;
    }
    std::sort(centers.begin(), centers.end());
}

namespace {

inline double cheb(const double* a, const double* b, std::size_t dim) {
    double d = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        d = std::max(d, std::abs(a[k] - b[k]));
    }
    return d;
}

template <bool Parallel>
void kcenter_update(const std::vector<double>& points, std::size_t dim,
                    std::size_t new_center, std::vector<double>& dist,
                    std::vector<std::size_t>& assign) {
    const std::size_t n = dist.size();
    const double* c = points.data() + new_center * dim;
    parallel_for(n, Parallel, [&](std::size_t i) {
        const double d = cheb(points.data() + i * dim, c, dim);
        // tie goes to the smaller index, which is the lexicographically
        // smaller id because callers pass points in sorted-id order
        if (d < dist[i] || (d == dist[i] && new_center < assign[i])) {
            dist[i] = d;
            assign[i] = new_center;
        }
    });
}

}  // namespace

void kcenter_update_serial(const std::vector<double>& points, std::size_t dim,
                           std::size_t new_center, std::vector<double>& dist,
                           std::vector<std::size_t>& assign) {
    kcenter_update<false>(points, dim, new_center, dist, assign);
}

void kcenter_update_parallel(const std::vector<double>& points, std::size_t dim,
                             std::size_t new_center, std::vector<double>& dist,
                             std::vector<std::size_t>& assign) {
    kcenter_update<true>(points, dim, new_center, dist, assign);
}

ClusterSet cluster_partition(const std::vector<std::string>& aug_ids,
                             const std::map<std::string, ProfileVector>& profiles,
                             double epsilon, std::uint64_t seed, bool parallel) {
    if (aug_ids.empty()) throw ConfigError("cluster_partition on empty candidate set");
    if (epsilon <= 0.0 || epsilon > 1.0) throw ConfigError("epsilon must be in (0,1]");

    std::vector<std::string> ids = aug_ids;
    std::sort(ids.begin(), ids.end());
    const std::size_t n = ids.size();
    const std::size_t dim = profiles.at(ids[0]).values.size();

    std::vector<double> points(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = profiles.at(ids[i]);
        if (p.values.size() != dim) throw DimensionMismatch("ragged profile vectors");
        std::copy(p.values.begin(), p.values.end(), points.begin() + i * dim);
    }

    Rng rng = Rng(seed).fork(fnv1a64("cluster-seed"));
    const std::size_t first = rng.uniform_index(n);

    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> assign(n, first);
    std::vector<std::size_t> center_idx{first};

    auto update = parallel ? kcenter_update_parallel : kcenter_update_serial;
    update(points, dim, first, dist, assign);

    for (;;) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (dist[i] > far_d) {
                far_d = dist[i];
                far = i;
            }
        }
        if (far_d <= epsilon) break;
        center_idx.push_back(far);
        update(points, dim, far, dist, assign);
    }

    ClusterSet cs;
    cs.epsilon = epsilon;
    for (auto c : center_idx) cs.centers.push_back(ids[c]);
    std::sort(cs.centers.begin(), cs.centers.end());
    for (std::size_t i = 0; i < n; ++i) {
        cs.assignment[ids[i]] = ids[assign[i]];
    }
    for (const auto& c : cs.centers) cs.homogeneous[c] = ClusterSet::Homogeneity::Untested;
    return cs;
}

bool homogeneity_check(const std::vector<std::string>& cluster_members,
                       const std::function<double(const std::string&)>& query_utility,
                       double epsilon, Rng& rng) {
    if (cluster_members.size() < 2) return true;
    const std::size_t want = std::min(
        cluster_members.size(),
        static_cast<std::size_t>(
            std::ceil(std::log2(static_cast<double>(cluster_members.size()))) + 1));

    std::vector<std::string> pool = cluster_members;
    std::sort(pool.begin(), pool.end());
    rng.shuffle(pool);
    pool.resize(want);

    std::vector<double> utils;
    utils.reserve(want);
    for (const auto& id : pool) utils.push_back(query_utility(id));

    double mean = 0.0;
    for (double u : utils) mean += u;
    mean /= static_cast<double>(utils.size());

    std::size_t within = 0;
    for (double u : utils) {
        bool ok;
        if (mean == 0.0) {
            ok = std::abs(u) <= epsilon;
        } else {
            ok = u >= mean / (1.0 + epsilon) && u <= mean * (1.0 + epsilon);
        }
        if (ok) ++within;
    }
    return within * 2 > utils.size();
}

}  // namespace metam
