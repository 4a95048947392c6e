#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "metam/core.hpp"
#include "metam/discovery.hpp"
#include "metam/repository.hpp"

namespace metam {

// One value per registered profile, each in [0,1]; undefined values map to 0.
struct ProfileVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

enum class ProfileKind { Correlation, MutualInfo, Semantic, Metadata, Overlap, Noise };

struct ProfileSpec {
    std::string name;
    ProfileKind kind;
};

struct ProfileRegistry {
    std::vector<ProfileSpec> profiles;
    std::size_t sample_size = 100;

    static ProfileRegistry default_set();
    // "correlation,mutual_info,semantic,metadata,overlap,noise" (noise repeatable)
    static ProfileRegistry parse(const std::string& names);

    void add_noise_profiles(int count);
    std::size_t size() const { return profiles.size(); }
    std::vector<std::string> names() const;
    std::uint64_t hash() const;
};

// --- individual profiles (columns must be row-aligned) -----------------------

// |pearson r| with categorical columns label-encoded by first appearance;
// fewer than 3 valid pairs or zero variance -> 0
double correlation_profile(const Column& aug_col, const Column& target_col);

// plug-in MI over equal-width bins, normalized by min(H(X), H(Y))
double mutual_info_profile(const Column& aug_col, const Column& target_col, int bins = 10);

// cosine of sign-hashed token vectors, mapped to [0,1]; empty token set -> 0.5
double hashed_cosine_similarity(const std::vector<std::string>& tokens_a,
                                const std::vector<std::string>& tokens_b);

// jaccard over tokens of (table id + column names)
double metadata_profile_tokens(const std::set<std::string>& a, const std::set<std::string>& b);

std::set<std::string> table_name_tokens(const Table& t);

// Shared, immutable profiling state: one fixed seeded sample of the input
// table, the resolved target column, and memoized per-table token vectors.
// compute_batch prepares all shared state first, then evaluates augmentations
// independently (optionally in parallel, output identical either way).
class ProfileContext {
public:
    ProfileContext(const Table& d_in, const Repository& repo, ProfileRegistry registry,
                   std::optional<std::string> target_column, std::uint64_t seed);

    ProfileVector compute(const Augmentation& aug) const;
    std::vector<ProfileVector> compute_batch(std::span<const Augmentation> augs,
                                             bool parallel = true) const;

    const ProfileRegistry& registry() const { return registry_; }
    const Table& sample() const { return sample_; }
    std::optional<std::size_t> target_index() const { return target_idx_; }
    std::optional<std::string> resolved_target() const;

private:
    const Repository& repo_;
    ProfileRegistry registry_;
    std::uint64_t seed_;
    Table sample_;
    std::optional<std::size_t> target_idx_;
    std::vector<double> din_embedding_;
    std::set<std::string> din_meta_tokens_;

    mutable JoinMapCache join_maps_;
    mutable std::map<std::string, std::vector<double>> embeddings_;  // by table id
    mutable std::map<std::string, std::set<std::string>> meta_tokens_;
    mutable std::map<std::string, std::uint64_t> content_hashes_;

    void prepare_table(const std::string& table_id) const;
    const std::vector<double>& embedding_of(const std::string& table_id) const;
};

// Spec-shaped convenience wrapper over a one-off context.
ProfileVector compute_profiles(const Augmentation& aug, const Table& d_in,
                               const Repository& repo, const ProfileRegistry& registry,
                               std::uint64_t seed,
                               std::optional<std::string> target_column = std::nullopt);

}  // namespace metam
