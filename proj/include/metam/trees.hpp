#pragma once

#include <cstdint>
#include <vector>

#include "metam/core.hpp"

namespace metam {

struct TreeEnsembleParams {
    int n_trees = 16;
    int max_depth = 6;
    int min_split = 2;
};

// Small bagged forest over a dense feature matrix (no NaNs; impute upstream).
// Classification votes over class codes, regression averages leaf means.
class BaggedTrees {
public:
    // y holds class codes (0..n_classes-1) when n_classes > 0, else raw targets
    void fit(const std::vector<double>& x, std::size_t n, std::size_t f,
             const std::vector<double>& y, std::size_t n_classes,
             const TreeEnsembleParams& params, std::uint64_t seed);

    double predict(const double* row) const;

private:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };
    struct Tree {
        std::vector<Node> nodes;
    };

    std::vector<Tree> trees_;
    std::size_t n_features_ = 0;
    std::size_t n_classes_ = 0;

    int grow(Tree& tree, const std::vector<double>& x, std::size_t f,
             const std::vector<double>& y, std::vector<std::size_t>& idx, std::size_t lo,
             std::size_t hi, int depth, const TreeEnsembleParams& params);
};

}  // namespace metam
