#include "metam/trees.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace metam {

namespace {

double majority_code(const std::vector<double>& y, const std::vector<std::size_t>& idx,
                     std::size_t lo, std::size_t hi, std::size_t n_classes) {
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t i = lo; i < hi; ++i) ++counts[static_cast<std::size_t>(y[idx[i]])];
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_classes; ++c) {
        if (counts[c] > counts[best]) best = c;
    }
    return static_cast<double>(best);
}

double mean_target(const std::vector<double>& y, const std::vector<std::size_t>& idx,
                   std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += y[idx[i]];
    return s / static_cast<double>(hi - lo);
}

struct SplitScan {
    double best_score = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
};

}  // namespace

int BaggedTrees::grow(Tree& tree, const std::vector<double>& x, std::size_t f,
                      const std::vector<double>& y, std::vector<std::size_t>& idx,
                      std::size_t lo, std::size_t hi, int depth,
                      const TreeEnsembleParams& params) {
    const std::size_t n = hi - lo;
    const bool classify = n_classes_ > 0;

    bool pure = true;
    for (std::size_t i = lo + 1; i < hi && pure; ++i) {
        pure = y[idx[i]] == y[idx[lo]];
    }

    auto make_leaf = [&] {
        Node leaf;
        leaf.value = classify ? majority_code(y, idx, lo, hi, n_classes_)
                              : mean_target(y, idx, lo, hi);
        tree.nodes.push_back(leaf);
        return static_cast<int>(tree.nodes.size() - 1);
    };

    if (depth >= params.max_depth || n < static_cast<std::size_t>(params.min_split) || pure) {
        return make_leaf();
    }

    std::vector<std::size_t> features(f);
    for (std::size_t i = 0; i < f; ++i) features[i] = i;

    SplitScan scan;
    std::vector<std::pair<double, double>> vals(n);  // (feature value, target)
    for (std::size_t feat : features) {
        for (std::size_t i = 0; i < n; ++i) {
            vals[i] = {x[idx[lo + i] * f + feat], y[idx[lo + i]]};
        }
        std::sort(vals.begin(), vals.end());
        if (vals.front().first == vals.back().first) continue;

        if (classify) {
            std::vector<double> left(n_classes_, 0.0), right(n_classes_, 0.0);
            for (std::size_t i = 0; i < n; ++i) right[static_cast<std::size_t>(vals[i].second)] += 1;
            double nl = 0, nr = static_cast<double>(n);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const auto c = static_cast<std::size_t>(vals[i].second);
                left[c] += 1;
                right[c] -= 1;
                nl += 1;
                nr -= 1;
                if (vals[i].first == vals[i + 1].first) continue;
                double gl = 1.0, gr = 1.0;
                for (std::size_t k = 0; k < n_classes_; ++k) {
                    gl -= (left[k] / nl) * (left[k] / nl);
                    gr -= (right[k] / nr) * (right[k] / nr);
                }
                const double score = (nl * gl + nr * gr) / static_cast<double>(n);
                if (score < scan.best_score) {
                    scan.best_score = score;
                    scan.best_feature = static_cast<int>(feat);
                    scan.best_threshold = (vals[i].first + vals[i + 1].first) / 2.0;
                }
            }
        } else {
            double sl = 0, sll = 0, sr = 0, srr = 0;
            for (std::size_t i = 0; i < n; ++i) {
                sr += vals[i].second;
                srr += vals[i].second * vals[i].second;
            }
            double nl = 0, nr = static_cast<double>(n);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const double t = vals[i].second;
                sl += t;
                sll += t * t;
                sr -= t;
                srr -= t * t;
                nl += 1;
                nr -= 1;
                if (vals[i].first == vals[i + 1].first) continue;
                const double score = (sll - sl * sl / nl) + (srr - sr * sr / nr);
                if (score < scan.best_score) {
                    scan.best_score = score;
                    scan.best_feature = static_cast<int>(feat);
                    scan.best_threshold = (vals[i].first + vals[i + 1].first) / 2.0;
                }
            }
        }
    }

    if (scan.best_feature < 0) return make_leaf();

    const auto mid = std::partition(idx.begin() + lo, idx.begin() + hi, [&](std::size_t r) {
        return x[r * f + scan.best_feature] <= scan.best_threshold;
    });
    const std::size_t split = static_cast<std::size_t>(mid - idx.begin());
    if (split == lo || split == hi) return make_leaf();

    Node node;
    node.feature = scan.best_feature;
    node.threshold = scan.best_threshold;
    tree.nodes.push_back(node);
    const int self = static_cast<int>(tree.nodes.size() - 1);
    const int l = grow(tree, x, f, y, idx, lo, split, depth + 1, params);
    const int r = grow(tree, x, f, y, idx, split, hi, depth + 1, params);
    tree.nodes[self].left = l;
    tree.nodes[self].right = r;
    return self;
}

void BaggedTrees::fit(const std::vector<double>& x, std::size_t n, std::size_t f,
                      const std::vector<double>& y, std::size_t n_classes,
                      const TreeEnsembleParams& params, std::uint64_t seed) {
    trees_.clear();
    n_features_ = f;
    n_classes_ = n_classes;
    Rng root(seed);
    for (int t = 0; t < params.n_trees; ++t) {
        Rng rng = root.fork(0x7265650000ULL + t);
        std::vector<std::size_t> idx(n);
        for (auto& i : idx) i = rng.uniform_index(n);  // bootstrap
        Tree tree;
        grow(tree, x, f, y, idx, 0, n, 0, params);
        trees_.push_back(std::move(tree));
    }
}

double BaggedTrees::predict(const double* row) const {
    if (trees_.empty()) return 0.0;
    if (n_classes_ > 0) {
        std::vector<int> votes(n_classes_, 0);
        for (const auto& tree : trees_) {
            int at = 0;  // root is always the first node
            while (tree.nodes[at].feature >= 0) {
                at = row[tree.nodes[at].feature] <= tree.nodes[at].threshold
                         ? tree.nodes[at].left
                         : tree.nodes[at].right;
            }
            ++votes[static_cast<std::size_t>(tree.nodes[at].value)];
        }
        int best = 0;
        for (std::size_t c = 1; c < n_classes_; ++c) {
            if (votes[c] > votes[best]) best = static_cast<int>(c);
        }
        return static_cast<double>(best);
    }
    double s = 0.0;
    for (const auto& tree : trees_) {
        int at = 0;
        while (tree.nodes[at].feature >= 0) {
            at = row[tree.nodes[at].feature] <= tree.nodes[at].threshold
                     ? tree.nodes[at].left
                     : tree.nodes[at].right;
        }
        s += tree.nodes[at].value;
    }
    return s / static_cast<double>(trees_.size());
}

}  // namespace metam
