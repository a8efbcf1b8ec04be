#pragma once

#include "tsad/timeseries.hpp"

#include <cstdint>
#include <vector>

namespace tsad {

// Average path length of an unsuccessful BST search over n points:
// c(n) = 2 H(n-1) - 2 (n-1) / n with exact harmonic numbers; c(n) = 0 for n <= 1.
double average_path_length(std::size_t n);

struct IsoNode {
    int feature = -1;       // -1 marks an external node
    double threshold = 0.0; // x[feature] < threshold goes left
    int left = -1;
    int right = -1;
    int size = 0;           // training points that reached this node
    int depth = 0;
};

struct IsoTree {
    std::vector<IsoNode> nodes;  // nodes[0] is the root
    int height() const;
    double path_length(const Vector& x) const;
};

class IsolationForest {
public:
    // `states` holds one point per row.
    static IsolationForest fit(const Matrix& states, int num_trees, int subsample_size,
                               std::uint64_t seed);

    double mean_path_length(const Vector& x) const;
    // 2^(-E[h(x)] / c(subsample_size)), strictly inside (0, 1).
    double anomaly_score(const Vector& x) const;
    Vector anomaly_scores(const Matrix& states) const;

    const std::vector<IsoTree>& trees() const { return trees_; }
    int subsample_size() const { return subsample_size_; }
    int height_limit() const { return height_limit_; }

private:
    std::vector<IsoTree> trees_;
    int subsample_size_ = 0;
    int height_limit_ = 0;
};

}  // namespace tsad
