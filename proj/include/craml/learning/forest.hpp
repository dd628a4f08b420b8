#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "craml/learning/classifier.hpp"

namespace craml {

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go left when x[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t label = 0;
    // training statistics; dropped by purification
    double impurity = 0.0;
    double samples = 0.0;
    double weight[2] = {0, 0};

    bool leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // root at 0

    std::uint8_t predict(const SparseVec& x) const;
    std::size_t leaves() const;
    std::size_t depth() const;
};

struct TreeOptions {
    std::size_t max_depth = 0;  // 0 = unlimited
    std::size_t max_features = 0;
    std::size_t min_samples_split = 2;
};

/// CART with Gini impurity. `weights` are per-row bootstrap multiplicities.
DecisionTree grow_tree(std::span<const SparseVec> x, std::span<const std::uint8_t> y,
                       std::span<const std::uint32_t> weights, const TreeOptions& options, std::uint64_t seed);

struct PurifyStats {
    std::size_t nodes_before = 0;
    std::size_t nodes_after = 0;
};

/// Prediction-preserving simplification: drops branches made unreachable by
/// ancestor thresholds and collapses subtrees whose leaves agree.
PurifyStats purify_tree(DecisionTree& tree);

class RandomForest final : public Classifier {
public:
    RandomForest(std::size_t trees = 100, std::size_t max_depth = 0) : n_trees_(trees), max_depth_(max_depth) {}
    Family family() const override { return Family::random_forest; }
    void fit(std::span<const SparseVec> x, std::span<const std::uint8_t> y, const FitContext& ctx) override;
    std::uint8_t predict(const SparseVec& x) const override;
    nlohmann::ordered_json to_json() const override;
    static RandomForest from_json(std::size_t trees, std::size_t max_depth, const nlohmann::json& j);

    PurifyStats purify();
    bool purified() const { return purified_; }
    std::size_t node_count() const;
    const std::vector<DecisionTree>& trees() const { return trees_; }
    std::vector<DecisionTree>& trees() { return trees_; }

private:
    std::size_t n_trees_;
    std::size_t max_depth_;
    std::vector<DecisionTree> trees_;
    bool purified_ = false;
};

}  // namespace craml
