#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "carl/cascade_policy.hpp"
#include "carl/mdp.hpp"

namespace carl {

struct DecisionTreeConfig {
    std::size_t max_depth = 6;
    std::size_t min_samples_split = 2;
};

/// CART classifier with Gini impurity and midpoint thresholds.
class DecisionTree {
public:
    explicit DecisionTree(DecisionTreeConfig config = {}) : config_(config) {}

    void fit(std::span<const StateVector> samples, std::span<const std::size_t> labels);

    std::size_t predict(const StateVector& sample) const;

    /// Total weighted impurity decrease per feature, normalized to sum to 1 (all zero for a single leaf).
    std::array<double, kStateDim> feature_importances() const;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t depth() const;

private:
    struct Node {
        bool leaf = true;
        std::size_t feature = 0;
        double threshold = 0.0;
        std::size_t left = 0;
        std::size_t right = 0;
        std::size_t label = 0;
        std::size_t depth = 0;
    };

    std::size_t build(std::span<const StateVector> samples, std::span<const std::size_t> labels,
                      std::vector<std::size_t>& index, std::size_t begin, std::size_t end, std::size_t depth);

    DecisionTreeConfig config_;
    std::size_t classes_ = 0;
    std::vector<Node> nodes_;
    std::array<double, kStateDim> raw_importance_{};
};

struct FeatureImportance {
    std::array<double, kStateDim> scores{};
    /// Every sample got the same label; scores are all zero.
    bool single_class = false;
};

/// Labels each state with the argmax factorizer weight and fits a decision tree to those labels.
FeatureImportance feature_importance(const CascadePolicy& policy, std::span<const StateVector> normalized_states,
                                     DecisionTreeConfig config = {});

FeatureImportance feature_importance(const CascadePolicy& policy, const OfflineDataset& dataset,
                                     DecisionTreeConfig config = {});

/// Tree importance for externally supplied labels.
FeatureImportance label_importance(std::span<const StateVector> samples, std::span<const std::size_t> labels,
                                   DecisionTreeConfig config = {});

}  // namespace carl
