#include "carl/feature_importance.hpp"

#include <algorithm>
#include <numeric>

#include "carl/error.hpp"

namespace carl {

namespace {

double gini(std::span<const std::size_t> counts, std::size_t n) {
    if (n == 0) return 0.0;
    double sum_sq = 0.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(n);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

}  // namespace

void DecisionTree::fit(std::span<const StateVector> samples, std::span<const std::size_t> labels) {
    if (samples.size() != labels.size()) throw DomainError("one label per sample is required");
    if (samples.empty()) throw DomainError("cannot fit a tree on zero samples");
    classes_ = *std::max_element(labels.begin(), labels.end()) + 1;
    nodes_.clear();
    raw_importance_.fill(0.0);
    std::vector<std::size_t> index(samples.size());
    std::iota(index.begin(), index.end(), 0);
    build(samples, labels, index, 0, index.size(), 0);
}

std::size_t DecisionTree::build(std::span<const StateVector> samples, std::span<const std::size_t> labels,
                                std::vector<std::size_t>& index, std::size_t begin, std::size_t end,
                                std::size_t depth) {
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{});
    nodes_[id].depth = depth;

    const std::size_t n = end - begin;
    std::vector<std::size_t> counts(classes_, 0);
    for (std::size_t k = begin; k < end; ++k) ++counts[labels[index[k]]];
    nodes_[id].label = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    const double node_impurity = gini(counts, n);

    if (depth >= config_.max_depth || n < config_.min_samples_split || node_impurity == 0.0) return id;

    // Best split by weighted impurity decrease n*G - n_l*G_l - n_r*G_r.
    double best_gain = 1e-12;
    std::size_t best_feature = kStateDim;
    double best_threshold = 0.0;
    std::vector<std::size_t> order(index.begin() + static_cast<std::ptrdiff_t>(begin),
                                   index.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<std::size_t> left(classes_);
    std::vector<std::size_t> right(classes_);
    for (std::size_t f = 0; f < kStateDim; ++f) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return samples[a][f] < samples[b][f]; });
        std::fill(left.begin(), left.end(), 0);
        right = counts;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const std::size_t lab = labels[order[k]];
            ++left[lab];
            --right[lab];
            const double lo = samples[order[k]][f];
            const double hi = samples[order[k + 1]][f];
            if (lo == hi) continue;
            const std::size_t n_left = k + 1;
            const std::size_t n_right = n - n_left;
            const double gain = static_cast<double>(n) * node_impurity -
                                static_cast<double>(n_left) * gini(left, n_left) -
                                static_cast<double>(n_right) * gini(right, n_right);
            if (gain > best_gain) {
                best_gain = gain;
                best_feature = f;
                best_threshold = 0.5 * (lo + hi);
            }
        }
    }
    if (best_feature == kStateDim) return id;

    raw_importance_[best_feature] += best_gain;
    const auto mid = std::partition(index.begin() + static_cast<std::ptrdiff_t>(begin),
                                    index.begin() + static_cast<std::ptrdiff_t>(end),
                                    [&](std::size_t s) { return samples[s][best_feature] <= best_threshold; });
    const std::size_t split = static_cast<std::size_t>(mid - index.begin());

    nodes_[id].leaf = false;
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    const std::size_t l = build(samples, labels, index, begin, split, depth + 1);
    const std::size_t r = build(samples, labels, index, split, end, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

std::size_t DecisionTree::predict(const StateVector& sample) const {
    if (nodes_.empty()) throw UsageError("predict on an unfitted tree");
    std::size_t id = 0;
    while (!nodes_[id].leaf) {
        id = sample[nodes_[id].feature] <= nodes_[id].threshold ? nodes_[id].left : nodes_[id].right;
    }
    return nodes_[id].label;
}

std::array<double, kStateDim> DecisionTree::feature_importances() const {
    std::array<double, kStateDim> out{};
    const double total = std::accumulate(raw_importance_.begin(), raw_importance_.end(), 0.0);
    if (total <= 0.0) return out;
    for (std::size_t f = 0; f < kStateDim; ++f) out[f] = raw_importance_[f] / total;
    return out;
}

std::size_t DecisionTree::depth() const {
    std::size_t d = 0;
    for (const auto& node : nodes_) d = std::max(d, node.depth);
    return d;
}

FeatureImportance label_importance(std::span<const StateVector> samples, std::span<const std::size_t> labels,
                                   DecisionTreeConfig config) {
    if (samples.empty()) throw DomainError("feature importance needs a non-empty dataset");
    FeatureImportance out;
    const bool single = std::all_of(labels.begin(), labels.end(), [&](std::size_t l) { return l == labels[0]; });
    if (single) {
        out.single_class = true;
        return out;
    }
    DecisionTree tree(config);
    tree.fit(samples, labels);
    out.scores = tree.feature_importances();
    return out;
}

FeatureImportance feature_importance(const CascadePolicy& policy, std::span<const StateVector> normalized_states,
                                     DecisionTreeConfig config) {
    std::vector<std::size_t> labels;
    labels.reserve(normalized_states.size());
    for (const auto& s : normalized_states) {
        const std::vector<double> c = policy.factorize(s);
        labels.push_back(static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin()));
    }
    return label_importance(normalized_states, labels, config);
}

FeatureImportance feature_importance(const CascadePolicy& policy, const OfflineDataset& dataset,
                                     DecisionTreeConfig config) {
    std::vector<StateVector> states;
    states.reserve(dataset.size());
    for (const auto& t : dataset.transitions) states.push_back(normalize_state(t.state, dataset.normalization));
    return feature_importance(policy, states, config);
}

}  // namespace carl
