#include "craml/learning/forest.hpp"

#include "craml/error.hpp"
#include "craml/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace craml {

std::uint8_t DecisionTree::predict(const SparseVec& x) const {
    std::size_t i = 0;
    while (!nodes[i].leaf()) {
        const TreeNode& n = nodes[i];
        i = static_cast<std::size_t>(x.at(static_cast<std::uint32_t>(n.feature)) <= n.threshold ? n.left : n.right);
    }
    return nodes[i].label;
}

std::size_t DecisionTree::leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf(); }));
}

std::size_t DecisionTree::depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        if (!n.leaf()) {
            stack.push_back({n.left, d + 1});
            stack.push_back({n.right, d + 1});
        }
    }
    return best;
}

namespace {

double gini(double w0, double w1) {
    double t = w0 + w1;
    if (t <= 0) return 0.0;
    double p0 = w0 / t;
    double p1 = w1 / t;
    return 1.0 - p0 * p0 - p1 * p1;
}

struct Entry {
    double value;
    std::uint32_t row;
};

class TreeBuilder {
public:
    TreeBuilder(std::span<const SparseVec> x, std::span<const std::uint8_t> y, std::span<const std::uint32_t> w,
                const TreeOptions& o, std::uint64_t seed)
        : x_(x), y_(y), w_(w), opt_(o), rng_(seed) {}

    DecisionTree build() {
        std::uint32_t max_feature = 0;
        for (const auto& r : x_) {
            if (!r.index.empty()) max_feature = std::max(max_feature, r.index.back() + 1);
        }
        buckets_.resize(max_feature);
        std::vector<std::uint32_t> rows;
        for (std::uint32_t r = 0; r < x_.size(); ++r) {
            if (w_[r] > 0) rows.push_back(r);
        }
        grow(rows, 0);
        return std::move(tree_);
    }

private:
    struct Split {
        std::int32_t feature = -1;
        double threshold = 0.0;
        double score = std::numeric_limits<double>::infinity();
    };

    std::int32_t grow(const std::vector<std::uint32_t>& rows, std::size_t depth) {
        TreeNode node;
        for (auto r : rows) node.weight[y_[r] ? 1 : 0] += w_[r];
        node.samples = node.weight[0] + node.weight[1];
        node.impurity = gini(node.weight[0], node.weight[1]);
        node.label = node.weight[1] > node.weight[0] ? 1 : 0;
        auto id = static_cast<std::int32_t>(tree_.nodes.size());
        tree_.nodes.push_back(node);

        bool stop = node.impurity <= 0.0 || (opt_.max_depth > 0 && depth >= opt_.max_depth) ||
                    node.samples < static_cast<double>(opt_.min_samples_split);
        if (stop) return id;
        Split split = find_split(rows, node);
        if (split.feature < 0) return id;

        std::vector<std::uint32_t> left, right;
        for (auto r : rows) {
            (x_[r].at(static_cast<std::uint32_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
        }
        std::int32_t l = grow(left, depth + 1);
        std::int32_t rr = grow(right, depth + 1);
        TreeNode& n = tree_.nodes[static_cast<std::size_t>(id)];
        n.feature = split.feature;
        n.threshold = split.threshold;
        n.left = l;
        n.right = rr;
        return id;
    }

    void evaluate(std::uint32_t f, const TreeNode& node, Split& best) {
        auto& list = buckets_[f];
        std::sort(list.begin(), list.end(), [](const Entry& a, const Entry& b) {
            return a.value < b.value || (a.value == b.value && a.row < b.row);
        });
        double l0 = node.weight[0];
        double l1 = node.weight[1];
        for (const auto& e : list) (y_[e.row] ? l1 : l0) -= w_[e.row];
        // left starts with the rows where the feature is zero
        auto consider = [&](double threshold) {
            double r0 = node.weight[0] - l0;
            double r1 = node.weight[1] - l1;
            if (l0 + l1 <= 0 || r0 + r1 <= 0) return;
            double score = (l0 + l1) * gini(l0, l1) + (r0 + r1) * gini(r0, r1);
            if (score < best.score) {
                best.score = score;
                best.feature = static_cast<std::int32_t>(f);
                best.threshold = threshold;
            }
        };
        if (!list.empty() && list.front().value > 0) consider(list.front().value / 2.0);
        for (std::size_t i = 0; i < list.size();) {
            std::size_t j = i;
            while (j < list.size() && list[j].value == list[i].value) {
                (y_[list[j].row] ? l1 : l0) += w_[list[j].row];
                ++j;
            }
            if (j < list.size()) consider((list[i].value + list[j].value) / 2.0);
            i = j;
        }
    }

    Split find_split(const std::vector<std::uint32_t>& rows, const TreeNode& node) {
        std::vector<std::uint32_t> present;
        for (auto r : rows) {
            const SparseVec& v = x_[r];
            for (std::size_t i = 0; i < v.nnz(); ++i) {
                auto f = v.index[i];
                if (buckets_[f].empty()) present.push_back(f);
                buckets_[f].push_back({v.value[i], r});
            }
        }
        std::sort(present.begin(), present.end());
        std::size_t k = opt_.max_features == 0 ? present.size() : std::min(opt_.max_features, present.size());
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng_.below(present.size() - i));
            std::swap(present[i], present[j]);
        }
        const double parent = node.samples * node.impurity;
        Split best;
        for (std::size_t i = 0; i < present.size(); ++i) {
            // keep drawing past k only while nothing useful has been found
            if (i >= k && best.feature >= 0 && best.score < parent - 1e-12) break;
            evaluate(present[i], node, best);
        }
        for (auto f : present) buckets_[f].clear();
        if (best.feature < 0 || !(best.score < parent - 1e-12)) return {};
        return best;
    }

    std::span<const SparseVec> x_;
    std::span<const std::uint8_t> y_;
    std::span<const std::uint32_t> w_;
    TreeOptions opt_;
    Rng rng_;
    DecisionTree tree_;
    std::vector<std::vector<Entry>> buckets_;
};

struct Bounds {
    double lo = -std::numeric_limits<double>::infinity();  // x > lo
    double hi = std::numeric_limits<double>::infinity();   // x <= hi
};

std::int32_t rebuild(const DecisionTree& in, std::int32_t i, std::map<std::int32_t, Bounds>& bounds,
                     DecisionTree& out) {
    const TreeNode& n = in.nodes[static_cast<std::size_t>(i)];
    if (n.leaf()) {
        TreeNode leaf;
        leaf.label = n.label;
        out.nodes.push_back(leaf);
        return static_cast<std::int32_t>(out.nodes.size() - 1);
    }
    Bounds b = bounds.count(n.feature) ? bounds[n.feature] : Bounds{};
    if (b.hi <= n.threshold) return rebuild(in, n.left, bounds, out);
    if (b.lo >= n.threshold) return rebuild(in, n.right, bounds, out);

    auto id = static_cast<std::int32_t>(out.nodes.size());
    out.nodes.push_back({});
    Bounds saved = b;
    bounds[n.feature] = {b.lo, std::min(b.hi, n.threshold)};
    std::int32_t l = rebuild(in, n.left, bounds, out);
    bounds[n.feature] = {std::max(b.lo, n.threshold), b.hi};
    std::int32_t r = rebuild(in, n.right, bounds, out);
    bounds[n.feature] = saved;

    const TreeNode& ln = out.nodes[static_cast<std::size_t>(l)];
    const TreeNode& rn = out.nodes[static_cast<std::size_t>(r)];
    if (ln.leaf() && rn.leaf() && ln.label == rn.label) {
        std::uint8_t label = ln.label;
        out.nodes.resize(static_cast<std::size_t>(id) + 1);
        out.nodes[static_cast<std::size_t>(id)] = TreeNode{};
        out.nodes[static_cast<std::size_t>(id)].label = label;
        return id;
    }
    TreeNode& node = out.nodes[static_cast<std::size_t>(id)];
    node.feature = n.feature;
    node.threshold = n.threshold;
    node.left = l;
    node.right = r;
    return id;
}

nlohmann::ordered_json node_json(const TreeNode& n, bool stats) {
    nlohmann::ordered_json j;
    if (n.leaf()) {
        j["c"] = n.label;
    } else {
        j["f"] = n.feature;
        j["t"] = n.threshold;
        j["l"] = n.left;
        j["r"] = n.right;
        if (stats) j["c"] = n.label;
    }
    if (stats) {
        j["impurity"] = n.impurity;
        j["samples"] = n.samples;
        j["value"] = {n.weight[0], n.weight[1]};
    }
    return j;
}

TreeNode node_from_json(const nlohmann::json& j) {
    TreeNode n;
    if (j.contains("f")) {
        n.feature = j.at("f").get<std::int32_t>();
        n.threshold = j.at("t").get<double>();
        n.left = j.at("l").get<std::int32_t>();
        n.right = j.at("r").get<std::int32_t>();
    }
    if (j.contains("c")) n.label = j.at("c").get<std::uint8_t>();
    if (j.contains("impurity")) {
        n.impurity = j.at("impurity").get<double>();
        n.samples = j.at("samples").get<double>();
        n.weight[0] = j.at("value").at(0).get<double>();
        n.weight[1] = j.at("value").at(1).get<double>();
    }
    return n;
}

}  // namespace

DecisionTree grow_tree(std::span<const SparseVec> x, std::span<const std::uint8_t> y,
                       std::span<const std::uint32_t> weights, const TreeOptions& options, std::uint64_t seed) {
    if (x.size() != y.size() || x.size() != weights.size()) fail_data("grow_tree: input sizes differ");
    return TreeBuilder(x, y, weights, options, seed).build();
}

PurifyStats purify_tree(DecisionTree& tree) {
    PurifyStats s;
    s.nodes_before = tree.nodes.size();
    DecisionTree out;
    std::map<std::int32_t, Bounds> bounds;
    rebuild(tree, 0, bounds, out);
    tree = std::move(out);
    s.nodes_after = tree.nodes.size();
    return s;
}

void RandomForest::fit(std::span<const SparseVec> x, std::span<const std::uint8_t> y, const FitContext& ctx) {
    if (x.size() != y.size() || x.empty()) fail_data("random forest: empty or mismatched training data");
    TreeOptions opt;
    opt.max_depth = max_depth_;
    opt.max_features = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(ctx.features))));
    trees_.assign(n_trees_, {});
    purified_ = false;
    parallel_for(n_trees_, ctx.jobs, [&](std::size_t t) {
        std::uint64_t seed = derive_seed(ctx.seed, t);
        Rng rng(seed);
        std::vector<std::uint32_t> w(x.size(), 0);
        for (std::size_t i = 0; i < x.size(); ++i) ++w[rng.below(x.size())];
        trees_[t] = grow_tree(x, y, w, opt, rng.next());
    });
}

std::uint8_t RandomForest::predict(const SparseVec& x) const {
    std::size_t votes = 0;
    for (const auto& t : trees_) votes += t.predict(x);
    return 2 * votes > trees_.size() ? 1 : 0;
}

std::size_t RandomForest::node_count() const {
    std::size_t n = 0;
    for (const auto& t : trees_) n += t.nodes.size();
    return n;
}

PurifyStats RandomForest::purify() {
    PurifyStats total;
    for (auto& t : trees_) {
        auto s = purify_tree(t);
        total.nodes_before += s.nodes_before;
        total.nodes_after += s.nodes_after;
    }
    purified_ = true;
    return total;
}

nlohmann::ordered_json RandomForest::to_json() const {
    nlohmann::ordered_json j;
    j["purified"] = purified_;
    j["trees"] = nlohmann::ordered_json::array();
    for (const auto& t : trees_) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& n : t.nodes) nodes.push_back(node_json(n, !purified_));
        j["trees"].push_back(std::move(nodes));
    }
    return j;
}

RandomForest RandomForest::from_json(std::size_t trees, std::size_t max_depth, const nlohmann::json& j) {
    RandomForest f(trees, max_depth);
    f.purified_ = j.at("purified").get<bool>();
    for (const auto& tj : j.at("trees")) {
        DecisionTree t;
        for (const auto& nj : tj) t.nodes.push_back(node_from_json(nj));
        const auto size = static_cast<std::int32_t>(t.nodes.size());
        for (const auto& n : t.nodes) {
            if (!n.leaf() && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size)) {
                fail_data("random forest: corrupt tree structure");
            }
        }
        if (t.nodes.empty()) fail_data("random forest: empty tree");
        f.trees_.push_back(std::move(t));
    }
    if (f.trees_.empty()) fail_data("random forest: no trees");
    return f;
}

}  // namespace craml
