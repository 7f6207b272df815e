#include "hg/analytics/forest.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "hg/common/error.hpp"

namespace hg::analytics {
namespace {

// Portable bounded draw; std::uniform_int_distribution differs across
// standard libraries, which would break cross-platform determinism.
std::size_t draw(std::mt19937_64& rng, std::size_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return static_cast<std::size_t>(v % bound);
}

struct Builder {
  const std::vector<std::vector<double>>& rows;
  std::span<const double> targets;
  const ForestParams& params;
  std::size_t max_features;
  std::mt19937_64& rng;
  RegressionForest::Tree tree;

  double leaf_value(const std::vector<std::size_t>& idx) const {
    double sum = 0.0;
    for (auto i : idx) sum += targets[i];
    return sum / static_cast<double>(idx.size());
  }

  int build(std::vector<std::size_t> idx, int depth) {
    const int node_id = static_cast<int>(tree.size());
    tree.push_back({});
    tree[node_id].value = leaf_value(idx);
    const auto min_leaf = static_cast<std::size_t>(params.min_samples_leaf);
    if (depth >= params.max_depth || idx.size() < 2 * min_leaf) return node_id;

    const std::size_t n_features = rows.front().size();
    std::vector<std::size_t> features(n_features);
    std::iota(features.begin(), features.end(), 0);
    for (std::size_t i = 0; i < max_features && i < n_features; ++i) {
      std::swap(features[i], features[i + draw(rng, n_features - i)]);
    }

    double best_score = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    double total = 0.0;
    for (auto i : idx) total += targets[i];
    const auto n = static_cast<double>(idx.size());
    const double parent = total * total / n;

    std::vector<std::size_t> order = idx;
    for (std::size_t f = 0; f < std::min(max_features, n_features); ++f) {
      const std::size_t feat = features[f];
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rows[a][feat] < rows[b][feat] || (rows[a][feat] == rows[b][feat] && a < b);
      });
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left_sum += targets[order[k]];
        const std::size_t n_left = k + 1;
        const std::size_t n_right = order.size() - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double lo = rows[order[k]][feat];
        const double hi = rows[order[k + 1]][feat];
        if (!(lo < hi)) continue;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(n_left) +
                             right_sum * right_sum / static_cast<double>(n_right) - parent;
        if (score > best_score + 1e-12) {
          best_score = score;
          best_feature = static_cast<int>(feat);
          best_threshold = lo + (hi - lo) / 2.0;
        }
      }
    }
    if (best_feature < 0) return node_id;

    std::vector<std::size_t> left_idx, right_idx;
    for (auto i : idx) {
      (rows[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left_idx : right_idx)
          .push_back(i);
    }
    tree[node_id].feature = best_feature;
    tree[node_id].threshold = best_threshold;
    const int left = build(std::move(left_idx), depth + 1);
    const int right = build(std::move(right_idx), depth + 1);
    tree[node_id].left = left;
    tree[node_id].right = right;
    return node_id;
  }
};

}  // namespace

RegressionForest RegressionForest::fit(const std::vector<std::vector<double>>& rows,
                                       std::span<const double> targets,
                                       const ForestParams& params, std::uint64_t seed) {
  if (rows.empty() || rows.size() != targets.size()) {
    throw Error(ErrorCode::kValidation, "training rows and targets must be non-empty and equal");
  }
  if (params.trees < 1 || params.max_depth < 1 || params.min_samples_leaf < 1) {
    throw Error(ErrorCode::kValidation, "invalid forest parameters");
  }
  const std::size_t n_features = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != n_features) throw Error(ErrorCode::kValidation, "ragged training rows");
  }
  const std::size_t max_features =
      params.max_features > 0 ? static_cast<std::size_t>(params.max_features)
                              : std::max<std::size_t>(1, n_features / 3);

  RegressionForest forest;
  forest.feature_count_ = n_features;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < params.trees; ++t) {
    std::vector<std::size_t> sample(rows.size());
    for (auto& s : sample) s = draw(rng, rows.size());
    Builder b{rows, targets, params, max_features, rng, {}};
    b.build(std::move(sample), 0);
    forest.trees_.push_back(std::move(b.tree));
  }
  return forest;
}

double RegressionForest::predict(std::span<const double> row) const {
  if (row.size() != feature_count_) {
    throw Error(ErrorCode::kValidation, "feature vector length does not match the model");
  }
  double sum = 0.0;
  for (const auto& tree : trees_) {
    int node = 0;
    while (tree[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& n = tree[static_cast<std::size_t>(node)];
      node = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    sum += tree[static_cast<std::size_t>(node)].value;
  }
  return sum / static_cast<double>(trees_.size());
}

Json RegressionForest::to_json() const {
  Json trees = Json::array();
  for (const auto& tree : trees_) {
    Json feature = Json::array(), threshold = Json::array(), left = Json::array(),
         right = Json::array(), value = Json::array();
    for (const auto& n : tree) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"value", value}});
  }
  return {{"feature_count", feature_count_}, {"trees", trees}};
}

RegressionForest RegressionForest::from_json(const Json& j) {
  RegressionForest forest;
  try {
    forest.feature_count_ = j.at("feature_count").get<std::size_t>();
    for (const auto& t : j.at("trees")) {
      const auto& feature = t.at("feature");
      const std::size_t n = feature.size();
      if (n == 0 || t.at("threshold").size() != n || t.at("left").size() != n ||
          t.at("right").size() != n || t.at("value").size() != n) {
        throw Error(ErrorCode::kValidation, "forest tree arrays have inconsistent lengths");
      }
      Tree tree(n);
      for (std::size_t i = 0; i < n; ++i) {
        tree[i] = {feature[i].get<int>(), t["threshold"][i].get<double>(),
                   t["left"][i].get<int>(), t["right"][i].get<int>(),
                   t["value"][i].get<double>()};
        const auto& node = tree[i];
        if (node.feature >= static_cast<int>(forest.feature_count_) ||
            (node.feature >= 0 &&
             (node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
              node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n)))) {
          throw Error(ErrorCode::kValidation, "forest node references are out of range");
        }
      }
      forest.trees_.push_back(std::move(tree));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kValidation, std::string("malformed forest: ") + e.what());
  }
  if (forest.trees_.empty()) throw Error(ErrorCode::kValidation, "forest has no trees");
  return forest;
}

}  // namespace hg::analytics
