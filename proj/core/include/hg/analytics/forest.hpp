#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hg/domain/entities.hpp"

namespace hg::analytics {

struct ForestParams {
  int trees = 100;
  int max_depth = 12;
  int min_samples_leaf = 2;
  // Features tried per split; 0 picks max(1, n_features / 3).
  int max_features = 0;
};

// Bagged CART regression trees (variance reduction splits). Training is
// fully determined by the seed; predictions are bit-reproducible after a
// JSON round trip.
class RegressionForest {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  static RegressionForest fit(const std::vector<std::vector<double>>& rows,
                              std::span<const double> targets, const ForestParams& params,
                              std::uint64_t seed);

  double predict(std::span<const double> row) const;

  std::size_t feature_count() const { return feature_count_; }
  std::size_t tree_count() const { return trees_.size(); }

  Json to_json() const;
  static RegressionForest from_json(const Json& j);

 private:
  std::size_t feature_count_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace hg::analytics
