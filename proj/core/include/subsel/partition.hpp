#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "subsel/rng.hpp"
#include "subsel/types.hpp"

namespace subsel {

// Random label-stratified partition: floor(K * p_important) groups take only
// important sets, the rest take only unimportant sets, sizes within a stratum
// differing by at most one. Throws when a stratum cannot fill its groups.
Partition random_partition(const std::vector<std::uint8_t>& important, int n_groups,
                           double p_important, RngStream& rng);

struct TreeConfig {
  int minsplit = 20;   // smallest node eligible for a split
  int minbucket = 7;   // smallest allowed child
  int maxdepth = 4;
  bool median_only = false;      // restrict candidate thresholds to the median
  double gain_threshold = 0.01;  // required relative variance reduction
  int max_thresholds = 256;      // candidate cap per feature (quantile grid)
};

// Variance-splitting regression tree on (covariates, response); leaves become
// groups. A degenerate response yields the single-group partition.
Partition tree_partition(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& response,
                         const TreeConfig& cfg);

// Rank covariates by their coefficient p-values in a joint least-squares fit
// of the response on all covariates (collinear columns dropped and ranked
// last); returns the best `keep` column indices.
std::vector<int> covariate_screen(const Eigen::MatrixXd& covariates,
                                  const Eigen::VectorXd& response, int keep);

}  // namespace subsel
