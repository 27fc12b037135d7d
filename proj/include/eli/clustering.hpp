#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "eli/eval.hpp"

namespace eli {

/// A grouping of mention keys into clusters (entities).
using Cluster = std::vector<std::string>;
using Clustering = std::vector<Cluster>;

/// Adds every key of `other` missing from `base` as a singleton cluster, so
/// two clusterings over different mention sets can be compared.
Clustering complete_universe(const Clustering& base, const Clustering& other);

/// Mention-averaged B-cubed precision/recall.
PRF b_cubed(const Clustering& gold, const Clustering& pred);

/// Link-based MUC. When a side has no links the corresponding ratio is 0,
/// except that two link-free (all-singleton) clusterings score 1.
PRF muc(const Clustering& gold, const Clustering& pred);

/// Entity-based CEAF with phi4(K, R) = 2|K n R| / (|K| + |R|) and the optimal
/// one-to-one cluster alignment.
PRF ceaf_e(const Clustering& gold, const Clustering& pred);

/// Maximum-weight assignment of rows to columns (Hungarian algorithm).
/// Returns, for each row, the matched column or -1 when rows > cols.
std::vector<long> max_weight_assignment(const Eigen::MatrixXd& weights);

}  // namespace eli
