#include "eli/clustering.hpp"

#include <limits>
#include <map>
#include <set>

#include "eli/error.hpp"

namespace eli {

namespace {

// key -> cluster index; rejects a key listed twice.
std::map<std::string, std::size_t> index_clusters(const Clustering& c) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t k = 0; k < c.size(); ++k) {
    for (const auto& m : c[k]) {
      if (!idx.emplace(m, k).second) {
        throw InvalidArgument("mention '" + m + "' appears in more than one cluster");
      }
    }
  }
  return idx;
}

Clustering drop_empty(const Clustering& c) {
  Clustering out;
  for (const auto& k : c) {
    if (!k.empty()) out.push_back(k);
  }
  return out;
}

std::size_t overlap(const Cluster& a, const Cluster& b) {
  const std::set<std::string> sa(a.begin(), a.end());
  std::size_t n = 0;
  for (const auto& m : b) n += sa.count(m);
  return n;
}

// Sum over `key` clusters of |K| - (number of `response` clusters K touches).
std::size_t muc_numerator(const Clustering& key, const std::map<std::string, std::size_t>& response) {
  std::size_t total = 0;
  for (const auto& k : key) {
    std::set<std::size_t> parts;
    for (const auto& m : k) parts.insert(response.at(m));
    total += k.size() - parts.size();
  }
  return total;
}

std::size_t link_count(const Clustering& c) {
  std::size_t n = 0;
  for (const auto& k : c) n += k.size() - 1;
  return n;
}

}  // namespace

Clustering complete_universe(const Clustering& base, const Clustering& other) {
  Clustering out = drop_empty(base);
  const auto idx = index_clusters(out);
  std::set<std::string> added;
  for (const auto& k : other) {
    for (const auto& m : k) {
      if (idx.count(m) == 0 && added.insert(m).second) out.push_back({m});
    }
  }
  return out;
}

PRF b_cubed(const Clustering& gold_in, const Clustering& pred_in) {
  const Clustering gold = complete_universe(gold_in, pred_in);
  const Clustering pred = complete_universe(pred_in, gold_in);
  const auto gi = index_clusters(gold);
  const auto pi = index_clusters(pred);
  if (gi.empty()) return PRF::from_scores(1.0, 1.0);
  double p = 0.0, r = 0.0;
  for (const auto& [m, g] : gi) {
    const std::size_t c = overlap(gold[g], pred[pi.at(m)]);
    p += static_cast<double>(c) / static_cast<double>(pred[pi.at(m)].size());
    r += static_cast<double>(c) / static_cast<double>(gold[g].size());
  }
  const auto n = static_cast<double>(gi.size());
  return PRF::from_scores(p / n, r / n);
}

PRF muc(const Clustering& gold_in, const Clustering& pred_in) {
  const Clustering gold = complete_universe(gold_in, pred_in);
  const Clustering pred = complete_universe(pred_in, gold_in);
  const auto gi = index_clusters(gold);
  const auto pi = index_clusters(pred);
  const std::size_t gold_links = link_count(gold);
  const std::size_t pred_links = link_count(pred);
  if (gold_links == 0 && pred_links == 0) return PRF::from_scores(1.0, 1.0);
  const double recall = gold_links == 0 ? 0.0
                                        : static_cast<double>(muc_numerator(gold, pi)) /
                                              static_cast<double>(gold_links);
  const double precision = pred_links == 0 ? 0.0
                                           : static_cast<double>(muc_numerator(pred, gi)) /
                                                 static_cast<double>(pred_links);
  return PRF::from_scores(precision, recall);
}

PRF ceaf_e(const Clustering& gold_in, const Clustering& pred_in) {
  const Clustering gold = complete_universe(gold_in, pred_in);
  const Clustering pred = complete_universe(pred_in, gold_in);
  index_clusters(gold);
  index_clusters(pred);
  if (gold.empty() && pred.empty()) return PRF::from_scores(1.0, 1.0);
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(gold.size()), static_cast<Eigen::Index>(pred.size()));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t j = 0; j < pred.size(); ++j) {
      phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          2.0 * static_cast<double>(overlap(gold[i], pred[j])) /
          static_cast<double>(gold[i].size() + pred[j].size());
    }
  }
  const auto assignment = max_weight_assignment(phi);
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] >= 0) total += phi(static_cast<Eigen::Index>(i), assignment[i]);
  }
  return PRF::from_scores(total / static_cast<double>(pred.size()),
                          total / static_cast<double>(gold.size()));
}

std::vector<long> max_weight_assignment(const Eigen::MatrixXd& weights) {
  const long rows = weights.rows();
  const long cols = weights.cols();
  const long n = std::max(rows, cols);
  if (n == 0) return {};
  const double top = weights.size() > 0 ? weights.maxCoeff() : 0.0;
  // Square min-cost problem; padding cells cost `top` (weight 0).
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, top);
  cost.topLeftCorner(rows, cols) = top - weights.array();

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<long> p(n + 1, 0), way(n + 1, 0);
  for (long i = 1; i <= n; ++i) {
    p[0] = i;
    long j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const long i0 = p[j0];
      double delta = inf;
      long j1 = 0;
      for (long j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (long j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const long j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<long> result(static_cast<std::size_t>(rows), -1);
  for (long j = 1; j <= n; ++j) {
    const long i = p[j] - 1;
    if (i < rows && j - 1 < cols) result[static_cast<std::size_t>(i)] = j - 1;
  }
  return result;
}

}  // namespace eli
