#include <algorithm>
#include <cmath>
#include <numeric>

#include "cogmac/error.hpp"
#include "cogmac/models.hpp"

namespace cogmac::models {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  std::size_t left_count = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& ds, int max_depth, int min_leaf) : max_depth_(max_depth), min_leaf_(min_leaf) {
    x_.reserve(ds.size());
    y_.reserve(ds.size());
    for (const auto& s : ds.samples) {
      x_.push_back(s.features.values());
      y_.push_back(s.plr);
    }
  }

  std::vector<TreeNode> build() {
    std::vector<std::size_t> idx(y_.size());
    std::iota(idx.begin(), idx.end(), 0);
    grow(idx, 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i : idx) {
      sum += y_[i];
      sumsq += y_[i] * y_[i];
    }
    const double n = static_cast<double>(idx.size());
    nodes_[id].value = sum / n;
    nodes_[id].samples = static_cast<int>(idx.size());
    const double sse = std::max(0.0, sumsq - sum * sum / n);

    const bool constant = std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return y_[i] == y_[idx[0]]; });
    if (depth >= max_depth_ || constant || idx.size() < 2 * static_cast<std::size_t>(min_leaf_)) return id;

    const Split best = best_split(idx, sum, sse);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) (x_[i][best.feature] < best.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();

    nodes_[id].feature = best.feature;
    nodes_[id].threshold = best.threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  // Exhaustive search; features in index order and thresholds ascending, so
  // strict improvement keeps the lowest feature, then lowest threshold, on ties.
  Split best_split(const std::vector<std::size_t>& idx, double total, double parent_sse) {
    Split best;
    const double n = static_cast<double>(idx.size());
    const double base = total * total / n;
    const double tie_tol = 1e-12 * std::max(parent_sse, 1e-300);
    std::vector<std::size_t> order(idx);
    for (int f = 0; f < static_cast<int>(kNumFeatures); ++f) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x_[a][f] != x_[b][f] ? x_[a][f] < x_[b][f] : a < b;
      });
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left_sum += y_[order[k]];
        const double lo = x_[order[k]][f];
        const double hi = x_[order[k + 1]][f];
        if (!(lo < hi)) continue;
        const std::size_t nl = k + 1;
        const std::size_t nr = order.size() - nl;
        if (nl < static_cast<std::size_t>(min_leaf_) || nr < static_cast<std::size_t>(min_leaf_)) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - base;
        if (gain > tie_tol && gain > best.gain + tie_tol) {
          best.feature = f;
          best.threshold = lo + (hi - lo) / 2.0;
          best.gain = gain;
          best.left_count = nl;
        }
      }
    }
    return best;
  }

  std::vector<Features> x_;
  std::vector<double> y_;
  int max_depth_;
  int min_leaf_;
  std::vector<TreeNode> nodes_;
};

int depth_below(const std::vector<TreeNode>& nodes, int id) {
  const TreeNode& n = nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) return 0;
  return 1 + std::max(depth_below(nodes, n.left), depth_below(nodes, n.right));
}

}  // namespace

int TreeModel::depth() const { return nodes.empty() ? 0 : depth_below(nodes, 0); }

int TreeModel::leaf_count() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

double raw_output(const TreeModel& m, const Features& x) {
  if (m.nodes.empty()) throw ContractViolation("predict: untrained tree");
  int id = 0;
  while (!m.nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const TreeNode& n = m.nodes[static_cast<std::size_t>(id)];
    id = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return m.nodes[static_cast<std::size_t>(id)].value;
}

TreeModel train_tree(const Dataset& dataset, int max_depth, int min_samples_leaf) {
  if (max_depth < 0) throw TrainingError("train_tree: max_depth must be >= 0");
  if (min_samples_leaf < 1) throw TrainingError("train_tree: min_samples_leaf must be >= 1");
  if (dataset.empty() || dataset.size() < static_cast<std::size_t>(min_samples_leaf)) {
    throw TrainingError("train_tree: fewer samples than min_samples_leaf");
  }
  TreeModel m;
  m.max_depth = max_depth;
  m.min_samples_leaf = min_samples_leaf;
  m.nodes = TreeBuilder(dataset, max_depth, min_samples_leaf).build();
  double sse = 0.0;
  for (const auto& s : dataset.samples) {
    const double r = raw_output(m, s.features.values()) - s.plr;
    sse += r * r;
  }
  m.meta.final_loss = sse / static_cast<double>(dataset.size());
  m.meta.interval_s = dataset.interval_s;
  return m;
}

}  // namespace cogmac::models
