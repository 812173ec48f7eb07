#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cfts {

/// Exact k-nearest-neighbor index over fixed-dimension points (squared
/// Euclidean distance). Points are identified by insertion index; equal
/// distances are ordered by ascending index.
class KdTree {
 public:
  struct Neighbor {
    std::size_t index;
    double squared_distance;
  };

  KdTree() = default;
  /// `points` holds `count * dim` values, one point per contiguous row.
  KdTree(std::size_t dim, std::vector<double> points, std::size_t leaf_size = 8);

  std::size_t size() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return count_ == 0; }
  std::span<const double> point(std::size_t index) const {
    return std::span<const double>(points_).subspan(index * dim_, dim_);
  }

  /// The min(k, size()) closest points, ascending by (distance, index).
  std::vector<Neighbor> nearest(std::span<const double> query, std::size_t k) const;

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t split_dim = 0;
    double split_value = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, std::span<const double> query, std::size_t k, std::vector<Neighbor>& heap) const;
  double squared_distance(std::size_t index, std::span<const double> query) const;

  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::size_t leaf_size_ = 8;
  std::vector<double> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace cfts
