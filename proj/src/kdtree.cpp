#include "cfts/kdtree.hpp"

#include <algorithm>
#include <stdexcept>

namespace cfts {

namespace {

bool closer(const KdTree::Neighbor& a, const KdTree::Neighbor& b) {
  if (a.squared_distance != b.squared_distance) return a.squared_distance < b.squared_distance;
  return a.index < b.index;
}

}  // namespace

KdTree::KdTree(std::size_t dim, std::vector<double> points, std::size_t leaf_size)
    : dim_(dim), leaf_size_(std::max<std::size_t>(leaf_size, 1)), points_(std::move(points)) {
  if (dim_ == 0) throw std::invalid_argument("kd-tree dimension must be positive");
  if (points_.size() % dim_ != 0) throw std::invalid_argument("kd-tree point buffer is not a multiple of dim");
  count_ = points_.size() / dim_;
  order_.resize(count_);
  for (std::size_t i = 0; i < count_; ++i) order_[i] = i;
  if (count_ > 0) build(0, count_);
}

int KdTree::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  // Split on the dimension of widest spread.
  std::size_t best_dim = 0;
  double best_spread = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    double lo = points_[order_[begin] * dim_ + d];
    double hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      const double x = points_[order_[i] * dim_ + d];
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = d;
    }
  }
  if (best_spread == 0.0) return id;

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                     const double xa = points_[a * dim_ + best_dim];
                     const double xb = points_[b * dim_ + best_dim];
                     return xa < xb || (xa == xb && a < b);
                   });
  // Invariant: every left point <= split_value <= every right point on split_dim.
  const double split = points_[order_[mid] * dim_ + best_dim];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.split_dim = best_dim;
  node.split_value = split;
  node.left = left;
  node.right = right;
  return id;
}

double KdTree::squared_distance(std::size_t index, std::span<const double> query) const {
  const double* p = points_.data() + index * dim_;
  double ss = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double diff = p[i] - query[i];
    ss += diff * diff;
  }
  return ss;
}

void KdTree::search(int node_id, std::span<const double> query, std::size_t k,
                    std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.left < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      Neighbor cand{order_[i], squared_distance(order_[i], query)};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  const double diff = query[node.split_dim] - node.split_value;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, query, k, heap);
  // Points beyond the split are at least diff^2 away; equal bounds must still be
  // visited so that index tie-breaks match an exhaustive scan.
  if (heap.size() < k || diff * diff <= heap.front().squared_distance) search(far, query, k, heap);
}

std::vector<KdTree::Neighbor> KdTree::nearest(std::span<const double> query, std::size_t k) const {
  if (query.size() != dim_) throw std::invalid_argument("query dimension mismatch");
  std::vector<Neighbor> heap;
  if (k == 0 || count_ == 0) return heap;
  heap.reserve(std::min(k, count_));
  search(0, query, k, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

}  // namespace cfts
