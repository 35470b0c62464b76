#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom::retrieval {

// Immutable (pooled feature, identity) records.
class GalleryIndex {
 public:
  GalleryIndex(const Tensor& features, std::vector<int> labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t width() const { return width_; }
  int label(std::size_t i) const { return labels_[i]; }
  std::span<const double> feature(std::size_t i) const {
    return {features_.data() + i * width_, width_};
  }

 private:
  std::size_t width_;
  std::vector<double> features_;
  std::vector<int> labels_;
};

double squared_distance(std::span<const double> a, std::span<const double> b);

// Gallery indices by ascending squared distance, ties by ascending index.
std::vector<std::size_t> rank_query(std::span<const double> query, const GalleryIndex& gallery);
// First entry of rank_query without the full sort.
std::size_t nearest(std::span<const double> query, const GalleryIndex& gallery);

bool top1_hit(std::span<const double> query, int label, const GalleryIndex& gallery);
// Rows of `queries` against the gallery.
double top1_accuracy(const Tensor& queries, const std::vector<int>& labels,
                     const GalleryIndex& gallery);

}  // namespace semcom::retrieval
