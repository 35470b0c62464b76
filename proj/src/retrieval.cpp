#include "semcom/retrieval.hpp"

#include <algorithm>
#include <numeric>

#include "semcom/error.hpp"

namespace semcom::retrieval {

GalleryIndex::GalleryIndex(const Tensor& features, std::vector<int> labels)
    : width_(features.rank() == 2 ? features.cols() : 0), features_(features.values),
      labels_(std::move(labels)) {
  if (features.rank() != 2) throw ShapeError("gallery features must be [entries, width]");
  if (labels_.empty() || features.rows() == 0) throw ValidationError("empty gallery");
  if (features.rows() != labels_.size()) throw ShapeError("one gallery label per entry required");
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

namespace {

void check_width(std::span<const double> q, const GalleryIndex& g) {
  if (q.size() != g.width()) {
    throw ShapeError("query width " + std::to_string(q.size()) + " differs from gallery width " +
                     std::to_string(g.width()));
  }
}

}  // namespace

std::vector<std::size_t> rank_query(std::span<const double> query, const GalleryIndex& gallery) {
  check_width(query, gallery);
  std::vector<double> dist(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) dist[i] = squared_distance(query, gallery.feature(i));
  std::vector<std::size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  return order;
}

std::size_t nearest(std::span<const double> query, const GalleryIndex& gallery) {
  check_width(query, gallery);
  std::size_t best = 0;
  double best_d = squared_distance(query, gallery.feature(0));
  for (std::size_t i = 1; i < gallery.size(); ++i) {
    const double d = squared_distance(query, gallery.feature(i));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

bool top1_hit(std::span<const double> query, int label, const GalleryIndex& gallery) {
  return gallery.label(nearest(query, gallery)) == label;
}

double top1_accuracy(const Tensor& queries, const std::vector<int>& labels,
                     const GalleryIndex& gallery) {
  if (queries.rank() != 2 || queries.rows() != labels.size()) {
    throw ShapeError("one label per query row required");
  }
  if (labels.empty()) throw ValidationError("top-1 needs at least one query");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < queries.rows(); ++r) hits += top1_hit(queries.row_span(r), labels[r], gallery);
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace semcom::retrieval
