#include "rpl/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rpl/error.hpp"

namespace rpl {

bool BBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min <= x_max && y_min <= y_max;
}

double area(const BBox& b) { return b.width() * b.height(); }

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = area(a) + area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

ClassCatalog::ClassCatalog(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw Error(ErrorKind::InvalidArgument, "class catalog must hold at least one class");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw Error(ErrorKind::InvalidArgument, "duplicate class name '" + n + "'");
  }
}

ClassCatalog ClassCatalog::numbered(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < count; ++i) names.push_back("class" + std::to_string(i));
  return ClassCatalog(std::move(names));
}

std::optional<std::size_t> ClassCatalog::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t ClassDistribution::argmax() const {
  if (probs.empty()) throw Error(ErrorKind::Malformed, "empty class distribution");
  // First maximum wins so ties resolve to the lower class id.
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

void ClassDistribution::validate() const {
  if (probs.empty()) throw Error(ErrorKind::Malformed, "empty class distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::Malformed, "class probability outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::Malformed, "class probabilities do not sum to 1");
  if (!(objectness >= 0.0 && objectness <= 1.0)) throw Error(ErrorKind::Malformed, "objectness outside [0,1]");
}

ClassDistribution ClassDistribution::uniform(std::size_t classes, double objectness) {
  return {std::vector<double>(classes, 1.0 / static_cast<double>(classes)), objectness};
}

ScoredBox ScoredBox::from_distribution(const BBox& box, ClassDistribution dist, std::size_t proposal) {
  ScoredBox out;
  out.box = box;
  out.class_id = dist.argmax();
  out.score = dist.probs[out.class_id];
  out.dist = std::move(dist);
  out.proposal = proposal;
  return out;
}

std::size_t Dataset::feature_dim() const {
  for (const auto& f : frames) {
    if (!f.features.empty()) return f.feature_dim();
  }
  return 0;
}

void Dataset::validate() const {
  const std::size_t classes = catalog.size();
  if (classes == 0) throw Error(ErrorKind::Malformed, "dataset has an empty class catalog");
  const std::size_t dim = feature_dim();
  std::set<std::string> ids;
  for (const auto& f : frames) {
    if (!ids.insert(f.frame_id).second) throw Error(ErrorKind::Malformed, "duplicate frame_id '" + f.frame_id + "'");
    if (f.features.size() != f.boxes.size())
      throw Error(ErrorKind::Malformed, "frame '" + f.frame_id + "': one feature vector per box required");
    for (const auto& x : f.features) {
      if (x.size() != dim) throw Error(ErrorKind::Malformed, "frame '" + f.frame_id + "': inconsistent feature dimension");
    }
    for (const auto& b : f.boxes) {
      if (!b.box.valid()) throw Error(ErrorKind::Malformed, "frame '" + f.frame_id + "': invalid box");
      if (b.dist.probs.size() != classes)
        throw Error(ErrorKind::Malformed, "frame '" + f.frame_id + "': distribution length differs from catalog");
      b.dist.validate();
      if (!catalog.contains(b.class_id)) throw Error(ErrorKind::Malformed, "frame '" + f.frame_id + "': class id out of range");
    }
  }
  if (ground_truth) {
    if (ground_truth->size() != frames.size()) throw Error(ErrorKind::Malformed, "ground truth must have one entry per frame");
    for (const auto& truth : *ground_truth) {
      for (const auto& g : truth) {
        if (!catalog.contains(g.class_id)) throw Error(ErrorKind::Malformed, "ground-truth class id out of range");
        if (!g.box.valid()) throw Error(ErrorKind::Malformed, "invalid ground-truth box");
      }
    }
  }
}

}  // namespace rpl
