#pragma once

#include "gsr/common.hpp"
#include "gsr/scene.hpp"

#include <Eigen/Eigenvalues>
#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <limits>
#include <utility>
#include <vector>

namespace gsr {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace detail {
using RPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using RBox = bg::model::box<RPoint>;

inline RPoint to_rpoint(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

/// Closest point on triangle abc to p (Ericson, Real-Time Collision
/// Detection, 5.1.5).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}
}  // namespace detail

/// Triangle mesh with an R-tree over triangle bounds for exact
/// nearest-triangle queries.
class MeshNormalField {
 public:
  explicit MeshNormalField(TriangleMesh mesh) : mesh_(std::move(mesh)) {
    if (mesh_.faces.empty()) throw Error(ErrorCode::kDomain, "mesh normal field: empty mesh");
    std::vector<std::pair<detail::RBox, std::size_t>> boxes;
    boxes.reserve(mesh_.faces.size());
    normals_.reserve(mesh_.faces.size());
    for (std::size_t f = 0; f < mesh_.faces.size(); ++f) {
      const auto& t = mesh_.faces[f];
      const Vec3& a = mesh_.vertices[t[0]];
      const Vec3& b = mesh_.vertices[t[1]];
      const Vec3& c = mesh_.vertices[t[2]];
      const Vec3 cross = (b - a).cross(c - a);
      if (!(cross.norm() > 1e-300)) throw Error(ErrorCode::kDomain, "mesh normal field: degenerate triangle " + std::to_string(f));
      normals_.push_back(cross.normalized());
      const Vec3 lo = a.cwiseMin(b).cwiseMin(c);
      const Vec3 hi = a.cwiseMax(b).cwiseMax(c);
      boxes.emplace_back(detail::RBox(detail::to_rpoint(lo), detail::to_rpoint(hi)), f);
    }
    tree_ = Tree(boxes.begin(), boxes.end());
  }

  struct Hit {
    std::size_t face = 0;
    Vec3 normal;
    Vec3 point;
    double distance = 0.0;
  };

  Hit nearest(const Vec3& p) const {
    Hit best;
    double best_d2 = std::numeric_limits<double>::infinity();
    const detail::RPoint q = detail::to_rpoint(p);
    for (auto it = tree_.qbegin(bgi::nearest(q, static_cast<unsigned>(tree_.size()))); it != tree_.qend(); ++it) {
      const double box_d2 = bg::comparable_distance(q, it->first);
      if (box_d2 > best_d2) break;
      const auto& t = mesh_.faces[it->second];
      const Vec3 cp = detail::closest_point_on_triangle(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                                        mesh_.vertices[t[2]]);
      const double d2 = (cp - p).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && it->second < best.face)) {
        best_d2 = d2;
        best.face = it->second;
        best.point = cp;
      }
    }
    best.normal = normals_[best.face];
    best.distance = std::sqrt(best_d2);
    return best;
  }

  const TriangleMesh& mesh() const { return mesh_; }

 private:
  using Tree = bgi::rtree<std::pair<detail::RBox, std::size_t>, bgi::rstar<16>>;
  TriangleMesh mesh_;
  std::vector<Vec3> normals_;
  Tree tree_;
};

struct NormalEstimate {
  std::vector<Vec3> normals;
  std::vector<bool> fallback;  // true where the radial direction was used
  std::size_t fallback_count() const { return static_cast<std::size_t>(std::count(fallback.begin(), fallback.end(), true)); }
};

inline Vec3 asset_centroid(const HeadAsset& asset) {
  Vec3 c = Vec3::Zero();
  for (const Splat& s : asset.splats) c += s.position.cast<double>();
  return c / static_cast<double>(asset.splats.size());
}

namespace detail {
inline Vec3 radial_from(const Vec3& p, const Vec3& centroid) {
  const Vec3 r = p - centroid;
  return r.norm() > 0.0 ? r.normalized() : Vec3::UnitZ();
}
}  // namespace detail

/// Nearest-triangle normal per splat.
inline NormalEstimate normal_from_mesh(const HeadAsset& asset, const MeshNormalField& field) {
  NormalEstimate out;
  out.normals.reserve(asset.splats.size());
  out.fallback.assign(asset.splats.size(), false);
  for (const Splat& s : asset.splats) out.normals.push_back(field.nearest(s.position.cast<double>()).normal);
  return out;
}

/// PCA normals: the smallest-eigenvalue eigenvector of the covariance of
/// the k nearest splat centers (self included), oriented away from the
/// asset centroid. Collinear or coincident neighborhoods fall back to the
/// radial direction and are flagged.
inline NormalEstimate normal_knn(const HeadAsset& asset, int k) {
  if (k < 3) throw Error(ErrorCode::kDomain, "normal_knn: k must be >= 3");
  using Value = std::pair<detail::RPoint, std::size_t>;
  std::vector<Value> pts;
  pts.reserve(asset.splats.size());
  for (std::size_t i = 0; i < asset.splats.size(); ++i)
    pts.emplace_back(detail::to_rpoint(asset.splats[i].position.cast<double>()), i);
  const bgi::rtree<Value, bgi::rstar<16>> tree(pts.begin(), pts.end());
  const Vec3 centroid = asset_centroid(asset);

  NormalEstimate out;
  out.normals.resize(asset.splats.size());
  out.fallback.assign(asset.splats.size(), false);
  std::vector<Value> hits;
  for (std::size_t i = 0; i < asset.splats.size(); ++i) {
    const Vec3 p = asset.splats[i].position.cast<double>();
    hits.clear();
    tree.query(bgi::nearest(pts[i].first, static_cast<unsigned>(k)), std::back_inserter(hits));
    Vec3 mean = Vec3::Zero();
    for (const auto& h : hits) mean += Vec3(bg::get<0>(h.first), bg::get<1>(h.first), bg::get<2>(h.first));
    mean /= static_cast<double>(hits.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& h : hits) {
      const Vec3 d = Vec3(bg::get<0>(h.first), bg::get<1>(h.first), bg::get<2>(h.first)) - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 ev = eig.eigenvalues();  // ascending
    const bool degenerate = hits.size() < 3 || !(ev[2] > 0.0) || ev[1] <= 1e-9 * ev[2];
    Vec3 n;
    if (degenerate) {
      n = detail::radial_from(p, centroid);
      out.fallback[i] = true;
    } else {
      n = eig.eigenvectors().col(0).normalized();
      if (n.dot(p - centroid) < 0.0) n = -n;
    }
    out.normals[i] = n;
  }
  return out;
}

/// Mean angle (degrees) between per-splat estimates and reference normals.
inline double mean_angular_error_deg(const std::vector<Vec3>& estimate, const std::vector<Vec3>& reference) {
  if (estimate.size() != reference.size() || estimate.empty())
    throw Error(ErrorCode::kShapeMismatch, "mean_angular_error_deg: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) sum += angle_deg(estimate[i], reference[i]);
  return sum / static_cast<double>(estimate.size());
}

}  // namespace gsr
