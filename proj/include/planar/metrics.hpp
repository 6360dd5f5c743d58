#pragma once

#include "planar/clustering.hpp"

#include <span>
#include <string>
#include <vector>

namespace planar {

struct LabeledPointSet {
    std::vector<Vec3> positions;
    std::vector<int> labels;   ///< -1 = unlabeled

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }
    void push_back(const Vec3& p, int label) {
        positions.push_back(p);
        labels.push_back(label);
    }
};

LabeledPointSet to_labeled(std::span<const OrientedPoint> points);

/// Support voxel centres of `instance` projected onto its plane.
std::vector<Vec3> project_support(const PlaneInstance& instance);

/// Each instance's projected support footprint (one voxel-sized square per
/// voxel, in the plane) resampled on a planar grid at `spacing`. Points are
/// labelled with the instance id, or its list index when the id is unset.
LabeledPointSet sample_plane_points(std::span<const PlaneInstance> instances, double spacing);

struct GeometryMetrics {
    double comp = 0.0;     ///< mean gt -> pred distance, meters
    double acc = 0.0;      ///< mean pred -> gt distance, meters
    double recall = 0.0;
    double prec = 0.0;
    double fscore = 0.0;
};

double fscore_of(double prec, double recall);

/// Throws std::invalid_argument when either side is empty.
GeometryMetrics geometry_metrics(const LabeledPointSet& pred, const LabeledPointSet& gt, double tau = 0.05);

/// Label of the nearest pred point for every gt point (ties to the lower pred index).
std::vector<int> transfer_labels(const LabeledPointSet& gt, const LabeledPointSet& pred);

struct SegmentationMetrics {
    double voi = 0.0;   ///< nats
    double ri = 0.0;
    double sc = 0.0;
};

/// VOI, RI and SC of `pred` against `gt`. Positions where either label is -1
/// are skipped. Throws on length mismatch or when nothing is labelled.
SegmentationMetrics segmentation_metrics(std::span<const int> gt, std::span<const int> pred);

struct MetricsReport {
    double comp = 0.0;
    double acc = 0.0;
    double recall = 0.0;
    double prec = 0.0;
    double fscore = 0.0;
    double voi = 0.0;
    double ri = 0.0;
    double sc = 0.0;
};

/// Geometry metrics between the sampled prediction and gt, then segmentation
/// metrics on gt after label transfer from the prediction.
MetricsReport evaluate(const LabeledPointSet& pred, const LabeledPointSet& gt, double tau = 0.05);

/// Flat JSON object with the eight field names.
std::string to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& text);

}  // namespace planar
