#include "planar/kdtree.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace planar;
using namespace planar::testing;

namespace {

LabeledPointSet wall_grid(double step, int n, int label = 0) {
    LabeledPointSet s;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s.push_back(Vec3(0, i * step, j * step), label);
    return s;
}

PlaneInstance flat_instance(int cells, double v, double z_center) {
    PlaneInstance p;
    p.id = 3;
    p.normal = Vec3::UnitZ();
    p.offset = -z_center;
    p.voxel_size = v;
    const int k = static_cast<int>(std::floor(z_center / v));
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < cells; ++j) p.support.push_back({i, j, k});
    std::sort(p.support.begin(), p.support.end());
    return p;
}

std::vector<int> random_labels(std::mt19937_64& rng, int n, int k, double unlabeled = 0.0) {
    std::uniform_int_distribution<int> lab(0, k - 1);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<int> out(n);
    for (int& x : out) x = u(rng) < unlabeled ? -1 : lab(rng);
    return out;
}

void check_close(const SegmentationMetrics& a, const SegmentationMetrics& b, double tol) {
    CHECK(std::abs(a.voi - b.voi) < tol);
    CHECK(std::abs(a.ri - b.ri) < tol);
    CHECK(std::abs(a.sc - b.sc) < tol);
}

}  // namespace

TEST_CASE("plane resampling") {
    const PlaneInstance on = flat_instance(3, 0.04, 0.02);
    const auto proj = project_support(on);
    REQUIRE(proj.size() == on.support.size());
    for (std::size_t i = 0; i < proj.size(); ++i) CHECK((proj[i] - voxel_center(on.support[i], 0.04)).norm() < 1e-12);

    const PlaneInstance square = flat_instance(25, 0.04, 1.0);
    const LabeledPointSet pts = sample_plane_points(std::vector{square}, 0.02);
    CHECK(std::abs(static_cast<double>(pts.size()) - 2500.0) <= 250.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(pts.positions[i].z() == doctest::Approx(1.0));
        CHECK(pts.labels[i] == 3);
    }
    CHECK(sample_plane_points(std::vector<PlaneInstance>{}, 0.02).empty());
}

TEST_CASE("geometry metrics of identical and offset sets") {
    const LabeledPointSet gt = wall_grid(0.01, 40);
    const GeometryMetrics same = geometry_metrics(gt, gt);
    CHECK(same.comp == 0.0);
    CHECK(same.acc == 0.0);
    CHECK(same.prec == 1.0);
    CHECK(same.recall == 1.0);
    CHECK(same.fscore == 1.0);

    LabeledPointSet moved = gt;
    for (Vec3& p : moved.positions) p.x() += 0.03;
    const GeometryMetrics off = geometry_metrics(moved, gt, 0.05);
    CHECK(off.acc == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(off.comp == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(off.prec == 1.0);
    CHECK(off.recall == 1.0);

    LabeledPointSet half = gt;
    for (std::size_t i = 0; i < half.size() / 2; ++i) half.positions[i].x() += 0.10;
    CHECK(geometry_metrics(half, gt, 0.05).prec == doctest::Approx(0.5));

    CHECK_THROWS_AS(geometry_metrics(LabeledPointSet{}, gt), std::invalid_argument);
    CHECK_THROWS_AS(geometry_metrics(gt, LabeledPointSet{}), std::invalid_argument);
    CHECK(fscore_of(0, 0) == 0.0);
    CHECK(fscore_of(0.5, 1.0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("accuracy and completeness are dual") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 20; ++t) {
        LabeledPointSet a, b;
        for (int i = 0; i < 100 + t; ++i) a.push_back(Vec3(u(rng), u(rng), u(rng)), 0);
        for (int i = 0; i < 80 + 2 * t; ++i) b.push_back(Vec3(u(rng), u(rng), u(rng)), 0);
        const GeometryMetrics ab = geometry_metrics(a, b, 0.1), ba = geometry_metrics(b, a, 0.1);
        CHECK(ab.acc == ba.comp);
        CHECK(ab.prec == ba.recall);
        // direct mean nearest distance
        double sum = 0;
        for (const Vec3& p : a.positions) sum += (b.positions[brute_nearest(b.positions, p)] - p).norm();
        CHECK(ab.acc == doctest::Approx(sum / a.size()).epsilon(1e-12));
    }
}

TEST_CASE("label transfer") {
    const LabeledPointSet gt = [] {
        LabeledPointSet s = wall_grid(0.05, 10);
        for (std::size_t i = 0; i < s.size(); ++i) s.labels[i] = static_cast<int>(i % 7);
        return s;
    }();
    CHECK(transfer_labels(gt, gt) == gt.labels);

    LabeledPointSet one;
    one.push_back(Vec3(5, 5, 5), 9);
    for (int l : transfer_labels(gt, one)) CHECK(l == 9);

    LabeledPointSet two;
    two.push_back(Vec3(-1, 0, 0), 1);
    two.push_back(Vec3(1, 0.5, 0), 2);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-3, 3);
    LabeledPointSet q;
    for (int i = 0; i < 500; ++i) q.push_back(Vec3(u(rng), u(rng), u(rng)), -1);
    const auto labels = transfer_labels(q, two);
    const Vec3 mid(0, 0.25, 0), axis = Vec3(2, 0.5, 0).normalized();
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double side = axis.dot(q.positions[i] - mid);
        if (std::abs(side) < 1e-9) continue;
        CHECK(labels[i] == (side < 0 ? 1 : 2));
    }
    CHECK_THROWS_AS(transfer_labels(q, LabeledPointSet{}), std::invalid_argument);
}

TEST_CASE("segmentation metrics closed forms") {
    std::vector<int> gt(100), one(100, 0);
    for (int i = 0; i < 100; ++i) gt[i] = i < 50 ? 0 : 1;
    const SegmentationMetrics same = segmentation_metrics(gt, gt);
    CHECK(same.voi == 0.0);
    CHECK(same.ri == 1.0);
    CHECK(same.sc == 1.0);

    const SegmentationMetrics split = segmentation_metrics(gt, one);
    CHECK(split.ri == doctest::Approx(2 * pair_count(50) / pair_count(100)).epsilon(1e-12));
    CHECK(split.ri == doctest::Approx(0.4949).epsilon(1e-4));
    CHECK(split.voi == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(split.sc == doctest::Approx(0.5).epsilon(1e-12));

    std::vector<int> renamed = gt;
    for (int& x : renamed) x = x == 0 ? 17 : 4;
    const SegmentationMetrics r = segmentation_metrics(gt, renamed);
    CHECK(r.voi == 0.0);
    CHECK(r.ri == 1.0);
    CHECK(r.sc == 1.0);
}

TEST_CASE("segmentation metrics against enumeration") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 100; ++t) {
        const int n = 2 + static_cast<int>(rng() % 150);
        const auto a = random_labels(rng, n, 1 + static_cast<int>(rng() % 6), 0.1);
        const auto b = random_labels(rng, n, 1 + static_cast<int>(rng() % 6), 0.1);
        bool any = false;
        for (int i = 0; i < n; ++i) any |= a[i] >= 0 && b[i] >= 0;
        if (!any) continue;
        const SegmentationMetrics m = segmentation_metrics(a, b);
        check_close(m, brute_force_segmentation(a, b), 1e-9);
        CHECK(m.ri >= 0);
        CHECK(m.ri <= 1);
        CHECK(m.sc >= 0);
        CHECK(m.sc <= 1);
        CHECK(m.voi >= 0);

        // symmetric VOI and RI, order invariance
        const SegmentationMetrics swapped = segmentation_metrics(b, a);
        CHECK(std::abs(swapped.voi - m.voi) < 1e-12);
        CHECK(std::abs(swapped.ri - m.ri) < 1e-12);
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> pa(n), pb(n);
        for (int i = 0; i < n; ++i) pa[i] = a[perm[i]], pb[i] = b[perm[i]];
        check_close(segmentation_metrics(pa, pb), m, 1e-12);
    }
}

TEST_CASE("segmentation covering is directed") {
    std::vector<int> gt(100), one(100, 0);
    for (int i = 0; i < 100; ++i) gt[i] = i < 80 ? 0 : 1;
    // covering of {80, 20} by one segment: (80 * 0.8 + 20 * 0.2) / 100
    CHECK(segmentation_metrics(gt, one).sc == doctest::Approx(0.68));
    // covering of one segment by {80, 20}: best overlap 0.8
    CHECK(segmentation_metrics(one, gt).sc == doctest::Approx(0.8));

    const std::vector<int> masked{-1, -1, 0, 1};
    const std::vector<int> other{5, 6, 0, 1};
    CHECK(segmentation_metrics(masked, other).ri == 1.0);
    CHECK_THROWS_AS(segmentation_metrics(masked, std::vector<int>{1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(segmentation_metrics(std::vector<int>{-1, -1}, std::vector<int>{1, 2}), std::invalid_argument);
}

TEST_CASE("evaluation report and json") {
    LabeledPointSet gt = wall_grid(0.02, 20);
    for (std::size_t i = 0; i < gt.size(); ++i) gt.labels[i] = gt.positions[i].y() < 0.19 ? 0 : 1;
    const MetricsReport r = evaluate(gt, gt);
    CHECK(r.fscore == 1.0);
    CHECK(r.voi == 0.0);
    CHECK(r.ri == 1.0);
    CHECK(r.sc == 1.0);

    MetricsReport x;
    x.comp = 0.125;
    x.acc = 1.0 / 3.0;
    x.recall = 0.5;
    x.prec = 0.25;
    x.fscore = fscore_of(0.25, 0.5);
    x.voi = 3.622;
    x.ri = 0.897;
    x.sc = 0.248;
    const std::string json = to_json(x);
    for (const char* key : {"comp", "acc", "recall", "prec", "fscore", "voi", "ri", "sc"})
        CHECK(json.find(std::string("\"") + key + "\"") != std::string::npos);
    const MetricsReport back = metrics_from_json(json);
    CHECK(back.comp == x.comp);
    CHECK(back.acc == x.acc);
    CHECK(back.fscore == x.fscore);
    CHECK(back.sc == x.sc);
}

TEST_CASE("kd-tree agrees with a linear scan") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<Vec3> pts;
    for (int i = 0; i < 3000; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
    for (int i = 0; i < 200; ++i) pts.push_back(pts[i * 7]);   // duplicates: lower index must win
    for (int i = 0; i < 50; ++i) pts.emplace_back(std::round(u(rng) * 4) / 4, 0.5, 0.25);
    const KdTree tree(pts);
    CHECK(tree.size() == pts.size());
    for (int q = 0; q < 3000; ++q) {
        const Vec3 p = q % 3 == 0 ? pts[q] : Vec3(u(rng), u(rng), u(rng));
        const auto hit = tree.nearest(p);
        const int expect = brute_nearest(pts, p);
        CHECK(hit.index == expect);
        CHECK(hit.distance_sq == (pts[expect] - p).squaredNorm());
    }
    CHECK(KdTree().nearest(Vec3::Zero()).index == -1);
}
