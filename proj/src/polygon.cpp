#include "planar/polygon.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace planar {
namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); }

bool same_point(const Vec2& a, const Vec2& b) { return a.x() == b.x() && a.y() == b.y(); }

bool in_triangle_closed(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
    return orient(a, b, p) >= 0 && orient(b, c, p) >= 0 && orient(c, a, p) >= 0;
}

// Splices `hole` (indices into v) into `ring`. The bridge runs from the hole's
// right-most vertex along +x to the first ring edge it meets.
void bridge_hole(std::vector<int>& ring, const std::vector<int>& hole, std::vector<Vec2>& v) {
    std::size_t mi = 0;
    for (std::size_t i = 1; i < hole.size(); ++i) {
        const Vec2& a = v[hole[i]];
        const Vec2& b = v[hole[mi]];
        if (a.x() > b.x() || (a.x() == b.x() && a.y() < b.y())) mi = i;
    }
    const Vec2 m = v[hole[mi]];

    double best = std::numeric_limits<double>::infinity();
    std::size_t edge = ring.size();
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const Vec2& a = v[ring[i]];
        const Vec2& b = v[ring[(i + 1) % ring.size()]];
        if (a.y() == b.y()) continue;
        if (m.y() < std::min(a.y(), b.y()) || m.y() > std::max(a.y(), b.y())) continue;
        const double x = a.x() + (m.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
        if (x > m.x() && x < best) {
            best = x;
            edge = i;
        }
    }
    if (edge == ring.size()) throw std::runtime_error("triangulate: hole outside the outer ring");

    // A vertex hit can appear several times after earlier bridges; take the
    // copy whose interior wedge contains the bridge.
    const Vec2 hit(best, m.y());
    const std::size_t n = ring.size();
    std::size_t at = n;
    for (std::size_t i = 0; i < n && at == n; ++i) {
        if (!same_point(v[ring[i]], hit)) continue;
        const Vec2& p = v[ring[(i + n - 1) % n]];
        const Vec2& q = v[ring[(i + 1) % n]];
        const bool left_out = orient(hit, q, m) > 0;
        const bool left_in = orient(p, hit, m) > 0;
        if (orient(p, hit, q) >= 0 ? (left_in && left_out) : (left_in || left_out)) at = i;
    }
    if (at == n) {
        v.push_back(hit);
        ring.insert(ring.begin() + static_cast<std::ptrdiff_t>(edge + 1), static_cast<int>(v.size() - 1));
        at = edge + 1;
    }

    std::vector<int> splice;
    splice.reserve(hole.size() + 2);
    for (std::size_t k = 0; k <= hole.size(); ++k) splice.push_back(hole[(mi + k) % hole.size()]);
    splice.push_back(ring[at]);
    ring.insert(ring.begin() + static_cast<std::ptrdiff_t>(at + 1), splice.begin(), splice.end());
}

}  // namespace

double signed_area(std::span<const Vec2> ring) {
    double a = 0.0;
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) a += cross(ring[i], ring[(i + 1) % n]);
    return 0.5 * a;
}

bool point_in_ring(const Vec2& p, std::span<const Vec2> ring) {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = ring[i];
        const Vec2& b = ring[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

Ring simplify_collinear(const Ring& ring) {
    Ring out;
    for (const Vec2& p : ring) {
        if (out.empty() || !same_point(out.back(), p)) out.push_back(p);
    }
    while (out.size() > 1 && same_point(out.front(), out.back())) out.pop_back();

    bool changed = true;
    while (changed && out.size() > 3) {
        changed = false;
        Ring next;
        const std::size_t n = out.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = out[(i + n - 1) % n];
            const Vec2& b = out[i];
            const Vec2& c = out[(i + 1) % n];
            // Only drop b when it lies between a and c; spikes are kept.
            if (orient(a, b, c) == 0.0 && (b - a).dot(c - b) > 0.0) {
                changed = true;
                continue;
            }
            next.push_back(b);
        }
        out.swap(next);
    }
    return out;
}

std::vector<Triangle> triangulate(const Ring& outer_in, const std::vector<Ring>& holes_in,
                                  std::vector<Vec2>& vertices) {
    vertices.clear();
    std::vector<Triangle> tris;
    Ring outer = simplify_collinear(outer_in);
    if (outer.size() < 3) return tris;
    if (signed_area(outer) < 0) std::reverse(outer.begin(), outer.end());

    std::vector<int> ring;
    for (const Vec2& p : outer) {
        ring.push_back(static_cast<int>(vertices.size()));
        vertices.push_back(p);
    }
    std::vector<std::vector<int>> holes;
    std::vector<double> hole_max_x;
    for (const Ring& h : holes_in) {
        Ring r = simplify_collinear(h);
        if (r.size() < 3) continue;
        if (signed_area(r) > 0) std::reverse(r.begin(), r.end());
        std::vector<int> idx;
        double mx = -std::numeric_limits<double>::infinity();
        for (const Vec2& p : r) {
            idx.push_back(static_cast<int>(vertices.size()));
            vertices.push_back(p);
            mx = std::max(mx, p.x());
        }
        holes.push_back(std::move(idx));
        hole_max_x.push_back(mx);
    }
    // Right-most holes first, so a bridge never crosses a hole still to come.
    std::vector<std::size_t> order(holes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return hole_max_x[a] > hole_max_x[b]; });
    for (std::size_t h : order) bridge_hole(ring, holes[h], vertices);

    const int n = static_cast<int>(ring.size());
    std::vector<int> prev(n), next(n);
    for (int i = 0; i < n; ++i) {
        prev[i] = (i + n - 1) % n;
        next[i] = (i + 1) % n;
    }
    auto at = [&](int pos) -> const Vec2& { return vertices[ring[pos]]; };
    auto unlink = [&](int pos) {
        next[prev[pos]] = next[pos];
        prev[next[pos]] = prev[pos];
    };

    int active = n, cur = 0, stall = 0;
    while (active > 3) {
        const int p = prev[cur], q = next[cur];
        const Vec2& a = at(p);
        const Vec2& b = at(cur);
        const Vec2& c = at(q);
        const double turn = orient(a, b, c);
        if (turn == 0.0) {   // collinear or zero length: drop without a face
            unlink(cur);
            --active;
            cur = p;
            stall = 0;
            continue;
        }
        bool ear = turn > 0.0;
        for (int k = next[q]; ear && k != p; k = next[k]) {
            const Vec2& r = at(k);
            if (same_point(r, a) || same_point(r, b) || same_point(r, c)) continue;
            if (in_triangle_closed(a, b, c, r)) ear = false;
        }
        if (ear) {
            tris.push_back({ring[p], ring[cur], ring[q]});
            unlink(cur);
            --active;
            cur = p;
            stall = 0;
        } else {
            cur = q;
            if (++stall > active) throw std::runtime_error("triangulate: ear clipping stalled");
        }
    }
    if (orient(at(prev[cur]), at(cur), at(next[cur])) > 0.0)
        tris.push_back({ring[prev[cur]], ring[cur], ring[next[cur]]});
    return tris;
}

}  // namespace planar
