#include "planar/mesh.hpp"

#include "planar/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace planar {

std::vector<Cell> remove_saddles(std::span<const Cell> cells) {
    std::set<Cell> s(cells.begin(), cells.end());
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<Cell> fill;
        for (const auto& [i, j] : s) {
            if (s.count({i + 1, j + 1}) && !s.count({i + 1, j}) && !s.count({i, j + 1})) fill.push_back({i, j + 1});
            if (s.count({i + 1, j - 1}) && !s.count({i + 1, j}) && !s.count({i, j - 1})) fill.push_back({i, j - 1});
        }
        for (const Cell& c : fill) changed |= s.insert(c).second;
    }
    return {s.begin(), s.end()};
}

std::vector<std::vector<Vec2>> contour_cells(std::span<const Cell> cells) {
    const std::set<Cell> s(cells.begin(), cells.end());
    auto has = [&](std::int64_t i, std::int64_t j) { return s.count({i, j}) > 0; };
    std::map<Cell, Cell> next;   // directed boundary edges, occupied side on the left
    auto add = [&](Cell a, Cell b) {
        if (!next.emplace(a, b).second) throw std::invalid_argument("contour_cells: saddle in cell set");
    };
    for (const auto& [i, j] : s) {
        if (!has(i, j - 1)) add({i, j}, {i + 1, j});
        if (!has(i + 1, j)) add({i + 1, j}, {i + 1, j + 1});
        if (!has(i, j + 1)) add({i + 1, j + 1}, {i, j + 1});
        if (!has(i - 1, j)) add({i, j + 1}, {i, j});
    }

    std::vector<std::vector<Vec2>> loops;
    while (!next.empty()) {
        std::vector<Cell> corners;
        Cell c = next.begin()->first;
        while (true) {
            auto it = next.find(c);
            if (it == next.end()) break;
            corners.push_back(c);
            c = it->second;
            next.erase(it);
        }
        std::vector<Vec2> loop;
        const std::size_t n = corners.size();
        for (std::size_t k = 0; k < n; ++k) {
            const Cell& p = corners[(k + n - 1) % n];
            const Cell& q = corners[k];
            const Cell& r = corners[(k + 1) % n];
            const bool straight = (q.first - p.first) * (r.second - q.second) == (q.second - p.second) * (r.first - q.first);
            if (!straight) loop.emplace_back(static_cast<double>(q.first), static_cast<double>(q.second));
        }
        loops.push_back(std::move(loop));
    }
    return loops;
}

std::array<std::uint8_t, 3> plane_color(int id) {
    // golden-ratio hue walk at full saturation
    const double h = std::fmod(0.618033988749895 * static_cast<double>(id < 0 ? 0 : id) + 0.13, 1.0) * 6.0;
    const double f = h - std::floor(h);
    const double v = 0.95, p = 0.25, qv = v - (v - p) * f, t = p + (v - p) * f;
    double r, g, b;
    switch (static_cast<int>(h) % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = qv; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = qv; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = qv; break;
    }
    auto u8 = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * x)); };
    return {u8(r), u8(g), u8(b)};
}

io::Mesh plane_patch(const PlaneInstance& plane) {
    io::Mesh mesh;
    if (plane.support.empty()) return mesh;
    const Vec3 n = plane.normal.normalized();
    const Vec3 origin = -plane.offset * n;
    const auto [e1, e2] = plane_basis<double>(n);
    const double s = plane.voxel_size;

    std::vector<Cell> raw;
    raw.reserve(plane.support.size());
    for (const VoxelKey& k : plane.support) {
        const Vec3 p = project_to_plane<double>(voxel_center(k, s), n, plane.offset) - origin;
        raw.push_back({static_cast<std::int64_t>(std::floor(e1.dot(p) / s)),
                       static_cast<std::int64_t>(std::floor(e2.dot(p) / s))});
    }
    const std::vector<Cell> cells = remove_saddles(raw);
    const auto colour = plane_color(plane.id);
    auto lift = [&](const Vec2& q) { return Vec3(origin + (q.x() * s) * e1 + (q.y() * s) * e2); };

    // outer loops with the holes they directly enclose
    const auto loops = contour_cells(cells);
    std::vector<std::size_t> outers;
    std::vector<std::vector<std::vector<Vec2>>> holes_of;
    for (std::size_t i = 0; i < loops.size(); ++i)
        if (signed_area(loops[i]) > 0) outers.push_back(i);
    holes_of.resize(outers.size());
    for (const auto& loop : loops) {
        if (signed_area(loop) > 0) continue;
        // a point just left of the first edge lies in the occupied region
        const Vec2 d = (loop[1] - loop[0]).normalized();
        const Vec2 probe = 0.5 * (loop[0] + loop[1]) + 0.25 * Vec2(-d.y(), d.x());
        std::size_t owner = outers.size();
        double owner_area = std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < outers.size(); ++o) {
            const double area = signed_area(loops[outers[o]]);
            if (area < owner_area && point_in_ring(probe, loops[outers[o]])) {
                owner = o;
                owner_area = area;
            }
        }
        if (owner == outers.size()) throw std::logic_error("plane_patch: orphan hole");
        holes_of[owner].push_back(loop);
    }

    std::vector<Vec2> verts;
    bool ok = true;
    try {
        for (std::size_t o = 0; o < outers.size(); ++o) {
            const auto tris = triangulate(loops[outers[o]], holes_of[o], verts);
            const int base = static_cast<int>(mesh.vertices.size());
            for (const Vec2& q : verts) mesh.vertices.push_back(lift(q));
            for (const auto& t : tris) {
                mesh.faces.push_back({base + t[0], base + t[1], base + t[2]});
                mesh.face_colors.push_back(colour);
            }
        }
    } catch (const std::runtime_error&) {
        ok = false;
    }
    if (ok) return mesh;

    // Clipping stalled on degenerate input: cover the cells by row runs instead.
    mesh = {};
    for (std::size_t k = 0; k < cells.size();) {
        std::size_t e = k + 1;
        while (e < cells.size() && cells[e].first == cells[k].first && cells[e].second == cells[e - 1].second + 1) ++e;
        const double x0 = static_cast<double>(cells[k].first), y0 = static_cast<double>(cells[k].second);
        const double y1 = static_cast<double>(cells[e - 1].second + 1);
        const int base = static_cast<int>(mesh.vertices.size());
        for (const Vec2& q : {Vec2(x0, y0), Vec2(x0 + 1, y0), Vec2(x0 + 1, y1), Vec2(x0, y1)})
            mesh.vertices.push_back(lift(q));
        mesh.faces.push_back({base, base + 1, base + 2});
        mesh.faces.push_back({base, base + 2, base + 3});
        mesh.face_colors.push_back(colour);
        mesh.face_colors.push_back(colour);
        k = e;
    }
    return mesh;
}

io::Mesh planes_mesh(std::span<const PlaneInstance> planes) {
    io::Mesh out;
    for (const PlaneInstance& p : planes) {
        const io::Mesh part = plane_patch(p);
        const int base = static_cast<int>(out.vertices.size());
        out.vertices.insert(out.vertices.end(), part.vertices.begin(), part.vertices.end());
        for (const auto& f : part.faces) out.faces.push_back({base + f[0], base + f[1], base + f[2]});
        out.face_colors.insert(out.face_colors.end(), part.face_colors.begin(), part.face_colors.end());
    }
    return out;
}

void export_planes_mesh(const GlobalPlaneMap& map, const std::filesystem::path& path) {
    if (map.planes.empty()) throw std::invalid_argument("export_planes_mesh: empty plane map");
    io::write_ply_mesh(path, planes_mesh(map.planes));
}

}  // namespace planar
