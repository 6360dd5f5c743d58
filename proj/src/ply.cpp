#include "planar/ply.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace planar::io {

namespace {

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

struct Property {
    std::string name;
    std::string type;
    std::string count_type;   // non-empty for list properties
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> props;
};

std::size_t type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    throw std::runtime_error("ply: unknown property type '" + t + "'");
}

class PlyReader {
public:
    explicit PlyReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw std::runtime_error("cannot open " + path.string());
        std::string line;
        std::getline(in_, line);
        if (line.rfind("ply", 0) != 0) throw std::runtime_error("not a PLY file: " + path.string());
        while (std::getline(in_, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::istringstream ls(line);
            std::string word;
            ls >> word;
            if (word == "format") {
                std::string fmt;
                ls >> fmt;
                if (fmt == "ascii") ascii_ = true;
                else if (fmt != "binary_little_endian") throw std::runtime_error("ply: unsupported format " + fmt);
            } else if (word == "element") {
                Element e;
                ls >> e.name >> e.count;
                elements_.push_back(e);
            } else if (word == "property") {
                if (elements_.empty()) throw std::runtime_error("ply: property before element");
                Property p;
                std::string t;
                ls >> t;
                if (t == "list") {
                    ls >> p.count_type >> p.type >> p.name;
                    type_size(p.count_type);
                } else {
                    p.type = t;
                    ls >> p.name;
                }
                type_size(p.type);
                elements_.back().props.push_back(p);
            } else if (word == "end_header") {
                return;
            }
        }
        throw std::runtime_error("ply: missing end_header in " + path.string());
    }

    const std::vector<Element>& elements() const { return elements_; }

    double value(const std::string& type) {
        if (ascii_) {
            double v;
            if (!(in_ >> v)) fail();
            return v;
        }
        unsigned char buf[8];
        const std::size_t n = type_size(type);
        if (!in_.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n))) fail();
        auto as = [&]<typename T>(T) {
            T v;
            std::memcpy(&v, buf, sizeof(T));
            return static_cast<double>(v);
        };
        if (type == "char" || type == "int8") return as(std::int8_t{});
        if (type == "uchar" || type == "uint8") return as(std::uint8_t{});
        if (type == "short" || type == "int16") return as(std::int16_t{});
        if (type == "ushort" || type == "uint16") return as(std::uint16_t{});
        if (type == "int" || type == "int32") return as(std::int32_t{});
        if (type == "uint" || type == "uint32") return as(std::uint32_t{});
        if (type == "float" || type == "float32") return as(float{});
        return as(double{});
    }

    /// One element row: scalar properties in order, list properties flattened
    /// into `lists` (one vector per list property).
    void row(const Element& e, std::vector<double>& scalars, std::vector<std::vector<double>>& lists) {
        scalars.clear();
        lists.clear();
        for (const Property& p : e.props) {
            if (p.count_type.empty()) {
                scalars.push_back(value(p.type));
            } else {
                const auto n = static_cast<std::size_t>(value(p.count_type));
                std::vector<double> l(n);
                for (double& v : l) v = value(p.type);
                lists.push_back(std::move(l));
            }
        }
    }

private:
    [[noreturn]] void fail() { throw std::runtime_error("ply: truncated data in " + path_.string()); }

    std::filesystem::path path_;
    std::ifstream in_;
    bool ascii_ = false;
    std::vector<Element> elements_;
};

int scalar_index(const Element& e, const std::string& name) {
    int i = 0;
    for (const Property& p : e.props) {
        if (!p.count_type.empty()) continue;
        if (p.name == name) return i;
        ++i;
    }
    return -1;
}

}  // namespace

void write_ply_mesh(const std::filesystem::path& path, const Mesh& mesh) {
    if (mesh.face_colors.size() != mesh.faces.size()) throw std::invalid_argument("write_ply_mesh: colour count");
    std::ofstream out = open_out(path);
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << mesh.vertices.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "element face " << mesh.faces.size() << "\n"
        << "property list uchar int vertex_indices\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        << "end_header\n";
    for (const Vec3& v : mesh.vertices) {
        put(out, v.x());
        put(out, v.y());
        put(out, v.z());
    }
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        put<std::uint8_t>(out, 3);
        for (int i : mesh.faces[f]) put<std::int32_t>(out, i);
        for (std::uint8_t c : mesh.face_colors[f]) put(out, c);
    }
    finish(out, path);
}

Mesh read_ply_mesh(const std::filesystem::path& path) {
    PlyReader r(path);
    Mesh mesh;
    std::vector<double> s;
    std::vector<std::vector<double>> lists;
    for (const Element& e : r.elements()) {
        if (e.name == "vertex") {
            const int ix = scalar_index(e, "x"), iy = scalar_index(e, "y"), iz = scalar_index(e, "z");
            if (ix < 0 || iy < 0 || iz < 0) throw std::runtime_error("ply: vertex without x y z");
            for (std::size_t i = 0; i < e.count; ++i) {
                r.row(e, s, lists);
                mesh.vertices.emplace_back(s[ix], s[iy], s[iz]);
            }
        } else if (e.name == "face") {
            const int ir = scalar_index(e, "red"), ig = scalar_index(e, "green"), ib = scalar_index(e, "blue");
            for (std::size_t i = 0; i < e.count; ++i) {
                r.row(e, s, lists);
                if (lists.empty() || lists[0].size() < 3) throw std::runtime_error("ply: face without indices");
                const auto& idx = lists[0];
                std::array<std::uint8_t, 3> colour{};
                if (ir >= 0 && ig >= 0 && ib >= 0)
                    colour = {static_cast<std::uint8_t>(s[ir]), static_cast<std::uint8_t>(s[ig]),
                              static_cast<std::uint8_t>(s[ib])};
                // fan-triangulate polygons
                for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
                    mesh.faces.push_back({static_cast<int>(idx[0]), static_cast<int>(idx[k]), static_cast<int>(idx[k + 1])});
                    mesh.face_colors.push_back(colour);
                }
            }
        } else {
            for (std::size_t i = 0; i < e.count; ++i) r.row(e, s, lists);
        }
    }
    return mesh;
}

void write_ply_points(const std::filesystem::path& path, std::span<const OrientedPoint> points) {
    std::ofstream out = open_out(path);
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << points.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "property double nx\nproperty double ny\nproperty double nz\n"
        << "property int label\n"
        << "end_header\n";
    for (const OrientedPoint& p : points) {
        for (int i = 0; i < 3; ++i) put(out, p.position[i]);
        for (int i = 0; i < 3; ++i) put(out, p.normal[i]);
        put<std::int32_t>(out, p.label);
    }
    finish(out, path);
}

std::vector<OrientedPoint> read_ply_points(const std::filesystem::path& path) {
    PlyReader r(path);
    std::vector<OrientedPoint> out;
    std::vector<double> s;
    std::vector<std::vector<double>> lists;
    for (const Element& e : r.elements()) {
        if (e.name != "vertex") {
            for (std::size_t i = 0; i < e.count; ++i) r.row(e, s, lists);
            continue;
        }
        const int ix = scalar_index(e, "x"), iy = scalar_index(e, "y"), iz = scalar_index(e, "z");
        const int inx = scalar_index(e, "nx"), iny = scalar_index(e, "ny"), inz = scalar_index(e, "nz");
        const int il = scalar_index(e, "label");
        if (ix < 0 || iy < 0 || iz < 0) throw std::runtime_error("ply: vertex without x y z");
        if (inx < 0 || iny < 0 || inz < 0) throw std::runtime_error("ply: points need nx ny nz normals");
        for (std::size_t i = 0; i < e.count; ++i) {
            r.row(e, s, lists);
            OrientedPoint p;
            p.position = {s[ix], s[iy], s[iz]};
            p.normal = Vec3(s[inx], s[iny], s[inz]).normalized();
            p.label = il >= 0 ? static_cast<int>(s[il]) : -1;
            out.push_back(p);
        }
    }
    return out;
}

}  // namespace planar::io
