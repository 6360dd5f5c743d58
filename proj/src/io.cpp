#include "planar/io.hpp"

#include <png.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

namespace planar::io {
namespace fs = std::filesystem;

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const fs::path& path, const std::string& what) {
    throw std::runtime_error(path.string() + ": " + what);
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open for reading");
    return in;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) fail(path, "cannot open for writing");
    out << std::setprecision(17);
    return out;
}

std::string frame_name(std::size_t i, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "frame-%06zu.%s", i, suffix);
    return buf;
}

}  // namespace

void write_png16(const fs::path& path, const Image16& image) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) fail(path, "cannot open for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail(path, "libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(path, "PNG write failed");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.cols()), static_cast<png_uint_32>(image.rows()), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);  // host little-endian -> PNG big-endian
    for (Eigen::Index r = 0; r < image.rows(); ++r) {
        auto* row = const_cast<png_bytep>(reinterpret_cast<const png_byte*>(image.row(r).data()));
        png_write_row(png, row);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image16 read_png16(const fs::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) fail(path, "cannot open for reading");
    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) fail(path, "not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "libpng initialisation failed");
    }
    Image16 image;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "PNG read failed");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "expected a 16-bit single-channel PNG");
    }
    png_set_swap(png);
    image.resize(h, w);
    for (png_uint_32 r = 0; r < h; ++r) png_read_row(png, reinterpret_cast<png_bytep>(image.row(r).data()), nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_depth_png(const fs::path& path, const DepthImage& depth) {
    Image16 mm(depth.rows(), depth.cols());
    for (Eigen::Index i = 0; i < depth.size(); ++i) {
        const double z = std::round(depth.data()[i] * 1000.0);
        mm.data()[i] = (z > 0.0 && z <= 65535.0) ? static_cast<std::uint16_t>(z) : 0;
    }
    write_png16(path, mm);
}

DepthImage read_depth_png(const fs::path& path) {
    const Image16 mm = read_png16(path);
    return mm.cast<double>() / 1000.0;
}

void write_pose(const fs::path& path, const Pose& pose) {
    std::ofstream out = open_out(path);
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = pose.rotation;
    m.topRightCorner<3, 1>() = pose.translation;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) out << m(r, c) << (c == 3 ? '\n' : ' ');
    }
    if (!out) fail(path, "write failed");
}

Pose read_pose(const fs::path& path) {
    std::ifstream in = open_in(path);
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            if (!(in >> m(r, c))) fail(path, "expected 16 numbers for a 4x4 pose");
    if (!m.allFinite()) fail(path, "pose contains non-finite values");
    Mat3 r = m.topLeftCorner<3, 3>();
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-4 || r.determinant() < 0)
        fail(path, "rotation block is not a proper rotation");
    Pose pose;
    pose.rotation = r;
    // Snap to the nearest rotation to absorb text rounding; full-precision
    // files load unchanged.
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-12) {
        Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
        pose.rotation = svd.matrixU() * svd.matrixV().transpose();
    }
    pose.translation = m.topRightCorner<3, 1>();
    return pose;
}

void write_intrinsics(const fs::path& path, const CameraIntrinsics& k) {
    std::ofstream out = open_out(path);
    out << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' ' << k.width << ' ' << k.height << '\n';
    if (!out) fail(path, "write failed");
}

CameraIntrinsics read_intrinsics(const fs::path& path) {
    std::ifstream in = open_in(path);
    CameraIntrinsics k;
    if (!(in >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height))
        fail(path, "expected 'fx fy cx cy width height'");
    try {
        k.validate();
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    return k;
}

void write_scene(const fs::path& path, const SyntheticScene& scene) {
    std::ofstream out = open_out(path);
    out << "# planar scene v1\n";
    out << "bounds " << scene.bounds.min.x() << ' ' << scene.bounds.min.y() << ' ' << scene.bounds.min.z() << ' '
        << scene.bounds.max.x() << ' ' << scene.bounds.max.y() << ' ' << scene.bounds.max.z() << '\n';
    for (const ScenePlane& p : scene.planes) {
        out << "plane " << p.id << ' ' << p.normal.x() << ' ' << p.normal.y() << ' ' << p.normal.z() << ' '
            << p.offset << ' ' << p.boundary.size();
        for (const Vec3& v : p.boundary) out << ' ' << v.x() << ' ' << v.y() << ' ' << v.z();
        out << '\n';
    }
    if (!out) fail(path, "write failed");
}

SyntheticScene read_scene(const fs::path& path) {
    std::ifstream in = open_in(path);
    SyntheticScene scene;
    bool have_bounds = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (tag == "bounds") {
            Vec3& a = scene.bounds.min;
            Vec3& b = scene.bounds.max;
            if (!(ls >> a.x() >> a.y() >> a.z() >> b.x() >> b.y() >> b.z())) fail(path, where + "malformed bounds");
            have_bounds = true;
        } else if (tag == "plane") {
            ScenePlane p;
            std::size_t k = 0;
            if (!(ls >> p.id >> p.normal.x() >> p.normal.y() >> p.normal.z() >> p.offset >> k))
                fail(path, where + "malformed plane header");
            if (p.id < 0) fail(path, where + "plane id must be non-negative");
            if (k < 3) fail(path, where + "plane polygon needs at least 3 vertices");
            if (std::abs(p.normal.norm() - 1.0) > 1e-6) fail(path, where + "plane normal is not unit length");
            p.normal.normalize();
            p.boundary.resize(k);
            for (Vec3& v : p.boundary) {
                if (!(ls >> v.x() >> v.y() >> v.z())) fail(path, where + "missing polygon vertex");
                if (std::abs(p.normal.dot(v) + p.offset) > 1e-6) fail(path, where + "vertex not on its plane");
            }
            if (scene.find(p.id)) fail(path, where + "duplicate plane id");
            scene.planes.push_back(std::move(p));
        } else {
            fail(path, where + "unknown record '" + tag + "'");
        }
    }
    if (!have_bounds) fail(path, "missing bounds record");
    return scene;
}

void write_sequence(const fs::path& dir, const std::vector<DepthFrame>& frames, const SyntheticScene* scene) {
    fs::create_directories(dir);
    if (frames.empty()) fail(dir, "no frames to write");
    write_intrinsics(dir / "intrinsics.txt", frames.front().intrinsics);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        write_depth_png(dir / frame_name(i, "depth.png"), frames[i].depth);
        write_pose(dir / frame_name(i, "pose.txt"), frames[i].pose);
        if (frames[i].gt_plane_id) {
            const LabelImage& ids = *frames[i].gt_plane_id;
            Image16 lab(ids.rows(), ids.cols());
            for (Eigen::Index j = 0; j < ids.size(); ++j)
                lab.data()[j] = static_cast<std::uint16_t>(std::clamp(ids.data()[j] + 1, 0, 65535));
            write_png16(dir / frame_name(i, "label.png"), lab);
        }
    }
    if (scene) write_scene(dir / "scene.txt", *scene);
}

Sequence load_sequence(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail(dir, "not a sequence directory");
    Sequence seq;
    seq.intrinsics = read_intrinsics(dir / "intrinsics.txt");
    for (std::size_t i = 0;; ++i) {
        const fs::path depth = dir / frame_name(i, "depth.png");
        if (!fs::exists(depth)) break;
        DepthFrame f;
        f.intrinsics = seq.intrinsics;
        f.depth = read_depth_png(depth);
        if (f.depth.rows() != seq.intrinsics.height || f.depth.cols() != seq.intrinsics.width)
            fail(depth, "image size does not match intrinsics");
        f.pose = read_pose(dir / frame_name(i, "pose.txt"));
        const fs::path label = dir / frame_name(i, "label.png");
        if (fs::exists(label)) {
            const Image16 lab = read_png16(label);
            f.gt_plane_id = lab.cast<std::int32_t>().array() - 1;
        }
        seq.frames.push_back(std::move(f));
    }
    if (seq.frames.empty()) fail(dir, "no frame-000000.depth.png found");
    if (fs::exists(dir / "scene.txt")) seq.scene = read_scene(dir / "scene.txt");
    return seq;
}

}  // namespace planar::io
