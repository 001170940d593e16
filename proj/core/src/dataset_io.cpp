#include "agps/synth/io.hpp"

#include <cstring>
#include <fstream>

#include <Eigen/Geometry>

namespace agps::synth {

namespace {

// Little-endian scalar plumbing. The build targets little-endian hosts; a
// big-endian port would need byte swaps here and nowhere else.
template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_f32(std::string& out, double v) { put(out, static_cast<float>(v)); }

class Reader {
  public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size())
            throw FormatError(pos_, "truncated file");
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string get_str(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw FormatError(pos_, "truncated file");
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }

  private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

void put_mat(std::string& out, const Eigen::MatrixX3d& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (int j = 0; j < 3; ++j) put_f32(out, M(i, j));
}

Eigen::MatrixX3d get_mat(Reader& r, std::uint32_t n) {
    Eigen::MatrixX3d M(n, 3);
    for (std::uint32_t i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) M(i, j) = r.get<float>();
    return M;
}

void put_meta(std::string& out, const PartMeta& m) {
    float params[10] = {};
    std::uint8_t kind;
    if (m.is_rigid) {
        kind = 4;
        for (int i = 0; i < 3; ++i) params[i] = static_cast<float>(m.rigid_axis_angle[i]);
        for (int i = 0; i < 3; ++i) params[3 + i] = static_cast<float>(m.rigid.t[i]);
    } else {
        switch (m.prim.kind) {
            case oracle::PrimitiveKind::Plane:
                kind = 0;
                for (int i = 0; i < 3; ++i) params[i] = static_cast<float>(m.prim.normal[i]);
                params[3] = static_cast<float>(m.prim.offset);
                break;
            case oracle::PrimitiveKind::Sphere:
                kind = 1;
                for (int i = 0; i < 3; ++i) params[i] = static_cast<float>(m.prim.center[i]);
                params[3] = static_cast<float>(m.prim.radius);
                break;
            case oracle::PrimitiveKind::Cylinder:
                kind = 2;
                for (int i = 0; i < 3; ++i) params[i] = static_cast<float>(m.prim.axis[i]);
                for (int i = 0; i < 3; ++i) params[3 + i] = static_cast<float>(m.prim.axis_point[i]);
                params[6] = static_cast<float>(m.prim.radius);
                break;
            default:
                kind = 3;
                for (int i = 0; i < 3; ++i) params[i] = static_cast<float>(m.prim.apex[i]);
                for (int i = 0; i < 3; ++i) params[3 + i] = static_cast<float>(m.prim.axis[i]);
                params[6] = static_cast<float>(m.prim.half_angle);
                break;
        }
    }
    put(out, kind);
    for (float p : params) put(out, p);
}

PartMeta get_meta(Reader& r) {
    const std::size_t at = r.pos();
    const std::uint8_t kind = r.get<std::uint8_t>();
    double params[10];
    for (double& p : params) p = r.get<float>();
    PartMeta m;
    auto vec = [&](int i) { return Eigen::Vector3d(params[i], params[i + 1], params[i + 2]); };
    switch (kind) {
        case 0:
            m.prim.kind = oracle::PrimitiveKind::Plane;
            m.prim.normal = vec(0);
            m.prim.offset = params[3];
            break;
        case 1:
            m.prim.kind = oracle::PrimitiveKind::Sphere;
            m.prim.center = vec(0);
            m.prim.radius = params[3];
            break;
        case 2:
            m.prim.kind = oracle::PrimitiveKind::Cylinder;
            m.prim.axis = vec(0);
            m.prim.axis_point = vec(3);
            m.prim.radius = params[6];
            break;
        case 3:
            m.prim.kind = oracle::PrimitiveKind::Cone;
            m.prim.apex = vec(0);
            m.prim.axis = vec(3);
            m.prim.half_angle = params[6];
            break;
        case 4: {
            m.is_rigid = true;
            m.rigid_axis_angle = vec(0);
            const double angle = m.rigid_axis_angle.norm();
            if (angle > 0.0)
                m.rigid.R =
                    Eigen::AngleAxisd(angle, m.rigid_axis_angle / angle).toRotationMatrix();
            m.rigid.t = vec(3);
            break;
        }
        default:
            throw FormatError(at, "unknown part kind " + std::to_string(kind));
    }
    return m;
}

}  // namespace

std::string serialize_dataset(const PartDataset& ds) {
    std::string out;
    out += "AGPD";
    put<std::uint32_t>(out, 1);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(ds.task));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.domains.size()));
    for (const auto& dom : ds.domains) {
        put<std::uint16_t>(out, static_cast<std::uint16_t>(dom.name.size()));
        out += dom.name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(dom.shapes.size()));
        for (const auto& sh : dom.shapes) {
            const auto n = static_cast<std::uint32_t>(sh.n_points());
            put<std::uint32_t>(out, n);
            put<std::uint16_t>(out, static_cast<std::uint16_t>(sh.n_parts()));
            std::uint8_t flags = 0;
            if (sh.has_normals) flags |= 1;
            if (sh.has_flow) flags |= 2;
            if (sh.has_prim_types) flags |= 4;
            put(out, flags);
            put_mat(out, sh.positions);
            if (sh.has_normals) put_mat(out, sh.normals);
            if (sh.has_flow) put_mat(out, sh.flow);
            for (int lbl : sh.part_labels) put<std::int32_t>(out, lbl);
            if (sh.has_prim_types)
                for (int t : sh.prim_types) put<std::uint8_t>(out, static_cast<std::uint8_t>(t));
            for (const auto& m : sh.part_meta) put_meta(out, m);
        }
    }
    return out;
}

PartDataset parse_dataset(const std::string& bytes) {
    Reader r(bytes);
    if (r.get_str(4) != "AGPD") throw FormatError(0, "bad magic, expected AGPD");
    const auto version = r.get<std::uint32_t>();
    if (version != 1) throw FormatError(4, "unsupported version " + std::to_string(version));
    PartDataset ds;
    const auto task = r.get<std::uint8_t>();
    if (task > 1) throw FormatError(8, "unknown task " + std::to_string(task));
    ds.task = static_cast<Task>(task);
    const auto n_domains = r.get<std::uint32_t>();
    for (std::uint32_t d = 0; d < n_domains; ++d) {
        Domain dom;
        const auto name_len = r.get<std::uint16_t>();
        dom.name = r.get_str(name_len);
        const auto n_shapes = r.get<std::uint32_t>();
        for (std::uint32_t s = 0; s < n_shapes; ++s) {
            Shape sh;
            const auto n = r.get<std::uint32_t>();
            const auto parts = r.get<std::uint16_t>();
            const auto flags = r.get<std::uint8_t>();
            sh.has_normals = flags & 1;
            sh.has_flow = flags & 2;
            sh.has_prim_types = flags & 4;
            sh.positions = get_mat(r, n);
            if (sh.has_normals) sh.normals = get_mat(r, n);
            if (sh.has_flow) sh.flow = get_mat(r, n);
            sh.part_labels.resize(n);
            for (std::uint32_t i = 0; i < n; ++i) {
                const std::size_t at = r.pos();
                const auto lbl = r.get<std::int32_t>();
                if (lbl < 0 || lbl >= parts)
                    throw FormatError(at, "part label " + std::to_string(lbl) + " out of range");
                sh.part_labels[i] = lbl;
            }
            if (sh.has_prim_types) {
                sh.prim_types.resize(n);
                for (std::uint32_t i = 0; i < n; ++i) sh.prim_types[i] = r.get<std::uint8_t>();
            }
            for (std::uint16_t p = 0; p < parts; ++p) sh.part_meta.push_back(get_meta(r));
            dom.shapes.push_back(std::move(sh));
        }
        ds.domains.push_back(std::move(dom));
    }
    if (!r.at_end()) throw FormatError(r.pos(), "trailing bytes after dataset");
    return ds;
}

void write_dataset(const PartDataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    const std::string bytes = serialize_dataset(ds);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write to '" + path + "' failed");
}

PartDataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_dataset(bytes);
}

}  // namespace agps::synth
