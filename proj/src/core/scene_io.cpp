// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/image_io.hpp>
#include <segwild/io.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "binary formats are read and written as native little-endian");

namespace segwild {

namespace {

constexpr double kShC0 = 0.28209479177387814; // degree-0 SH basis constant

// Upper bound on element counts accepted from file headers.
constexpr std::uint64_t kMaxElements = std::uint64_t(1) << 32;

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

struct PlyProperty {
    std::string name;
    PlyType type;
    std::size_t offset;
};

std::size_t
plyTypeSize(PlyType t) {
    switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
    }
    return 0;
}

PlyType
parsePlyType(const std::string &s) {
    if (s == "char" || s == "int8") return PlyType::Int8;
    if (s == "uchar" || s == "uint8") return PlyType::UInt8;
    if (s == "short" || s == "int16") return PlyType::Int16;
    if (s == "ushort" || s == "uint16") return PlyType::UInt16;
    if (s == "int" || s == "int32") return PlyType::Int32;
    if (s == "uint" || s == "uint32") return PlyType::UInt32;
    if (s == "float" || s == "float32") return PlyType::Float32;
    if (s == "double" || s == "float64") return PlyType::Float64;
    fail(ErrorCode::Format, "unsupported PLY property type '" + s + "'");
}

template <class T>
T
readRaw(const char *p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

double
readPlyValue(const char *p, PlyType t) {
    switch (t) {
    case PlyType::Int8: return readRaw<std::int8_t>(p);
    case PlyType::UInt8: return readRaw<std::uint8_t>(p);
    case PlyType::Int16: return readRaw<std::int16_t>(p);
    case PlyType::UInt16: return readRaw<std::uint16_t>(p);
    case PlyType::Int32: return readRaw<std::int32_t>(p);
    case PlyType::UInt32: return readRaw<std::uint32_t>(p);
    case PlyType::Float32: return readRaw<float>(p);
    case PlyType::Float64: return readRaw<double>(p);
    }
    return 0.0;
}

std::ifstream
openBinary(const fs::path &path) {
    if (!fs::exists(path)) {
        fail(ErrorCode::NotFound, "file not found: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::Io, "cannot open " + path.string());
    }
    return in;
}

std::ofstream
createBinary(const fs::path &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorCode::Io, "cannot create " + path.string());
    }
    return out;
}

void
readExact(std::istream &in, void *dst, std::size_t n, const char *what) {
    in.read(static_cast<char *>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        fail(ErrorCode::Format, std::string("truncated ") + what);
    }
}

std::uint32_t
readU32(std::istream &in, const char *what) {
    std::uint32_t v = 0;
    readExact(in, &v, sizeof(v), what);
    return v;
}

void
writeU32(std::ostream &out, std::uint32_t v) {
    out.write(reinterpret_cast<const char *>(&v), sizeof(v));
}

void
expectMagic(std::istream &in, const char (&magic)[5], const char *what) {
    char buf[4] = {};
    readExact(in, buf, 4, what);
    if (std::memcmp(buf, magic, 4) != 0) {
        fail(ErrorCode::Format, std::string("bad magic in ") + what);
    }
}

double
sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

struct AffinityTable {
    std::uint32_t count = 0;
    std::uint32_t dim   = 0;
    std::vector<float> values;
};

AffinityTable
readAffinitySidecar(const fs::path &path) {
    auto in = openBinary(path);
    expectMagic(in, "AFFN", "affinity sidecar");
    AffinityTable t;
    t.count = readU32(in, "affinity sidecar");
    t.dim   = readU32(in, "affinity sidecar");
    check(t.dim >= 1, ErrorCode::Format, "affinity sidecar has zero feature dimension");
    const std::uint64_t n = std::uint64_t(t.count) * t.dim;
    check(n < kMaxElements, ErrorCode::Format, "affinity sidecar dimensions overflow");
    t.values.resize(n);
    readExact(in, t.values.data(), n * sizeof(float), "affinity sidecar payload");
    for (float v : t.values) {
        check(std::isfinite(v), ErrorCode::Format, "non-finite affinity value in sidecar");
    }
    return t;
}

} // namespace

fs::path
affinitySidecarPath(const fs::path &plyPath) {
    fs::path p = plyPath;
    p.replace_extension(".affn");
    return p;
}

GaussianScene
loadScene(const fs::path &path) {
    auto in = openBinary(path);

    std::string line;
    std::getline(in, line);
    check(line == "ply", ErrorCode::Format, "missing PLY magic");

    std::uint64_t vertexCount = 0;
    bool inVertex = false, sawVertex = false, sawFormat = false;
    std::vector<PlyProperty> props;
    std::size_t stride = 0;
    while (true) {
        if (!std::getline(in, line)) {
            fail(ErrorCode::Format, "PLY header not terminated");
        }
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "end_header") {
            break;
        } else if (key == "format") {
            std::string fmt;
            ls >> fmt;
            check(fmt == "binary_little_endian", ErrorCode::Format,
                  "only binary_little_endian PLY is supported");
            sawFormat = true;
        } else if (key == "element") {
            std::string name;
            ls >> name;
            if (name == "vertex") {
                check(!sawVertex, ErrorCode::Format, "duplicate vertex element");
                ls >> vertexCount;
                check(!ls.fail() && vertexCount < kMaxElements, ErrorCode::Format,
                      "bad vertex count");
                inVertex = sawVertex = true;
            } else {
                check(sawVertex, ErrorCode::Format, "vertex element must come first");
                inVertex = false;
            }
        } else if (key == "property") {
            if (!inVertex) {
                continue;
            }
            std::string type, name;
            ls >> type;
            check(type != "list", ErrorCode::Format, "list properties are not supported");
            ls >> name;
            check(!name.empty(), ErrorCode::Format, "malformed property line");
            const PlyType t = parsePlyType(type);
            props.push_back({name, t, stride});
            stride += plyTypeSize(t);
        } else if (key == "comment" || key == "obj_info" || key.empty()) {
            continue;
        } else {
            fail(ErrorCode::Format, "unexpected PLY header line: " + line);
        }
    }
    check(sawFormat && sawVertex, ErrorCode::Format, "PLY header lacks format or vertex element");

    auto find = [&](const std::string &name) -> const PlyProperty & {
        for (const auto &p : props) {
            if (p.name == name) {
                return p;
            }
        }
        fail(ErrorCode::Format, "PLY is missing property '" + name + "'");
    };
    const std::array<const char *, 14> names = {"x",       "y",       "z",       "f_dc_0", "f_dc_1",
                                                "f_dc_2",  "opacity", "scale_0", "scale_1", "scale_2",
                                                "rot_0",   "rot_1",   "rot_2",   "rot_3"};
    std::array<const PlyProperty *, 14> cols{};
    for (std::size_t i = 0; i < names.size(); ++i) {
        cols[i] = &find(names[i]);
    }

    std::vector<char> body(vertexCount * stride);
    readExact(in, body.data(), body.size(), "PLY vertex data");

    const fs::path sidecar = affinitySidecarPath(path);
    AffinityTable affinity;
    std::size_t featureDim = kDefaultFeatureDim;
    if (fs::exists(sidecar)) {
        affinity = readAffinitySidecar(sidecar);
        check(affinity.count == vertexCount, ErrorCode::Format,
              "affinity sidecar count differs from PLY vertex count");
        featureDim = affinity.dim;
    }

    GaussianScene scene(featureDim);
    scene.reserve(vertexCount);
    std::array<double, 14> v{};
    for (std::size_t i = 0; i < vertexCount; ++i) {
        const char *row = body.data() + i * stride;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            v[k] = readPlyValue(row + cols[k]->offset, cols[k]->type);
            check(std::isfinite(v[k]), ErrorCode::Format, "non-finite value in PLY");
        }
        Gaussian g;
        g.position = Vec3(v[0], v[1], v[2]).cast<float>();
        for (int c = 0; c < 3; ++c) {
            g.baseColor[c] = static_cast<float>(std::clamp(0.5 + kShC0 * v[3 + c], 0.0, 1.0));
        }
        g.opacity = static_cast<float>(sigmoid(v[6]));
        g.scale   = Vec3(std::exp(v[7]), std::exp(v[8]), std::exp(v[9])).cast<float>();
        Quat q(v[10], v[11], v[12], v[13]);
        check(q.norm() > 1e-12, ErrorCode::Format, "zero-length rotation quaternion");
        g.rotation = (q / q.norm()).cast<float>();
        if (!affinity.values.empty()) {
            const float *src = affinity.values.data() + i * featureDim;
            g.affinity.assign(src, src + featureDim);
        }
        scene.add(std::move(g));
    }
    return scene;
}

void
saveScene(const GaussianScene &scene, const fs::path &path) {
    {
        auto out = createBinary(path);
        out << "ply\n"
            << "format binary_little_endian 1.0\n"
            << "element vertex " << scene.size() << "\n";
        for (const char *name : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
                                 "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
                                 "rot_3"}) {
            out << "property float " << name << "\n";
        }
        out << "end_header\n";

        std::array<float, 14> row{};
        for (const Gaussian &g : scene.gaussians()) {
            row[0] = g.position.x();
            row[1] = g.position.y();
            row[2] = g.position.z();
            for (int c = 0; c < 3; ++c) {
                row[3 + c] = static_cast<float>((double(g.baseColor[c]) - 0.5) / kShC0);
            }
            const double a     = g.opacity;
            const double logit = std::log(a) - std::log1p(-a);
            row[6] = static_cast<float>(std::clamp(logit, -double(kOpacityLogitClamp),
                                                   double(kOpacityLogitClamp)));
            for (int c = 0; c < 3; ++c) {
                row[7 + c] = static_cast<float>(std::log(double(g.scale[c])));
                row[10 + c] = g.rotation[c];
            }
            row[13] = g.rotation[3];
            out.write(reinterpret_cast<const char *>(row.data()), sizeof(row));
        }
        if (!out) {
            fail(ErrorCode::Io, "write failed: " + path.string());
        }
    }

    auto out = createBinary(affinitySidecarPath(path));
    out.write("AFFN", 4);
    writeU32(out, static_cast<std::uint32_t>(scene.size()));
    writeU32(out, static_cast<std::uint32_t>(scene.featureDim()));
    for (const Gaussian &g : scene.gaussians()) {
        out.write(reinterpret_cast<const char *>(g.affinity.data()),
                  static_cast<std::streamsize>(g.affinity.size() * sizeof(float)));
    }
    if (!out) {
        fail(ErrorCode::Io, "write failed: " + affinitySidecarPath(path).string());
    }
}

FeatureMap
loadFeatureMap(const fs::path &path) {
    auto in = openBinary(path);
    expectMagic(in, "FMAP", "feature map");
    const std::uint32_t h = readU32(in, "feature map header");
    const std::uint32_t w = readU32(in, "feature map header");
    const std::uint32_t c = readU32(in, "feature map header");
    check(c >= 1, ErrorCode::Format, "feature map has zero channels");
    const std::uint64_t n = std::uint64_t(h) * w * c;
    check(h <= (1u << 20) && w <= (1u << 20) && n < kMaxElements, ErrorCode::Format,
          "feature map dimensions overflow");
    FeatureMap map(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    readExact(in, map.data().data(), n * sizeof(float), "feature map payload");
    for (float v : map.data()) {
        check(std::isfinite(v), ErrorCode::Format, "non-finite value in feature map");
    }
    return map;
}

void
saveFeatureMap(const FeatureMap &map, const fs::path &path) {
    auto out = createBinary(path);
    out.write("FMAP", 4);
    writeU32(out, static_cast<std::uint32_t>(map.height()));
    writeU32(out, static_cast<std::uint32_t>(map.width()));
    writeU32(out, static_cast<std::uint32_t>(map.channels()));
    out.write(reinterpret_cast<const char *>(map.data().data()),
              static_cast<std::streamsize>(map.data().size() * sizeof(float)));
    if (!out) {
        fail(ErrorCode::Io, "write failed: " + path.string());
    }
}

Camera
cameraFromJson(const nlohmann::json &j) {
    Camera cam;
    try {
        cam.fx     = j.at("fx").get<double>();
        cam.fy     = j.at("fy").get<double>();
        cam.cx     = j.at("cx").get<double>();
        cam.cy     = j.at("cy").get<double>();
        cam.width  = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        const auto R = j.at("R").get<std::vector<double>>();
        const auto t = j.at("t").get<std::vector<double>>();
        check(R.size() == 9 && t.size() == 3, ErrorCode::Format,
              "camera R must have 9 entries and t 3");
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                cam.R(r, c) = R[r * 3 + c];
            }
            cam.t[r] = t[r];
        }
    } catch (const nlohmann::json::exception &e) {
        fail(ErrorCode::Format, std::string("malformed camera JSON: ") + e.what());
    }
    cam.validate();
    return cam;
}

nlohmann::json
cameraToJson(const Camera &cam) {
    std::vector<double> R(9);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            R[r * 3 + c] = cam.R(r, c);
        }
    }
    return {{"fx", cam.fx},         {"fy", cam.fy}, {"cx", cam.cx},
            {"cy", cam.cy},         {"width", cam.width},
            {"height", cam.height}, {"R", R},
            {"t", std::vector<double>{cam.t.x(), cam.t.y(), cam.t.z()}}};
}

Camera
loadCamera(const fs::path &path) {
    return cameraFromJson(readJsonFile(path));
}

void
saveCamera(const Camera &cam, const fs::path &path) {
    writeJsonFile(cameraToJson(cam), path);
}

MaskBank
loadMaskBank(const fs::path &path) {
    const fs::path manifest = fs::is_directory(path) ? path / "manifest.json" : path;
    const nlohmann::json j  = readJsonFile(manifest);
    const fs::path dir      = manifest.parent_path();

    std::vector<Bitmap> masks;
    std::vector<float> confidence;
    int height = j.value("height", 0), width = j.value("width", 0);
    try {
        for (const auto &m : j.at("masks")) {
            masks.push_back(loadMaskPng(dir / m.at("file").get<std::string>()));
            confidence.push_back(m.value("confidence", 1.0f));
        }
        MaskBank bank = makeMaskBank(j.at("image_id").get<std::string>(), std::move(masks),
                                     std::move(confidence));
        if (bank.masks.empty()) {
            bank.height = height;
            bank.width  = width;
            bank.assignPixels();
        }
        return bank;
    } catch (const nlohmann::json::exception &e) {
        fail(ErrorCode::Format, std::string("malformed mask bank manifest: ") + e.what());
    }
}

void
saveMaskBank(const MaskBank &bank, const fs::path &dir) {
    fs::create_directories(dir);
    nlohmann::json j = {{"image_id", bank.imageId},
                        {"height", bank.height},
                        {"width", bank.width},
                        {"masks", nlohmann::json::array()}};
    for (std::size_t m = 0; m < bank.masks.size(); ++m) {
        const std::string file = "mask_" + std::to_string(m) + ".png";
        saveMaskPng(bank.masks[m], dir / file);
        j["masks"].push_back(
            {{"file", file}, {"confidence", m < bank.confidence.size() ? bank.confidence[m] : 1.f}});
    }
    writeJsonFile(j, dir / "manifest.json");
}

nlohmann::json
readJsonFile(const fs::path &path) {
    auto in = openBinary(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        fail(ErrorCode::Format, "invalid JSON in " + path.string() + ": " + e.what());
    }
}

void
writeJsonFile(const nlohmann::json &j, const fs::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        fail(ErrorCode::Io, "cannot create " + path.string());
    }
    out << j.dump(2) << "\n";
}

} // namespace segwild
