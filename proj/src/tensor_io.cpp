#include "zsol/tensor_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "zsol/detail/bytes.hpp"

namespace zsol {

namespace detail {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw DataError("read failed: " + path.string());
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

namespace {
constexpr std::uint8_t kVersion = 0x01;
constexpr std::uint8_t kDtypeF32 = 0x01;
}  // namespace

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

std::string encode_tensor(const Tensor& t) {
    if (t.dims.empty() || t.dims.size() > 255) {
        throw std::invalid_argument("tensor must have between 1 and 255 dimensions");
    }
    if (t.element_count() != t.data.size()) {
        throw std::invalid_argument("tensor payload does not match dims");
    }
    detail::ByteWriter w;
    w.bytes("ZSOL");
    w.u8(kVersion);
    w.u8(kDtypeF32);
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    w.u8(0);
    for (auto d : t.dims) w.u32(d);
    for (float v : t.data) w.f32(v);
    return w.str();
}

Tensor decode_tensor(std::string_view bytes, const std::string& what) {
    detail::ByteReader r(bytes, what);
    r.expect_magic("ZSOL");
    if (auto v = r.u8(); v != kVersion) r.fail("unsupported version " + std::to_string(v));
    if (auto d = r.u8(); d != kDtypeF32) r.fail("unsupported dtype " + std::to_string(d));
    const std::uint8_t ndim = r.u8();
    if (ndim == 0) r.fail("ndim must be >= 1");
    if (r.u8() != 0) r.fail("reserved byte must be zero");
    Tensor t;
    std::uint64_t count = 1;
    for (std::uint8_t i = 0; i < ndim; ++i) {
        t.dims.push_back(r.u32());
        count *= t.dims.back();
    }
    if (count * 4 != r.remaining()) {
        r.fail("payload size " + std::to_string(r.remaining()) + " does not match dims (" +
               std::to_string(count) + " floats)");
    }
    t.data.resize(count);
    for (auto& v : t.data) v = r.f32();
    r.expect_end();
    return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    detail::write_file(path, encode_tensor(t));
}

Tensor read_tensor(const std::filesystem::path& path) {
    return decode_tensor(detail::read_file(path), path.string());
}

Tensor to_tensor(const Grid& g) {
    return {{static_cast<std::uint32_t>(g.height()), static_cast<std::uint32_t>(g.width())},
            {g.values().begin(), g.values().end()}};
}

Tensor to_tensor(const EmbeddingMatrix& m) {
    return {{static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.dim())},
            {m.values().begin(), m.values().end()}};
}

Tensor to_tensor(const EmbeddingMatrix& m, std::size_t grid_h, std::size_t grid_w) {
    if (grid_h * grid_w != m.rows()) {
        throw std::invalid_argument("patch grid does not match embedding row count");
    }
    return {{static_cast<std::uint32_t>(grid_h), static_cast<std::uint32_t>(grid_w),
             static_cast<std::uint32_t>(m.dim())},
            {m.values().begin(), m.values().end()}};
}

Grid grid_from_tensor(const Tensor& t) {
    if (t.dims.size() != 2) {
        throw DataError("expected a 2-D tensor, got " + std::to_string(t.dims.size()) + "-D");
    }
    if (t.dims[0] == 0 || t.dims[1] == 0) throw DataError("tensor has a zero dimension");
    return Grid(t.dims[0], t.dims[1], t.data);
}

EmbeddingMatrix embeddings_from_tensor(const Tensor& t) {
    std::size_t rows = 0, dim = 0;
    switch (t.dims.size()) {
        case 1: rows = 1; dim = t.dims[0]; break;
        case 2: rows = t.dims[0]; dim = t.dims[1]; break;
        case 3: rows = std::size_t{t.dims[0]} * t.dims[1]; dim = t.dims[2]; break;
        default: throw DataError("embedding tensor must be 1-D, 2-D or 3-D");
    }
    if (rows == 0 || dim == 0) throw DataError("embedding tensor has a zero dimension");
    for (float v : t.data) {
        if (!std::isfinite(v)) throw DataError("embedding tensor has a non-finite entry");
    }
    return EmbeddingMatrix(rows, dim, t.data);
}

std::string encode_points(const PointSet& p) {
    p.validate();
    detail::ByteWriter w;
    w.bytes("ZSPT");
    w.u8(kVersion);
    w.u32(static_cast<std::uint32_t>(p.size()));
    for (const Point& pt : p.points) {
        w.f32(pt.x);
        w.f32(pt.y);
    }
    w.u8(p.has_confidences() ? 1 : 0);
    if (p.confidences) {
        for (float c : *p.confidences) w.f32(c);
    }
    return w.str();
}

PointSet decode_points_file(std::string_view bytes, const std::string& what) {
    detail::ByteReader r(bytes, what);
    r.expect_magic("ZSPT");
    if (auto v = r.u8(); v != kVersion) r.fail("unsupported version " + std::to_string(v));
    const std::uint32_t count = r.u32();
    if (std::uint64_t{count} * 8 + 1 > r.remaining()) r.fail("truncated point data");
    PointSet p;
    p.points.resize(count);
    for (auto& pt : p.points) {
        pt.x = r.f32();
        pt.y = r.f32();
    }
    const std::uint8_t flag = r.u8();
    if (flag > 1) r.fail("confidence presence byte must be 0 or 1");
    if (flag == 1) {
        p.confidences.emplace(count);
        for (auto& c : *p.confidences) c = r.f32();
    }
    r.expect_end();
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        r.fail(e.what());
    }
    return p;
}

void write_points(const std::filesystem::path& path, const PointSet& p) {
    detail::write_file(path, encode_points(p));
}

PointSet read_points(const std::filesystem::path& path) {
    return decode_points_file(detail::read_file(path), path.string());
}

}  // namespace zsol
