#include <cmath>

#include "zsol/align.hpp"
#include "zsol/detail/bytes.hpp"

namespace zsol {

std::string encode_checkpoint(const ProjectionModel& model) {
    model.validate();
    detail::ByteWriter w;
    w.bytes("ZSMD");
    w.u8(0x01);
    w.u32(static_cast<std::uint32_t>(model.d_img));
    w.u32(static_cast<std::uint32_t>(model.d_txt));
    w.f32(static_cast<float>(model.temperature));
    for (double v : model.weights) w.f32(static_cast<float>(v));
    for (double v : model.bias) w.f32(static_cast<float>(v));
    return w.str();
}

ProjectionModel decode_checkpoint(std::string_view bytes, const std::string& what) {
    detail::ByteReader r(bytes, what);
    r.expect_magic("ZSMD");
    if (auto v = r.u8(); v != 0x01) r.fail("unsupported version " + std::to_string(v));
    const std::uint32_t d_img = r.u32();
    const std::uint32_t d_txt = r.u32();
    if (d_img == 0 || d_txt == 0) r.fail("zero model dimension");
    const std::uint64_t expected = (std::uint64_t{d_img} * d_txt + d_txt) * 4;
    const float temperature = r.f32();
    if (r.remaining() != expected) r.fail("parameter payload does not match dimensions");
    ProjectionModel m = ProjectionModel::zeros(d_img, d_txt);
    m.temperature = temperature;
    for (double& v : m.weights) v = r.f32();
    for (double& v : m.bias) v = r.f32();
    r.expect_end();
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        r.fail(e.what());
    }
    return m;
}

void write_checkpoint(const std::filesystem::path& path, const ProjectionModel& model) {
    detail::write_file(path, encode_checkpoint(model));
}

ProjectionModel read_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(detail::read_file(path), path.string());
}

}  // namespace zsol
