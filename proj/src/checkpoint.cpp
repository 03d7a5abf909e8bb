#include <zlib.h>

#include <fstream>
#include <sstream>

#include "gnet/binary_io.hpp"
#include "gnet/model.hpp"

namespace gnet {

std::uint32_t crc32_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in chunks
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const std::size_t chunk = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), uInt(chunk));
        pos += chunk;
    }
    return std::uint32_t(crc);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

namespace {

constexpr char kMagic[4] = {'G', 'N', 'E', 'T'};

}  // namespace

std::string serialize_checkpoint(const Model& model, std::uint32_t version) {
    if (version != kCheckpointVersionF32 && version != kCheckpointVersionF64) {
        throw VersionError("checkpoint: cannot write version " + std::to_string(version));
    }
    ByteWriter payload;
    payload.put_string(model.config().to_json().dump());
    const auto& slots = model.registry().slots();
    payload.put<std::uint64_t>(slots.size());
    for (const auto& slot : slots) {
        payload.put_string(slot.name);
        payload.put<std::uint32_t>(std::uint32_t(slot.value.rank()));
        for (std::size_t e : slot.value.shape()) payload.put<std::uint64_t>(e);
        for (real v : slot.value.data()) {
            if (version == kCheckpointVersionF32) {
                payload.put<float>(float(v));
            } else {
                payload.put<double>(double(v));
            }
        }
    }
    ByteWriter file;
    file.put_bytes(std::string_view(kMagic, 4));
    file.put<std::uint32_t>(version);
    file.put_bytes(payload.bytes());
    file.put<std::uint32_t>(crc32_of(payload.bytes()));
    return std::move(file.bytes());
}

std::string serialize_checkpoint(const Model& model) {
    return serialize_checkpoint(model, sizeof(real) == 8 ? kCheckpointVersionF64 : kCheckpointVersionF32);
}

Model deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, kMagic, 4) != 0) throw BadMagicError("checkpoint: bad magic");
    ByteReader head(std::string_view(bytes).substr(4), "checkpoint header");
    const auto version = head.get<std::uint32_t>();
    if (version != kCheckpointVersionF32 && version != kCheckpointVersionF64) {
        throw VersionError("checkpoint: unknown format version " + std::to_string(version));
    }
    if (bytes.size() < 12) throw TruncatedError("checkpoint: file too short for a CRC trailer");
    const std::string_view payload = std::string_view(bytes).substr(8, bytes.size() - 12);
    ByteReader trailer(std::string_view(bytes).substr(bytes.size() - 4), "checkpoint trailer");
    const auto stored = trailer.get<std::uint32_t>();
    if (stored != crc32_of(payload)) throw CrcError("checkpoint: CRC mismatch (file corrupted or truncated)");

    ByteReader in(payload, "checkpoint payload");
    nlohmann::json config_json;
    try {
        config_json = nlohmann::json::parse(in.get_string());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: config is not valid JSON: ") + e.what());
    }
    Model model = Model::skeleton(ModelConfig::from_json(config_json));
    ParameterRegistry& reg = model.registry();

    const auto count = in.get<std::uint64_t>();
    if (count != reg.size()) {
        throw FormatError("checkpoint: holds " + std::to_string(count) + " tensors, config expects " +
                          std::to_string(reg.size()));
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string name = in.get_string();
        if (!reg.contains(name)) throw FormatError("checkpoint: unexpected tensor '" + name + "'");
        Tensor& dst = reg.value(name);
        const auto rank = in.get<std::uint32_t>();
        Shape shape(rank);
        for (auto& e : shape) e = std::size_t(in.get<std::uint64_t>());
        if (shape != dst.shape()) {
            throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                              shape_str(dst.shape()));
        }
        for (std::size_t k = 0; k < dst.numel(); ++k) {
            dst[k] = version == kCheckpointVersionF32 ? real(in.get<float>()) : real(in.get<double>());
        }
    }
    if (in.remaining() != 0) throw FormatError("checkpoint: trailing bytes after tensors");
    reg.touch();
    return model;
}

void save_checkpoint(const Model& model, const std::string& path) { write_file(path, serialize_checkpoint(model)); }

Model load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace gnet
