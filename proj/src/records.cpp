#include "gnet/binary_io.hpp"
#include "gnet/dataset.hpp"

namespace gnet {

namespace {

constexpr char kMagic[4] = {'G', 'R', 'E', 'C'};

void put_floats(ByteWriter& w, const FloatTensor& t) {
    for (float v : t.data()) w.put<float>(v);
}

void get_floats(ByteReader& r, FloatTensor& t) {
    for (float& v : t.storage()) v = r.get<float>();
}

std::string record_context(std::size_t index) { return "record " + std::to_string(index); }

}  // namespace

std::string encode_record(const VideoSample& s) {
    ByteWriter w;
    w.put<std::uint32_t>(s.label);
    w.put<std::uint32_t>(s.num_frames);
    w.put<std::uint32_t>(std::uint32_t(s.height()));
    w.put<std::uint32_t>(std::uint32_t(s.width()));
    w.put<std::uint32_t>(std::uint32_t(s.joints()));
    put_floats(w, s.rgb);
    put_floats(w, s.depth);
    put_floats(w, s.segmentation);
    put_floats(w, s.skeleton);
    return std::move(w.bytes());
}

VideoSample decode_record(std::string_view payload, std::size_t index) {
    ByteReader r(payload, record_context(index));
    VideoSample s;
    s.label = r.get<std::uint32_t>();
    s.num_frames = r.get<std::uint32_t>();
    const std::size_t t = s.num_frames;
    const std::size_t h = r.get<std::uint32_t>(), w = r.get<std::uint32_t>(), j = r.get<std::uint32_t>();
    if (t == 0 || h == 0 || w == 0 || j == 0) {
        throw FormatError(record_context(index) + ": zero extent in header");
    }
    const std::size_t expected = 20 + 4 * (t * h * w * 5 + t * j * 3);
    if (payload.size() != expected) {
        throw FormatError(record_context(index) + ": payload of " + std::to_string(payload.size()) +
                          " bytes, header implies " + std::to_string(expected));
    }
    s.rgb = FloatTensor({t, h, w, 3});
    s.depth = FloatTensor({t, h, w, 1});
    s.segmentation = FloatTensor({t, h, w, 1});
    s.skeleton = FloatTensor({t, j, 3});
    get_floats(r, s.rgb);
    get_floats(r, s.depth);
    get_floats(r, s.segmentation);
    get_floats(r, s.skeleton);
    return s;
}

RecordWriter::RecordWriter(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
    ByteWriter w;
    w.put_bytes(std::string_view(kMagic, 4));
    w.put<std::uint32_t>(kRecordVersion);
    out_.write(w.bytes().data(), std::streamsize(w.bytes().size()));
    bytes_ += w.bytes().size();
}

void RecordWriter::write(const VideoSample& sample) {
    const std::string payload = encode_record(sample);
    ByteWriter w;
    w.put<std::uint64_t>(payload.size());
    w.put_bytes(payload);
    w.put<std::uint32_t>(crc32_of(payload));
    out_.write(w.bytes().data(), std::streamsize(w.bytes().size()));
    if (!out_) throw IoError("failed writing '" + path_ + "'");
    bytes_ += w.bytes().size();
    ++count_;
}

void RecordWriter::close() {
    out_.close();
    if (!out_) throw IoError("failed closing '" + path_ + "'");
}

RecordReader::RecordReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
    char header[8];
    in_.read(header, 8);
    if (in_.gcount() < 4 || std::string_view(header, 4) != std::string_view(kMagic, 4)) {
        throw BadMagicError("'" + path + "' is not a record file (bad magic)");
    }
    if (in_.gcount() < 8) throw TruncatedError("'" + path + "': truncated header");
    ByteReader r(std::string_view(header + 4, 4), "record header");
    const auto version = r.get<std::uint32_t>();
    if (version != kRecordVersion) {
        throw VersionError("'" + path + "': unknown record format version " + std::to_string(version));
    }
}

std::optional<VideoSample> RecordReader::next() {
    char len_raw[8];
    in_.read(len_raw, 8);
    const auto got = in_.gcount();
    if (got == 0) return std::nullopt;
    if (got < 8) throw TruncatedError(record_context(index_) + ": truncated length prefix");
    const auto length = ByteReader(std::string_view(len_raw, 8), record_context(index_)).get<std::uint64_t>();

    // Refuse absurd lengths before allocating.
    const auto here = in_.tellg();
    in_.seekg(0, std::ios::end);
    const auto end = in_.tellg();
    in_.seekg(here);
    if (std::uint64_t(end - here) < length + 4) {
        throw TruncatedError(record_context(index_) + ": truncated payload (" + std::to_string(length) +
                             " bytes declared)");
    }
    std::string payload(std::size_t(length), '\0');
    in_.read(payload.data(), std::streamsize(length));
    char crc_raw[4];
    in_.read(crc_raw, 4);
    if (!in_) throw TruncatedError(record_context(index_) + ": truncated record");
    const auto stored = ByteReader(std::string_view(crc_raw, 4), record_context(index_)).get<std::uint32_t>();
    if (stored != crc32_of(payload)) throw CrcError(record_context(index_) + ": CRC mismatch");
    VideoSample s = decode_record(payload, index_);
    ++index_;
    return s;
}

void write_records(std::span<const VideoSample> samples, const std::string& path) {
    RecordWriter w(path);
    for (const auto& s : samples) w.write(s);
    w.close();
}

std::vector<VideoSample> read_records(const std::string& path) {
    RecordReader r(path);
    std::vector<VideoSample> out;
    while (auto s = r.next()) out.push_back(std::move(*s));
    return out;
}

}  // namespace gnet
