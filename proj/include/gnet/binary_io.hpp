#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

#include "gnet/error.hpp"

namespace gnet {

std::uint32_t crc32_of(std::string_view bytes);

/// Little-endian append-only byte sink.
class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_arithmetic_v<T>);
        char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        out_.append(raw, sizeof(T));
    }
    void put_bytes(std::string_view bytes) { out_.append(bytes); }
    void put_string(std::string_view s) {
        put<std::uint64_t>(s.size());
        put_bytes(s);
    }
    std::string& bytes() { return out_; }

private:
    std::string out_;
};

/// Bounds-checked little-endian reader; overruns raise TruncatedError.
class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string context) : in_(bytes), context_(std::move(context)) {}

    template <typename T>
    T get() {
        static_assert(std::is_arithmetic_v<T>);
        need(sizeof(T));
        char raw[sizeof(T)];
        std::memcpy(raw, in_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }
    std::string_view get_bytes(std::size_t n) {
        need(n);
        std::string_view s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string get_string() {
        const auto n = get<std::uint64_t>();
        return std::string(get_bytes(std::size_t(n)));
    }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) {
            throw TruncatedError(context_ + ": unexpected end of data (need " + std::to_string(n) + " bytes, " +
                                 std::to_string(in_.size() - pos_) + " left)");
        }
    }

    std::string_view in_;
    std::size_t pos_ = 0;
    std::string context_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace gnet
