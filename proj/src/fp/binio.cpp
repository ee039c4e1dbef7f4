#include "fp/binio.hpp"

#include <cstring>
#include <sstream>

#include "fp/common.hpp"

namespace fp::io {

Writer::Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw DataError("cannot open for writing: " + path);
}

void Writer::u8(uint8_t v) { bytes(&v, 1); }

void Writer::u32(uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    bytes(b, 4);
}

void Writer::i32(int32_t v) { u32(static_cast<uint32_t>(v)); }

void Writer::f32(float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(u);
}

void Writer::f32s(const float* data, size_t count) {
    for (size_t i = 0; i < count; ++i) f32(data[i]);
}

void Writer::bytes(const void* data, size_t count) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(count));
    if (!out_) throw DataError("write failed: " + path_);
}

void Writer::close() {
    out_.close();
    if (!out_) throw DataError("close failed: " + path_);
}

Reader::Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw DataError("cannot open: " + path);
}

void Reader::bytes(void* data, size_t count) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(count));
    if (static_cast<size_t>(in_.gcount()) != count) {
        std::ostringstream msg;
        msg << "truncated file: " << path_ << " at byte offset " << offset_;
        throw DataError(msg.str());
    }
    offset_ += count;
}

uint8_t Reader::u8() {
    uint8_t v;
    bytes(&v, 1);
    return v;
}

uint32_t Reader::u32() {
    uint8_t b[4];
    bytes(b, 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

int32_t Reader::i32() { return static_cast<int32_t>(u32()); }

float Reader::f32() {
    uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

void Reader::f32s(float* data, size_t count) {
    for (size_t i = 0; i < count; ++i) data[i] = f32();
}

void Reader::expect_magic(const char magic[4]) {
    const size_t at = offset_;
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, magic, 4) != 0) {
        std::ostringstream msg;
        msg << "bad magic in " << path_ << " at byte offset " << at << ": expected '"
            << std::string(magic, 4) << "'";
        throw DataError(msg.str());
    }
}

bool Reader::at_eof() {
    return in_.peek() == std::char_traits<char>::eof();
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << text;
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace fp::io
