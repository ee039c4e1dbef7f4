#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace fp::io {

// Little-endian primitives written byte by byte so files are identical on
// any host.
class Writer {
public:
    explicit Writer(const std::string& path);
    void u8(uint8_t v);
    void u32(uint32_t v);
    void i32(int32_t v);
    void f32(float v);
    void f32s(const float* data, size_t count);
    void bytes(const void* data, size_t count);
    void close();

private:
    std::ofstream out_;
    std::string path_;
};

class Reader {
public:
    explicit Reader(const std::string& path);
    uint8_t u8();
    uint32_t u32();
    int32_t i32();
    float f32();
    void f32s(float* data, size_t count);
    void bytes(void* data, size_t count);
    size_t offset() const { return offset_; }
    const std::string& path() const { return path_; }
    // Reads 4 bytes and raises DataError naming path and byte offset on mismatch.
    void expect_magic(const char magic[4]);
    bool at_eof();

private:
    std::ifstream in_;
    std::string path_;
    size_t offset_ = 0;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace fp::io
