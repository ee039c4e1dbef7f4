#include <doctest.h>

#include <cstring>

#include "fp/binio.hpp"
#include "fp/common.hpp"
#include "fp/dataset.hpp"
#include "fp/geometry.hpp"
#include "oracles.hpp"

using namespace fp;

TEST_SUITE("io") {

TEST_CASE("points.bin layout: magic, count, intensity flag, little-endian floats") {
    PointCloud pc;
    pc.xyz = {{1.0f, 2.0f, 3.0f}};
    const auto dir = oracle::temp_dir("io_points");
    save_point_cloud(pc, dir + "/points.bin");
    const auto bytes = oracle::read_bytes(dir + "/points.bin");
    REQUIRE(bytes.size() == 4 + 4 + 1 + 3 * 4);
    CHECK(std::memcmp(bytes.data(), "FPPC", 4) == 0);
    CHECK(bytes[4] == 1);  // n = 1, little endian
    CHECK(bytes[5] == 0);
    CHECK(bytes[8] == 0);  // no intensity
    float x;
    std::memcpy(&x, bytes.data() + 9, 4);
    CHECK(x == 1.0f);
}

TEST_CASE("corrupted magic reports the file and byte offset") {
    const auto dir = oracle::temp_dir("io_magic");
    io::Writer w(dir + "/bad.bin");
    w.bytes("XXXX", 4);
    w.u32(0);
    w.u8(0);
    w.close();
    try {
        load_point_cloud(dir + "/bad.bin");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string what = e.what();
        CHECK(what.find("bad.bin") != std::string::npos);
        CHECK(what.find("offset 0") != std::string::npos);
    }
}

TEST_CASE("truncated payload reports the byte offset") {
    const auto dir = oracle::temp_dir("io_trunc");
    io::Writer w(dir + "/short.bin");
    w.bytes("FPPC", 4);
    w.u32(5);  // promises five points
    w.u8(0);
    w.f32(1.0f);
    w.close();
    try {
        load_point_cloud(dir + "/short.bin");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
}

TEST_CASE("labels file round trip") {
    const std::vector<uint8_t> labels{0, 3, 1, 0, 10};
    const auto dir = oracle::temp_dir("io_labels");
    save_labels(labels, 11, dir + "/labels.bin");
    uint32_t m = 0;
    const auto back = load_labels(dir + "/labels.bin", &m);
    CHECK(m == 11);
    CHECK(back == labels);
}

TEST_CASE("little-endian integers are written byte by byte") {
    const auto dir = oracle::temp_dir("io_le");
    io::Writer w(dir + "/le.bin");
    w.u32(0x01020304u);
    w.i32(-2);
    w.close();
    const auto bytes = oracle::read_bytes(dir + "/le.bin");
    REQUIRE(bytes.size() == 8);
    CHECK(bytes[0] == 0x04);
    CHECK(bytes[1] == 0x03);
    CHECK(bytes[2] == 0x02);
    CHECK(bytes[3] == 0x01);
    CHECK(bytes[4] == 0xFE);
    CHECK(bytes[5] == 0xFF);
    io::Reader r(dir + "/le.bin");
    CHECK(r.u32() == 0x01020304u);
    CHECK(r.i32() == -2);
    CHECK(r.at_eof());
}

TEST_CASE("PGM reader accepts comments and rejects other formats") {
    const auto dir = oracle::temp_dir("io_pgm");
    io::write_text_file(dir + "/ok.pgm", std::string("P5\n# comment\n2 2\n255\n") +
                                             std::string("\x00\x01\x02\x00", 4));
    const auto mask = load_mask(dir + "/ok.pgm", 3);
    CHECK(mask.width == 2);
    CHECK(mask.at(0, 1) == 1);
    io::write_text_file(dir + "/bad.pgm", "P2\n2 2\n255\n0 1 2 0\n");
    CHECK_THROWS_AS(load_mask(dir + "/bad.pgm", 3), DataError);
}

TEST_CASE("missing files raise data errors naming the path") {
    try {
        load_point_cloud("/nonexistent/x.bin");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/x.bin") != std::string::npos);
    }
}

}  // TEST_SUITE
