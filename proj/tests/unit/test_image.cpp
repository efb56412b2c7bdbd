#include "auprobe/error.hpp"
#include "auprobe/image.hpp"

#include "support/scratch.hpp"

#include <doctest.h>

#include <fstream>

using namespace auprobe;

namespace {

GrayImage gradient(std::size_t w, std::size_t h) {
    GrayImage img(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) img.at(x, y) = std::uint8_t((x * 31 + y * 17) % 256);
    return img;
}

}  // namespace

TEST_CASE("PGM and PNG round trips are lossless") {
    testing::ScratchDir dir("image_roundtrip");
    const GrayImage img = gradient(13, 7);
    write_image(img, dir / "a.pgm");
    write_image(img, dir / "a.png");
    CHECK(read_image(dir / "a.pgm") == img);
    CHECK(read_image(dir / "a.png") == img);
    CHECK(read_pgm(dir / "a.pgm") == img);
    CHECK(read_png(dir / "a.png") == img);
    const auto info = probe_image(dir / "a.png");
    CHECK(info.width == 13);
    CHECK(info.height == 7);
    CHECK(probe_image(dir / "a.pgm").width == 13);
}

TEST_CASE("ASCII PGM with comments and a 16-bit maxval") {
    testing::ScratchDir dir("image_ascii");
    {
        std::ofstream out(dir / "a.pgm");
        out << "P2\n# comment\n3 1\n# another\n1000\n0 500 1000\n";
    }
    const GrayImage img = read_image(dir / "a.pgm");
    REQUIRE(img.width == 3);
    CHECK(img.pixels == std::vector<std::uint8_t>{0, 128, 255});
}

TEST_CASE("missing, truncated and unknown files raise DataError") {
    testing::ScratchDir dir("image_bad");
    CHECK_THROWS_AS(read_image(dir / "missing.png"), DataError);
    CHECK_THROWS_AS(probe_image(dir / "missing.png"), DataError);
    {
        std::ofstream out(dir / "junk.bin");
        out << "hello world";
    }
    CHECK_THROWS_AS(read_image(dir / "junk.bin"), DataError);
    write_image(gradient(20, 20), dir / "full.png");
    {
        std::ifstream in(dir / "full.png", std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        std::ofstream out(dir / "cut.png", std::ios::binary);
        out << bytes.substr(0, bytes.size() / 2);
    }
    CHECK_THROWS_AS(read_image(dir / "cut.png"), DataError);
    {
        std::ofstream out(dir / "cut.pgm", std::ios::binary);
        out << "P5\n4 4\n255\n" << std::string(5, 'x');
    }
    CHECK_THROWS_AS(read_image(dir / "cut.pgm"), DataError);
}

TEST_CASE("normalize_to_gray spans 0..255 and maps constants to 0") {
    const Tensor t = Tensor::from_values({1, 2}, {-3, 5});
    CHECK(normalize_to_gray(t).pixels == std::vector<std::uint8_t>{0, 255});
    CHECK(normalize_to_gray(Tensor({2, 2}, 7)).pixels == std::vector<std::uint8_t>(4, 0));
    const Tensor plane = to_plane(gradient(4, 3));
    CHECK(plane.shape() == Shape{3, 4});
    CHECK(plane.at({1, 2}) == (2 * 31 + 17) % 256);
}
