#include "auprobe/data.hpp"
#include "auprobe/error.hpp"

#include "support/scratch.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

using namespace auprobe;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

GrayImage textured(std::size_t w, std::size_t h, int salt = 0) {
    GrayImage img(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) img.at(x, y) = std::uint8_t((x * 13 + y * 7 + salt + (x * y) % 11) % 256);
    return img;
}

struct Stats {
    double mean, std;
};

Stats stats(const Tensor& t) {
    double s = 0, sq = 0;
    for (real v : t.values()) s += v;
    const double mean = s / double(t.size());
    for (real v : t.values()) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / double(t.size()))};
}

}  // namespace

TEST_CASE("manifest parsing: happy path, AU sets and crops") {
    testing::ScratchDir dir("manifest_ok");
    std::filesystem::create_directories(dir / "img");
    for (int i = 0; i < 3; ++i) write_image(textured(20, 16, i), dir / ("img/" + std::to_string(i) + ".pgm"));
    write_text(dir / "m.csv", "path,label,aus,subject,sequence,crop\n"
                              "img/0.pgm,happy,1;6;12,S1,a,\n"
                              "img/1.pgm,sad,,S1,b,2;3;17;14\n"
                              "\"img/2.pgm\",\"sad, very\",4,S2,c,\n");
    const Manifest m = load_manifest(dir / "m.csv");
    REQUIRE(m.size() == 3);
    CHECK(m.rows[0].aus == std::set<int>{1, 6, 12});
    CHECK(m.rows[1].aus.empty());
    REQUIRE(m.rows[1].crop);
    CHECK(*m.rows[1].crop == CropBox{2, 3, 17, 14});
    CHECK(m.rows[2].label == "sad, very");
    const GrayImage cropped = load_row_image(m, 1);
    CHECK(cropped.width == 16);
    CHECK(cropped.height == 12);
    CHECK(cropped.at(0, 0) == textured(20, 16, 1).at(2, 3));
    CHECK(label_set(m) == std::vector<std::string>{"happy", "sad", "sad, very"});
    CHECK(au_set(m) == std::vector<int>{1, 4, 6, 12});

    // Saving elsewhere rebases the paths; reloading gives the same rows.
    std::filesystem::create_directories(dir / "copy");
    save_manifest(m, dir / "copy/m.csv");
    const Manifest again = load_manifest(dir / "copy/m.csv");
    REQUIRE(again.size() == 3);
    CHECK(again.rows[1].crop == m.rows[1].crop);
    CHECK(load_row_image(again, 2) == load_row_image(m, 2));
}

TEST_CASE("manifest errors name the file and line") {
    testing::ScratchDir dir("manifest_bad");
    write_image(textured(10, 10), dir / "a.pgm");
    auto expect_error = [&](const std::string& body, const std::string& fragment) {
        write_text(dir / "m.csv", std::string(kManifestHeader) + "\n" + body);
        try {
            load_manifest(dir / "m.csv");
            FAIL("expected DataError for: " << body);
        } catch (const DataError& e) {
            const std::string what = e.what();
            CHECK_MESSAGE(what.find(fragment) != std::string::npos, what);
        }
    };
    expect_error("a.pgm,x,1,s,q,\nmissing.pgm,x,1,s,q,\n", "m.csv:3");
    expect_error("a.pgm,x,0,s,q,\n", "m.csv:2");
    expect_error("a.pgm,x,1;b,s,q,\n", "m.csv:2");
    expect_error("a.pgm,x,1,s,q,0;0;10;4\n", "m.csv:2");
    expect_error("a.pgm,x,1,s\n", "m.csv:2");
    write_text(dir / "m.csv", "file,label\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.csv"), DataError);
    CHECK_THROWS_AS(load_manifest(dir / "nothing.csv"), DataError);
}

TEST_CASE("augment: shape, standardization and determinism") {
    const GrayImage img = textured(70, 50);
    std::mt19937_64 a(5), b(5);
    for (int i = 0; i < 50; ++i) {
        const Tensor x = augment(img, a, 96);
        CHECK(x.shape() == Shape{1, 96, 96});
        const auto s = stats(x);
        CHECK(std::abs(s.mean) < 1e-6);
        CHECK(std::abs(s.std - 1) < 1e-6);
        CHECK(x == augment(img, b, 96));
    }
    std::mt19937_64 c(5);
    CHECK(augment(textured(8, 8), c, 96).shape() == Shape{1, 96, 96});
    CHECK_THROWS_AS(augment(textured(7, 20), c, 96), DataError);
}

TEST_CASE("constant images standardize to zeros through the epsilon guard") {
    // Rotation fills with zeros, so only a zero image stays constant under augment.
    std::mt19937_64 rng(1);
    const Tensor z = augment(GrayImage(30, 30, 0), rng, 96);
    for (real v : z.values()) CHECK(v == 0);
    for (std::uint8_t level : {0, 90, 255}) {
        const Tensor e = eval_transform(GrayImage(30, 30, level), 48);
        for (real v : e.values()) CHECK(v == 0);
    }
}

TEST_CASE("eval_transform is deterministic and centered") {
    const GrayImage img = textured(40, 40);
    const Tensor x = eval_transform(img, 48);
    CHECK(x == eval_transform(img, 48));
    CHECK(x.shape() == Shape{1, 48, 48});
    CHECK(std::abs(stats(x).mean) < 1e-9);
}

TEST_CASE("transform building blocks") {
    const Tensor p = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(flip_horizontal(p) == Tensor::from_values({2, 3}, {3, 2, 1, 6, 5, 4}));
    CHECK(resize_bilinear(p, 2, 3) == p);
    CHECK(rotate_bilinear(p, 0) == p);
    CHECK(crop(p, 1, 1, 1, 2) == Tensor::from_values({1, 2}, {5, 6}));
    CHECK_THROWS_AS(crop(p, 1, 2, 1, 2), ShapeError);
    // Upsampling a constant stays constant.
    const Tensor up = resize_bilinear(Tensor({3, 3}, 4), 7, 5);
    CHECK(up.shape() == Shape{7, 5});
    for (real v : up.values()) CHECK(v == doctest::Approx(4));
    // A 90 degree rotation of a square plane moves the top-left corner.
    Tensor sq({5, 5});
    sq.at({0, 0}) = 1;
    const Tensor r = rotate_bilinear(sq, 90);
    CHECK(r.at({0, 0}) == doctest::Approx(0));
    CHECK(stats(standardize(Tensor::from_values({4}, {1, 2, 3, 4}))).std == doctest::Approx(1));
}

TEST_CASE("EvalGeometry maps source pixels onto eval_transform output") {
    GrayImage img(48, 48, 0);
    for (std::size_t y = 20; y < 26; ++y)
        for (std::size_t x = 30; x < 36; ++x) img.at(x, y) = 255;
    const Tensor t = eval_transform(img, 48);
    const auto g = EvalGeometry::for_image(48, 48, 48);
    const auto c = g.map(32.5, 22.5);
    // The mapped block center is the centroid of the bright output pixels.
    double sx = 0, sy = 0, sw = 0;
    for (std::size_t y = 0; y < 48; ++y)
        for (std::size_t x = 0; x < 48; ++x)
            if (const double w = t(0, y, x); w > 0) {
                sx += w * double(x);
                sy += w * double(y);
                sw += w;
            }
    CHECK(sx / sw == doctest::Approx(c[0]).epsilon(0.01));
    CHECK(sy / sw == doctest::Approx(c[1]).epsilon(0.01));
}

TEST_CASE("split is a reproducible partition that keeps sequences together") {
    Manifest m;
    for (int i = 0; i < 30; ++i) {
        ManifestRow r;
        r.path = std::to_string(i) + ".pgm";
        r.label = i % 2 ? "x" : "y";
        r.subject = "s" + std::to_string(i % 3);
        r.sequence = "q" + std::to_string(i / 3);
        m.rows.push_back(r);
    }
    const auto a = split(m, 10, 7), b = split(m, 10, 7);
    CHECK(a.train.rows == b.train.rows);
    CHECK(a.test.rows == b.test.rows);
    CHECK(a.train.size() + a.test.size() == 30);
    CHECK(a.test.size() <= 10);
    std::set<std::string> train_paths, test_paths, train_groups, test_groups;
    for (const auto& r : a.train.rows) {
        train_paths.insert(r.path);
        train_groups.insert(r.subject + r.sequence);
    }
    for (const auto& r : a.test.rows) {
        test_paths.insert(r.path);
        test_groups.insert(r.subject + r.sequence);
    }
    CHECK(train_paths.size() + test_paths.size() == 30);
    for (const auto& p : test_paths) CHECK(train_paths.count(p) == 0);
    for (const auto& g : test_groups) CHECK(train_groups.count(g) == 0);
    CHECK_THROWS_AS(split(m, 30, 1), DataError);
}

TEST_CASE("derived generators are reproducible and distinct") {
    auto a = derived_rng(1, 2, 3), b = derived_rng(1, 2, 3), c = derived_rng(1, 2, 4), d = derived_rng(1, 3, 3);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
}
