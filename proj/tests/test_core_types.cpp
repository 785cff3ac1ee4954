#include "streamhist/core_types.hpp"
#include "streamhist/error.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <limits>

using namespace streamhist;

TEST_SUITE("core_types") {

TEST_CASE("pack_pixels uses least-significant-byte-first order") {
    std::vector<Pixel> const px = {1, 2, 3, 4};
    auto const chunk = pack_pixels(px);
    REQUIRE(chunk.word_count() == 1);
    CHECK(chunk.words()[0] == 0x04030201u);
    CHECK(chunk.pixel_count() == 4);
}

TEST_CASE("pack_pixels edge cases") {
    auto const empty = pack_pixels({});
    CHECK(empty.word_count() == 0);
    CHECK(empty.pixel_count() == 0);

    std::vector<Pixel> const sevens(8, 7);
    auto const chunk = pack_pixels(sevens);
    REQUIRE(chunk.word_count() == 2);
    CHECK(chunk.words()[0] == 0x07070707u);
    CHECK(chunk.words()[1] == 0x07070707u);
}

TEST_CASE("pack_pixels rejects lengths that are not a multiple of four") {
    std::vector<Pixel> const px = {1, 2, 3, 4, 5};
    try {
        (void)pack_pixels(px);
        FAIL("expected an error");
    } catch (error const &e) {
        CHECK(e.code() == errc::length_not_multiple_of_four);
    }
}

TEST_CASE("unpack_word") {
    CHECK(unpack_word(0x04030201u) == std::array<Pixel, 4>{1, 2, 3, 4});
    CHECK(unpack_word(0u) == std::array<Pixel, 4>{0, 0, 0, 0});
    CHECK(unpack_word(0xFF0000FFu) == std::array<Pixel, 4>{255, 0, 0, 255});
}

TEST_CASE("unpack inverts pack for random sequences") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> words(0, 300);
    for (int trial = 0; trial < 200; ++trial) {
        auto const px = test::random_pixels(rng, 4 * words(rng));
        CHECK(unpack(pack_pixels(px)) == px);
    }
}

TEST_CASE("merge is a componentwise sum with the zero histogram as identity") {
    Histogram256 a;
    a[1] = 2;
    Histogram256 b;
    b[1] = 3;
    b[2] = 1;
    auto const m = merge(a, b);
    CHECK(m[1] == 5);
    CHECK(m[2] == 1);
    CHECK(m.total() == 6);

    std::mt19937_64 rng(3);
    auto const h = test::random_histogram(rng, 1000);
    CHECK(merge(h, Histogram256{}) == h);
    CHECK(merge(Histogram256{}, h) == h);
}

TEST_CASE("merge is commutative and associative") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        auto const a = test::random_histogram(rng, 1u << 30);
        auto const b = test::random_histogram(rng, 1u << 30);
        auto const c = test::random_histogram(rng, 1u << 30);
        CHECK(merge(a, b) == merge(b, a));
        CHECK(merge(merge(a, b), c) == merge(a, merge(b, c)));
    }
}

TEST_CASE("merging 64 partial histograms of a split chunk matches the whole") {
    std::mt19937_64 rng(17);
    auto const px = test::skewed_pixels(rng, 4 * 10007);
    auto const whole = test::count_pixels(px);

    Histogram256 merged;
    auto const per = px.size() / 64;
    for (std::size_t part = 0; part < 64; ++part) {
        auto const begin = px.begin() + static_cast<std::ptrdiff_t>(part * per);
        auto const end = part == 63 ? px.end()
                                    : begin + static_cast<std::ptrdiff_t>(per);
        merged = merge(merged, test::count_pixels({begin, end}));
    }
    CHECK(merged == whole);
    CHECK(merged.total() == px.size());
}

TEST_CASE("merge detects 64-bit overflow") {
    Histogram256 a;
    a[9] = std::numeric_limits<std::uint64_t>::max();
    Histogram256 b;
    b[9] = 1;
    try {
        (void)merge(a, b);
        FAIL("expected an error");
    } catch (error const &e) {
        CHECK(e.code() == errc::count_overflow);
    }
}

TEST_CASE("subtract_from refuses to go negative") {
    Histogram256 acc;
    acc[3] = 2;
    Histogram256 h;
    h[3] = 3;
    CHECK_THROWS_AS(subtract_from(acc, h), error);
    CHECK(acc[3] == 2);
}

} // TEST_SUITE
