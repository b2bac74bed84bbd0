#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "hashnet/error.hpp"
#include "hashnet/tensor.hpp"

#include "support/oracles.hpp"
#include "support/test_util.hpp"

using hashnet::Error;
using hashnet::Tensor;

TEST_CASE("tensor construction and shape queries") {
    Tensor t({2, 3, 4});
    CHECK(t.rank() == 3);
    CHECK(t.size() == 24);
    CHECK(t.extent(0) == 2);
    CHECK(t.extent(1) == 3);
    CHECK(t.extent(2) == 4);
    CHECK_FALSE(t.empty());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);

    Tensor with_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
    CHECK(with_data(1, 0) == 3.0);
    CHECK(with_data(0, 1) == 2.0);

    CHECK(Tensor().empty());
    CHECK_THROWS_AS(t.extent(3), Error);
}

TEST_CASE("tensor rejects malformed shapes") {
    CHECK_THROWS_AS(Tensor(std::vector<std::size_t>{}), Error);
    CHECK_THROWS_AS(Tensor({2, 0, 3}), Error);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), Error);
}

TEST_CASE("zeros, full, fill and scale") {
    Tensor z = Tensor::zeros({3, 2});
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);

    Tensor f = Tensor::full({2, 2}, 1.5);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == 1.5);

    f.scale(-2.0);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == -3.0);

    f.fill(7.0);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == 7.0);
}

TEST_CASE("element access is row-major") {
    Tensor t({2, 3, 2, 2});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    CHECK(t(0, 0, 0, 0) == 0.0);
    CHECK(t(0, 0, 0, 1) == 1.0);
    CHECK(t(0, 0, 1, 0) == 2.0);
    CHECK(t(0, 1, 0, 0) == 4.0);
    CHECK(t(1, 0, 0, 0) == 12.0);
    CHECK(t(1, 2, 1, 1) == 23.0);

    Tensor m({3, 4});
    m(2, 1) = 9.0;
    CHECK(m[2 * 4 + 1] == 9.0);
}

TEST_CASE("reshape keeps data and validates element count") {
    Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
    Tensor r = t.reshaped({3, 2});
    CHECK(r.shape() == std::vector<std::size_t>{3, 2});
    for (std::size_t i = 0; i < 6; ++i) CHECK(r[i] == t[i]);
    CHECK_THROWS_AS(t.reshaped({4, 2}), Error);
    CHECK_THROWS_AS(t.reshaped({}), Error);
}

TEST_CASE("elementwise arithmetic") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 2}, {10, 20, 30, 40});

    Tensor s = hashnet::add(a, b);
    CHECK(s[0] == 11.0);
    CHECK(s[3] == 44.0);

    Tensor d = hashnet::sub(b, a);
    CHECK(d[0] == 9.0);
    CHECK(d[3] == 36.0);

    Tensor p = hashnet::mul(a, b);
    CHECK(p[1] == 40.0);
    CHECK(p[2] == 90.0);

    CHECK(hashnet::add(a, 1.0)[3] == 5.0);
    CHECK(hashnet::sub(a, 1.0)[0] == 0.0);
    CHECK(hashnet::mul(a, 3.0)[2] == 9.0);

    Tensor wrong({4}, {0, 0, 0, 0});
    CHECK_THROWS_AS(hashnet::add(a, wrong), Error);
    CHECK_THROWS_AS(a += wrong, Error);
    CHECK_THROWS_AS(a -= wrong, Error);
    CHECK_THROWS_AS(hashnet::mul(a, wrong), Error);
}

TEST_CASE("matmul matches a hand-worked product") {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = hashnet::matmul(a, b);
    CHECK(c.shape() == std::vector<std::size_t>{2, 2});
    CHECK(c(0, 0) == 58.0);
    CHECK(c(0, 1) == 64.0);
    CHECK(c(1, 0) == 139.0);
    CHECK(c(1, 1) == 154.0);
}

TEST_CASE("matmul agrees with the nested-loop reference on random inputs") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t rows = testutil::pick(rng, 1, 7);
        const std::size_t inner = testutil::pick(rng, 1, 7);
        const std::size_t cols = testutil::pick(rng, 1, 7);
        Tensor a = testutil::random_tensor({rows, inner}, rng);
        Tensor b = testutil::random_tensor({inner, cols}, rng);
        Tensor got = hashnet::matmul(a, b);
        Tensor want = oracle::matmul(a, b);
        REQUIRE(got.shape() == want.shape());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("matmul validates ranks and inner extents") {
    Tensor a({2, 3});
    Tensor bad_rank({2, 3, 1});
    Tensor bad_inner({2, 2});
    CHECK_THROWS_AS(hashnet::matmul(a, bad_rank), Error);
    CHECK_THROWS_AS(hashnet::matmul(bad_rank, a), Error);
    CHECK_THROWS_AS(hashnet::matmul(a, bad_inner), Error);
}

TEST_CASE("all_finite flags inf and nan") {
    Tensor t({3}, {1.0, -2.0, 0.0});
    CHECK(t.all_finite());
    t[1] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(t.all_finite());
    t[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("f32 quantization rounds to the float grid and is idempotent") {
    CHECK(hashnet::to_f32(1.0) == 1.0);
    CHECK(hashnet::to_f32(0.1) != 0.1);
    CHECK(hashnet::to_f32(0.1) == static_cast<double>(0.1f));

    Tensor t({3}, {0.1, 1.0 / 3.0, 2.0});
    hashnet::quantize_f32(t);
    Tensor again = t;
    hashnet::quantize_f32(again);
    CHECK(t == again);
    CHECK(t[0] == static_cast<double>(0.1f));
    CHECK(t[2] == 2.0);
}

TEST_CASE("u64 little-endian round trip and byte layout") {
    std::ostringstream out;
    hashnet::write_u64_le(out, 0x0102030405060708ULL);
    const std::string bytes = out.str();
    REQUIRE(bytes.size() == 8);
    const unsigned char expect[8] = {0x08, 0x07, 0x06, 0x05, 0x04, 0x03, 0x02, 0x01};
    for (int i = 0; i < 8; ++i) {
        CHECK(static_cast<unsigned char>(bytes[i]) == expect[i]);
    }

    std::istringstream in(bytes);
    CHECK(hashnet::read_u64_le(in) == 0x0102030405060708ULL);

    std::istringstream truncated(std::string("\x01\x02\x03", 3));
    CHECK_THROWS_AS(hashnet::read_u64_le(truncated), Error);
}

TEST_CASE("tensor serialization byte layout is frozen") {
    Tensor t({2}, {1.0, -2.5});
    std::ostringstream out;
    hashnet::write_tensor(out, t);
    const std::string bytes = out.str();
    REQUIRE(bytes.size() == 8 + 8 + 2 * 4);

    std::string expect(16, '\0');
    expect[0] = 1;  // rank
    expect[8] = 2;  // extent
    // 1.0f = 0x3f800000, -2.5f = 0xc0200000, both little-endian.
    const unsigned char payload[8] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x20, 0xc0};
    for (int i = 0; i < 8; ++i) expect.push_back(static_cast<char>(payload[i]));
    CHECK(bytes == expect);
}

TEST_CASE("tensor serialization round-trips bit-exactly on the f32 grid") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::size_t> shape;
        const std::size_t rank = testutil::pick(rng, 1, 4);
        for (std::size_t a = 0; a < rank; ++a) shape.push_back(testutil::pick(rng, 1, 5));
        Tensor t = testutil::random_tensor(shape, rng);
        hashnet::quantize_f32(t);

        std::ostringstream out;
        hashnet::write_tensor(out, t);
        std::istringstream in(out.str());
        Tensor back = hashnet::read_tensor(in);
        CHECK(back == t);
    }
}

TEST_CASE("tensor deserialization rejects malformed streams") {
    // Legitimate serialization of a [2] tensor, then truncate the data.
    Tensor t({2}, {1.0, 2.0});
    std::ostringstream out;
    hashnet::write_tensor(out, t);
    const std::string whole = out.str();

    std::istringstream short_data(whole.substr(0, whole.size() - 2));
    CHECK_THROWS_AS(hashnet::read_tensor(short_data), Error);

    std::istringstream short_header(whole.substr(0, 12));
    CHECK_THROWS_AS(hashnet::read_tensor(short_header), Error);

    std::ostringstream zero_rank;
    hashnet::write_u64_le(zero_rank, 0);
    std::istringstream zr(zero_rank.str());
    CHECK_THROWS_AS(hashnet::read_tensor(zr), Error);

    std::ostringstream big_rank;
    hashnet::write_u64_le(big_rank, 9);
    std::istringstream br(big_rank.str());
    CHECK_THROWS_AS(hashnet::read_tensor(br), Error);

    std::ostringstream huge_extent;
    hashnet::write_u64_le(huge_extent, 1);
    hashnet::write_u64_le(huge_extent, std::uint64_t{1} << 40);
    std::istringstream he(huge_extent.str());
    CHECK_THROWS_AS(hashnet::read_tensor(he), Error);
}
