#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "usdiff/grid.hpp"
#include "usdiff/rng.hpp"

using namespace usdiff;

TEST_CASE("grid_fill constant fills") {
    const ImageGrid a = grid_fill(2, 2, 1.0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == 1.0);

    const ImageGrid b = grid_fill(1, 3, 0.0);
    CHECK(b.height() == 1);
    CHECK(b.width() == 3);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b[i] == 0.0);

    const ImageGrid c = grid_fill(3, 1, -0.5);
    for (int r = 0; r < 3; ++r) CHECK(c.at(r, 0) == -0.5);
}

TEST_CASE("grid_fill rejects bad dimensions") {
    CHECK_THROWS_AS(grid_fill(0, 3, 1.0), DimensionError);
    CHECK_THROWS_AS(grid_fill(3, -1, 1.0), DimensionError);
}

TEST_CASE("hadamard identity and annihilator") {
    RngStream rng(42);
    const ImageGrid a = testutil::random_grid(rng, 5, 7);
    const ImageGrid ones = grid_fill(5, 7, 1.0);
    const ImageGrid zeros = grid_fill(5, 7, 0.0);
    CHECK(testutil::bit_identical(hadamard(a, ones), a));
    CHECK(testutil::bit_identical(hadamard(zeros, a), zeros));
}

TEST_CASE("hadamard elementwise product") {
    ImageGrid a(1, 2), b(1, 2);
    a.at(0, 0) = 2.0;
    a.at(0, 1) = 3.0;
    b.at(0, 0) = 4.0;
    b.at(0, 1) = 5.0;
    const ImageGrid p = hadamard(a, b);
    CHECK(p.at(0, 0) == 8.0);
    CHECK(p.at(0, 1) == 15.0);
}

TEST_CASE("hadamard shape mismatch throws") {
    CHECK_THROWS_AS(hadamard(grid_fill(2, 2, 1.0), grid_fill(2, 3, 1.0)), DimensionError);
}

TEST_CASE("hadamard commutative to the bit, associative to 1 ulp") {
    RngStream rng(7);
    const ImageGrid a = testutil::random_grid(rng, 9, 9, -3.0, 3.0);
    const ImageGrid b = testutil::random_grid(rng, 9, 9, -3.0, 3.0);
    const ImageGrid c = testutil::random_grid(rng, 9, 9, -3.0, 3.0);
    CHECK(testutil::bit_identical(hadamard(a, b), hadamard(b, a)));

    const ImageGrid left = hadamard(hadamard(a, b), c);
    const ImageGrid right = hadamard(a, hadamard(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
        const double ulp = std::abs(std::nexttoward(left[i], HUGE_VAL) - left[i]);
        CHECK(std::abs(left[i] - right[i]) <= ulp);
    }
}

TEST_CASE("range remaps are explicit inverses") {
    RngStream rng(3);
    const ImageGrid a = testutil::random_grid(rng, 6, 6, -1.0, 1.0);
    const ImageGrid back = to_signed_range(to_unit_range(a));
    CHECK(testutil::max_abs_diff(a, back) < 1e-15);
}

TEST_CASE("gaussian_field is deterministic in (seed, path)") {
    RngStream a = RngStream(7).child(0);
    RngStream b = RngStream(7).child(0);
    CHECK(testutil::bit_identical(gaussian_field(a, 17, 13), gaussian_field(b, 17, 13)));

    RngStream c = RngStream(7).child(1);
    CHECK_FALSE(testutil::bit_identical(gaussian_field(a, 17, 13), gaussian_field(c, 17, 13)));
}

TEST_CASE("stream advances between draws") {
    RngStream rng(11);
    const ImageGrid first = gaussian_field(rng, 4, 4);
    const ImageGrid second = gaussian_field(rng, 4, 4);
    CHECK_FALSE(testutil::bit_identical(first, second));
}

TEST_CASE("gaussian_field moments on one million draws") {
    RngStream rng(123);
    const ImageGrid field = gaussian_field(rng, 1000, 1000);
    std::vector<double> values(field.data(), field.data() + field.size());
    const testutil::Moments m = testutil::sample_moments(values);
    CHECK(std::abs(m.mean) < 4.0 / 1000.0);          // 4 sigma CLT bound
    CHECK(std::abs(m.variance - 1.0) < 0.01);
    CHECK(std::abs(m.skewness) < 0.02);
    CHECK(std::abs(m.excess_kurtosis) < 0.05);
}

TEST_CASE("distinct paths give uncorrelated streams") {
    RngStream a = RngStream(5).child(10);
    RngStream b = RngStream(5).child(11);
    const int n = 40000;
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += a.next_gaussian() * b.next_gaussian();
    CHECK(std::abs(dot / n) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("child derivation ignores parent consumption") {
    RngStream a(9);
    RngStream child_before = a.child(3);
    a.next_u64();
    a.next_u64();
    RngStream child_after = a.child(3);
    CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("uniform draws land in their stated intervals") {
    RngStream rng(77);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_unit_open();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
}

TEST_CASE("gaussian_field output is finite") {
    RngStream rng(2);
    const ImageGrid field = gaussian_field(rng, 64, 64);
    CHECK(field.all_finite());
}
