#include <doctest.h>

#include <cmath>
#include <vector>

#include "droplab/kernels.hpp"
#include "droplab/rng.hpp"

using namespace droplab;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint32_t tag) {
    rng::NormalStream ns(42, rng::Stream::test_fields, tag);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = ns.normal(0, static_cast<std::uint32_t>(i));
    return v;
}

}  // namespace

TEST_CASE("scalar and simd kernel variants agree") {
    if (!kernels::avx2_available()) {
        MESSAGE("avx2 not available; dispatch equivalence is trivial");
        return;
    }
    // odd length exercises the vector tails
    for (std::size_t n : {1ul, 7ul, 64ul, 1037ul, 16384ul}) {
        auto a = random_vec(n, 1), x = random_vec(n, 2), z = random_vec(n, 3),
             w = random_vec(n, 4);
        const double tol = 1e-12 * static_cast<double>(n);

        CHECK(kernels::avx2::sum(x.data(), n) ==
              doctest::Approx(kernels::scalar::sum(x.data(), n)).epsilon(tol));
        CHECK(kernels::avx2::dot(x.data(), z.data(), n) ==
              doctest::Approx(kernels::scalar::dot(x.data(), z.data(), n)).epsilon(tol));
        CHECK(kernels::avx2::weighted_dot(a.data(), x.data(), z.data(), n) ==
              doctest::Approx(kernels::scalar::weighted_dot(a.data(), x.data(), z.data(), n))
                  .epsilon(tol));
        CHECK(kernels::avx2::weighted_sumsq(a.data(), x.data(), n) ==
              doctest::Approx(kernels::scalar::weighted_sumsq(a.data(), x.data(), n))
                  .epsilon(tol));
        CHECK(kernels::avx2::double_well_sum(x.data(), n) ==
              doctest::Approx(kernels::scalar::double_well_sum(x.data(), n)).epsilon(tol));

        std::vector<double> y1 = w, y2 = w;
        kernels::scalar::axpy(0.37, x.data(), y1.data(), n);
        kernels::avx2::axpy(0.37, x.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));

        std::vector<double> m1(n), m2(n);
        kernels::scalar::multiply(a.data(), x.data(), m1.data(), n);
        kernels::avx2::multiply(a.data(), x.data(), m2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(m1[i] == m2[i]);

        kernels::scalar::double_well_prime(x.data(), m1.data(), n);
        kernels::avx2::double_well_prime(x.data(), m2.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(m1[i] == doctest::Approx(m2[i]).epsilon(1e-14));

        kernels::scalar::combine3(a.data(), x.data(), z.data(), w.data(), w.data(), z.data(),
                                  m1.data(), n);
        kernels::avx2::combine3(a.data(), x.data(), z.data(), w.data(), w.data(), z.data(),
                                m2.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(m1[i] == doctest::Approx(m2[i]).epsilon(1e-14));
    }
}

TEST_CASE("kernel reference values") {
    const std::vector<double> x{1.0, -2.0, 3.0};
    CHECK(kernels::sum(x.data(), 3) == doctest::Approx(2.0));
    CHECK(kernels::double_well_sum(x.data(), 3) ==
          doctest::Approx(0.25 * (0.0 + 9.0 + 64.0)));
    std::vector<double> y(3);
    kernels::double_well_prime(x.data(), y.data(), 3);
    CHECK(y[0] == doctest::Approx(0.0));
    CHECK(y[1] == doctest::Approx(-6.0));
    CHECK(y[2] == doctest::Approx(24.0));
}

TEST_CASE("backend dispatch is overridable") {
    const auto saved = kernels::active_backend();
    kernels::set_backend(kernels::Backend::scalar);
    CHECK(kernels::active_backend() == kernels::Backend::scalar);
    kernels::set_backend(saved);
}
