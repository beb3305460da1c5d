#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fpinn/gamma.hpp"



TEST_CASE("gamma known values")
{
    CHECK(fpinn::gamma(0.5) == doctest::Approx(1.7724538509055160).epsilon(1e-14)); // sqrt(pi)
    CHECK(fpinn::gamma(1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(fpinn::gamma(1.5) == doctest::Approx(0.8862269254527580).epsilon(1e-14)); // sqrt(pi)/2
    CHECK(fpinn::gamma(2.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(fpinn::gamma(5.0) == doctest::Approx(24.0).epsilon(1e-14));
    CHECK(fpinn::gamma(10.0) == doctest::Approx(362880.0).epsilon(1e-14));
    CHECK(fpinn::gamma(20.0) == doctest::Approx(1.21645100408832e17).epsilon(1e-13));
}

TEST_CASE("gamma matches the library implementation over (0.1, 20]")
{
    for (int i = 1; i <= 199; ++i) {
        const double z = 0.1 + i * 0.1;
        CHECK(fpinn::gamma(z) == doctest::Approx(std::tgamma(z)).epsilon(1e-13));
    }
}

TEST_CASE("gamma recurrence z*Gamma(z) = Gamma(z+1)")
{
    for (double z = 0.11; z < 19.0; z += 0.37)
        CHECK(z * fpinn::gamma(z) == doctest::Approx(fpinn::gamma(z + 1.0)).epsilon(1e-13));
}

TEST_CASE("gamma rejects bad arguments")
{
    CHECK_THROWS_AS(fpinn::gamma(0.0), std::domain_error);
    CHECK_THROWS_AS(fpinn::gamma(-1.5), std::domain_error);
    CHECK_THROWS_AS(fpinn::gamma(std::nan("")), std::domain_error);
    CHECK_THROWS_AS(fpinn::gamma(std::numeric_limits<double>::infinity()), std::domain_error);
}
