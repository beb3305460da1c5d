#include <doctest.h>

#include <string>
#include <vector>

#include "fpinn/caputo.hpp"
#include "fpinn/grid.hpp"
#include "fpinn/validate.hpp"

using namespace fpinn;

TEST_CASE("built-in validation suites all pass")
{
    const auto results = run_validation(20260814);
    REQUIRE(results.size() >= 8);
    for (const auto& r : results) {
        INFO(r.name, ": ", r.detail);
        CHECK(r.passed);
    }
    CHECK(all_passed(results));
}

TEST_CASE("telescoping check catches a perturbed matrix")
{
    const Grid g = Grid::uniform(0.0, 1.0, 24);
    const CaputoMatrix m(g, 0.5);

    double worst = 0.0;
    CHECK(rows_telescope(m.size(), [&](int i, int k) { return m.entry(i, k); }, 1e-12, &worst));
    CHECK(worst <= 1e-12);

    // A one-entry perturbation well above the tolerance must trip it.
    auto bent = [&](int i, int k) {
        double v = m.entry(i, k);
        if (i == 7 && k == 3)
            v += 1e-3;
        return v;
    };
    CHECK_FALSE(rows_telescope(m.size(), bent, 1e-12));
}
