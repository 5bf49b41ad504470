#include <algorithm>
#include <cstring>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "roughvol/kernel.hpp"

using roughvol::GridGeometry;
using roughvol::KernelParams;

namespace {

// Gamma values from a 40-digit evaluation.
struct GammaRow {
  double alpha, gamma_alpha, gamma_one_minus_alpha;
};
constexpr GammaRow kGammaTable[] = {
    {0.6, 1.489192248812817102394333388321342281321, 2.218159543757688223059054021907679450771},
    {0.75, 1.225416702465177645129098303362890526851, 3.625609908221908311930685155867672002995},
    {0.8, 1.164229713725303373636320938268458693142, 4.590843711998803053204758275929152003434},
    {0.95, 1.031453317129032196165754795930273754862, 19.47008531125551286404732096772712754563},
};

}  // namespace

TEST_CASE("kernel parameters reject alpha outside (1/2, 1)") {
  for (double bad : {0.5, 0.5 + 1e-7, 1.0, 1.0 - 1e-7, 1.2, 0.3, -1.0, std::nan("")}) {
    CHECK_THROWS_AS(KernelParams<double>{bad}, roughvol::DomainError);
  }
  CHECK_NOTHROW(KernelParams<double>(0.5 + 2e-6));
  CHECK_NOTHROW(KernelParams<double>(0.8));
  CHECK_THROWS_WITH(KernelParams<double>(1.2), doctest::Contains("alpha out of (0.5,1)"));
}

TEST_CASE("gamma constants match high-precision values") {
  for (const auto& row : kGammaTable) {
    const KernelParams<double> p(row.alpha);
    CHECK(std::abs(p.gamma_alpha() / row.gamma_alpha - 1) <= 1e-12);
    CHECK(std::abs(p.gamma_one_minus_alpha() / row.gamma_one_minus_alpha - 1) <= 1e-12);
  }
}

TEST_CASE("eval_K") {
  const KernelParams<double> p(0.8);
  CHECK(roughvol::eval_K(1.0, p) == doctest::Approx(1.0 / p.gamma_alpha()).epsilon(1e-15));
  CHECK(roughvol::eval_K(-0.5, p) == 0.0);
  CHECK(roughvol::eval_K(0.0, p) == 0.0);
  // 0.25^{-0.2} / Gamma(0.8)
  CHECK(std::abs(roughvol::eval_K(0.25, p) - 1.133374191722638275016464917190351180047) <= 1e-12);
}

TEST_CASE("eval_L and the resolvent identity L * K = 1") {
  const KernelParams<double> p(0.8);
  CHECK(roughvol::eval_L(1.0, p) == doctest::Approx(1.0 / p.gamma_one_minus_alpha()).epsilon(1e-15));
  CHECK(roughvol::eval_L(0.0, p) == 0.0);
  CHECK(roughvol::eval_L(-2.0, p) == 0.0);
  for (double alpha : {0.6, 0.8, 0.95}) {
    const KernelParams<double> q(alpha);
    for (double t : {0.1, 1.0, 3.0}) {
      CAPTURE(alpha);
      CAPTURE(t);
      CHECK(std::abs(roughvol::resolvent_convolution(t, q, 100000) - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("integral_K closed form") {
  const KernelParams<double> p(0.8);
  CHECK(roughvol::integral_K(0.3, 0.3, 1.0, p) == 0.0);
  CHECK(roughvol::integral_K(0.0, 2.0, 2.0, p) ==
        doctest::Approx(std::pow(2.0, 0.8) / std::tgamma(1.8)).epsilon(1e-14));
  // adaptive quadrature of K(1 - s) over [0.2, 0.7]
  CHECK(std::abs(roughvol::integral_K(0.2, 0.7, 1.0, p) - 0.48834193302778647787182449288943559277) <= 1e-9);
  CHECK_THROWS_AS(roughvol::integral_K(0.7, 0.2, 1.0, p), roughvol::OrderingError);
  CHECK_THROWS_AS(roughvol::integral_K(-0.1, 0.2, 1.0, p), roughvol::OrderingError);
  CHECK_THROWS_AS(roughvol::integral_K(0.1, 1.2, 1.0, p), roughvol::OrderingError);
}

TEST_CASE("integral_L closed form is finite at the singular end") {
  const KernelParams<double> p(0.8);
  CHECK(roughvol::integral_L(0.5, 0.5, 1.0, p) == 0.0);
  CHECK(roughvol::integral_L(0.0, 1.5, 1.5, p) ==
        doctest::Approx(std::pow(1.5, 0.2) / std::tgamma(1.2)).epsilon(1e-14));
  // quadrature of L(1 - s) over [0.9, 1] with the singularity split off
  CHECK(std::abs(roughvol::integral_L(0.9, 1.0, 1.0, p) - 0.6871910515738577885516424704773079930311) <= 1e-8);
  CHECK_THROWS_AS(roughvol::integral_L(0.9, 0.8, 1.0, p), roughvol::OrderingError);
}

TEST_CASE("grid geometry") {
  const GridGeometry<double> g(0.01, 10.0);
  CHECK(g.n() == 1000);
  CHECK(GridGeometry<double>(0.1, 1.0).n() == 10);
  CHECK(GridGeometry<double>(0.3, 1.0).n() == 3);
  CHECK_THROWS_AS(GridGeometry<double>(0.0, 1.0), roughvol::DomainError);
  CHECK_THROWS_AS(GridGeometry<double>(2.0, 1.0), roughvol::DomainError);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const double t = unif(rng);
    const double phi = g.phi(t);
    CHECK(phi <= t);
    CHECK(t < phi + g.h());
  }
  for (double t : {0.3, 0.7, 1.0, 2.5, 9.99}) {
    CHECK(g.phi(t) <= t);
    CHECK(t < g.phi(t) + g.h());
  }
}

TEST_CASE("g_h vanishes once u passes the last grid point before t") {
  const KernelParams<double> p(0.8);
  const GridGeometry<double> g(0.1, 1.0);
  CHECK(roughvol::g_h(0.95, 0.9, g, p) == 0.0);
  CHECK(roughvol::g_h(0.95, 0.93, g, p) == 0.0);
  CHECK(roughvol::g_h(1.0, 0.9, g, p) == 0.0);
  CHECK(roughvol::g_h(1.0, 0.899, g, p) > 0.0);
  CHECK_THROWS_AS(roughvol::g_h(0.5, 0.5, g, p), roughvol::DomainError);
  CHECK_THROWS_AS(roughvol::g_h(0.5, 0.6, g, p), roughvol::DomainError);
  CHECK_THROWS_AS(roughvol::g_h(1.5, 0.6, g, p), roughvol::DomainError);
}

TEST_CASE("g_h matches quadrature of its defining integral") {
  const KernelParams<double> p(0.8);
  const GridGeometry<double> g(0.1, 1.0);
  // 40-digit quadrature, cell by cell
  CHECK(std::abs(roughvol::g_h(1.0, 0.35, g, p) - 1.003315565727233917910779077176462265341) <= 1e-6);
  CHECK(std::abs(oracle::g_h_quadrature(1.0, 0.35, 0.1, 0.8, 1000000) - 1.003315565727233917910779077176462265341) <=
        1e-6);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double alpha = 0.55 + 0.4 * unif(rng);
    const double h = std::pow(2.0, -(2 + static_cast<int>(5 * unif(rng))));
    const double t = 0.2 + 0.8 * unif(rng);
    const double u = t * unif(rng);
    const KernelParams<double> q(alpha);
    const GridGeometry<double> geom(h, 1.0);
    CAPTURE(alpha);
    CAPTURE(h);
    CAPTURE(t);
    CAPTURE(u);
    CHECK(std::abs(roughvol::g_h(t, u, geom, q) - oracle::g_h_quadrature(t, u, h, alpha, 1000000)) <= 1e-6);
  }
}

TEST_CASE("g_h tends to 1 under refinement") {
  const KernelParams<double> p(0.8);
  SUBCASE("u on every grid: monotone") {
    double previous = 1e9;
    for (int e = 4; e <= 12; ++e) {
      const GridGeometry<double> g(std::pow(2.0, -e), 1.0);
      const double dev = std::abs(roughvol::g_h(1.0, 0.25, g, p) - 1.0);
      CHECK(dev < previous);
      previous = dev;
    }
    CHECK(previous < 5e-4);
  }
  SUBCASE("u off the grid: deviation shrinks, oscillating with the cell offset") {
    const double coarse = std::abs(roughvol::g_h(1.0, 0.2, GridGeometry<double>(1.0 / 16, 1.0), p) - 1.0);
    for (int e = 10; e <= 13; ++e) {
      const GridGeometry<double> g(std::pow(2.0, -e), 1.0);
      CHECK(std::abs(roughvol::g_h(1.0, 0.2, g, p) - 1.0) < coarse / 20);
    }
  }
}

TEST_CASE("pointwise bound shape") {
  const KernelParams<double> p(0.8);
  SUBCASE("g_h = 0 region") {
    const GridGeometry<double> g(0.1, 1.0);
    const auto b = roughvol::check_pointwise_bound(1.0, 0.95, g, p);
    CHECK(b.lhs == 1.0);
    CHECK(b.rhs_shape >= 1.0);
  }
  SUBCASE("sweep ratio is bounded and stable under refinement") {
    // Coarse grids put sweep points in the last cells, where lhs = 1; once h is fine the
    // supremum settles.
    std::vector<double> sup_ratio;
    for (int e = 4; e <= 11; ++e) {
      const GridGeometry<double> g(std::pow(2.0, -e), 1.0);
      double worst = 0;
      for (int i = 1; i <= 99; ++i) {
        const auto b = roughvol::check_pointwise_bound(1.0, i / 100.0, g, p);
        REQUIRE(std::isfinite(b.lhs / b.rhs_shape));
        worst = std::max(worst, b.lhs / b.rhs_shape);
      }
      sup_ratio.push_back(worst);
    }
    CHECK(*std::max_element(sup_ratio.begin(), sup_ratio.end()) < 1.0);
    for (std::size_t i = sup_ratio.size() - 3; i < sup_ratio.size(); ++i) {
      CHECK(sup_ratio[i] == doctest::Approx(sup_ratio[i - 1]).epsilon(0.1));
    }
  }
  SUBCASE("lhs vanishes at fixed (t, u) as h shrinks") {
    const double coarse = roughvol::check_pointwise_bound(1.0, 0.25, GridGeometry<double>(1.0 / 16, 1.0), p).lhs;
    const double fine = roughvol::check_pointwise_bound(1.0, 0.25, GridGeometry<double>(1.0 / 4096, 1.0), p).lhs;
    CHECK(fine < coarse / 50);
  }
}

TEST_CASE("integral bounds follow h^alpha and h") {
  const double alpha = 0.8;
  const KernelParams<double> p(alpha);
  std::vector<roughvol::IntegralBounds<double>> rows;
  for (int e = 6; e <= 10; ++e) {
    const GridGeometry<double> g(std::pow(2.0, -e), 1.0);
    rows.push_back(roughvol::integral_bounds(1.0, g, p, 20000));
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CAPTURE(i);
    CHECK(rows[i].l1 / rows[i - 1].l1 == doctest::Approx(std::pow(2.0, -alpha)).epsilon(0.15));
    CHECK(rows[i].l2 / rows[i - 1].l2 == doctest::Approx(0.5).epsilon(0.15));
  }
}

TEST_CASE("integral bounds when t is inside the first cell") {
  const KernelParams<double> p(0.8);
  const GridGeometry<double> g(0.5, 1.0);
  const auto b = roughvol::integral_bounds(0.3, g, p, 1000);
  CHECK(b.l1 == doctest::Approx(0.3));
  CHECK(b.l2 == doctest::Approx(0.3));
  CHECK(b.l1 <= 0.3 + 1e-15);
  CHECK_THROWS_AS(roughvol::integral_bounds(0.3, g, p, 999), roughvol::DomainError);
  CHECK_THROWS_AS(roughvol::integral_bounds(0.0, g, p, 1000), roughvol::DomainError);
}

TEST_CASE("kernel evaluations are deterministic") {
  const KernelParams<double> p(0.7);
  const GridGeometry<double> g(1.0 / 64, 1.0);
  const double a = roughvol::g_h(0.9, 0.31, g, p);
  const double b = roughvol::g_h(0.9, 0.31, g, p);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("long double instantiation agrees with double") {
  const KernelParams<long double> pl(0.8L);
  const KernelParams<double> pd(0.8);
  const GridGeometry<long double> gl(0.1L, 1.0L);
  const GridGeometry<double> gd(0.1, 1.0);
  CHECK(static_cast<double>(roughvol::g_h(1.0L, 0.35L, gl, pl)) ==
        doctest::Approx(roughvol::g_h(1.0, 0.35, gd, pd)).epsilon(1e-13));
}

TEST_CASE("g_h ignores a grid point one ulp short of t") {
  const double alpha = 0.95, h = 1.0 / 49;
  const KernelParams<double> p(alpha);
  const GridGeometry<double> geom(h, 1.0);
  REQUIRE(49 * h < 1.0);
  for (double u : {0.1, 0.5, 0.9}) {
    const double at_one = roughvol::g_h(1.0, u, geom, p);
    CHECK(at_one == doctest::Approx(oracle::g_h_quadrature(1.0, u, h, alpha, 200000)).epsilon(1e-4));
    CHECK(std::abs(at_one - roughvol::g_h(49 * h, u, geom, p)) < 1e-12);
  }
}
