// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with sub-array MUSIC
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "nfloc/estimators.hpp"
#include "nfloc/synthesis.hpp"

#include <doctest.h>

#include <cmath>

using namespace nfloc;

namespace
{
    SnapshotSet clean(const ArrayGeometry &g, const std::vector<Vec3> &sources, std::size_t t = 8)
    {
        Scenario s{g, {}, 0.0, t, 31};
        for (const auto &p : sources)
            s.sources.push_back({p, 1.0, 1.0});
        return synthesize_snapshots(s);
    }

    GridSpec ula_grid(double az_step, double dist_step)
    {
        GridSpec grid;
        grid.azimuth = {deg_to_rad(-60.0), deg_to_rad(60.0), az_step};
        grid.distance = Axis{0.05, 0.5, dist_step};
        return grid;
    }
}

TEST_SUITE("estimators")
{
    TEST_CASE("2D MUSIC recovers an on-grid source exactly")
    {
        const auto g = ArrayGeometry::ula(21, 0.0025, 0.01);
        const GridSpec grid = ula_grid(deg_to_rad(1.0), 0.01);
        for (std::size_t cell : {std::size_t{37 * 46 + 20}, std::size_t{80 * 46 + 7}, std::size_t{60 * 46 + 33}})
        {
            const PolarPoint truth = grid.point(cell);
            const auto est = music_2d_nearfield(clean(g, {to_cartesian(truth, g.origin())}), g, 1, grid,
                                                DistanceModel::exact);
            REQUIRE(est.size() == 1);
            CHECK(est[0].polar.range == doctest::Approx(truth.range).epsilon(1e-12));
            CHECK(est[0].polar.direction.azimuth == doctest::Approx(truth.direction.azimuth).epsilon(1e-12));
            CHECK(est[0].method == "music2d");
            CHECK_FALSE(est[0].degraded);
        }
    }

    TEST_CASE("2D MUSIC with the Fresnel model stays within a cell near the Bjornson distance")
    {
        const auto g = ArrayGeometry::ula(21, 0.0025, 0.01);
        const double bjo = field_boundaries(g).bjornson;
        GridSpec grid;
        grid.azimuth = {deg_to_rad(-30.0), deg_to_rad(30.0), deg_to_rad(1.0)};
        grid.distance = Axis{bjo, 4 * bjo, bjo / 20};
        const PolarPoint truth = grid.point(40 * grid.distance->size() + 5);
        const auto est = music_2d_nearfield(clean(g, {to_cartesian(truth, g.origin())}), g, 1, grid,
                                            DistanceModel::fresnel);
        CHECK(est[0].method == "music2d-fresnel");
        CHECK(std::abs(est[0].polar.range - truth.range) <= grid.distance->step * (1 + 1e-9));
        CHECK(std::abs(est[0].polar.direction.azimuth - truth.direction.azimuth) <= grid.azimuth.step * (1 + 1e-9));
    }

    TEST_CASE("3D MUSIC on a planar array")
    {
        const auto g = ArrayGeometry::upa(6, 6, 0.075, 0.075, 0.3);
        GridSpec grid;
        grid.azimuth = {deg_to_rad(-40.0), deg_to_rad(40.0), deg_to_rad(4.0)};
        grid.elevation = Axis{deg_to_rad(-20.0), deg_to_rad(20.0), deg_to_rad(4.0)};
        grid.distance = Axis{0.5, 1.5, 0.1};

        const PolarPoint truth = grid.point((13 * 11 + 7) * 11 + 3);
        const auto est = music_3d_upa(clean(g, {to_cartesian(truth, g.origin())}), g, 1, grid, DistanceModel::exact);
        CHECK(est[0].polar.range == doctest::Approx(truth.range).epsilon(1e-12));
        CHECK(est[0].polar.direction.azimuth == doctest::Approx(truth.direction.azimuth).epsilon(1e-12));
        CHECK(est[0].polar.direction.elevation == doctest::Approx(truth.direction.elevation).epsilon(1e-12));

        // Boresight of the panel centre, seen from element 0 at the matching angles.
        const Vec3 boresight = g.center() + Vec3(1.0, 0.0, 0.0);
        const auto centre_est = music_3d_upa(clean(g, {boresight}), g, 1, grid, DistanceModel::exact);
        const PolarPoint seen = to_polar(centre_est[0].position, g.center());
        CHECK(std::abs(seen.direction.azimuth) <= grid.azimuth.step);
        CHECK(std::abs(seen.direction.elevation) <= grid.elevation->step);

        CHECK_THROWS_AS(music_3d_upa(clean(g, {boresight}), g, 1, ula_grid(0.1, 0.1), DistanceModel::exact),
                        ContractError);
        CHECK_THROWS_AS(music_2d_nearfield(clean(g, {boresight}), g, 1, ula_grid(0.1, 0.1), DistanceModel::exact),
                        ContractError);
    }

    TEST_CASE("far-field angles on a ULA")
    {
        const auto g = ArrayGeometry::ula(16, 0.0025, 0.01);
        GridSpec grid;
        grid.azimuth = {deg_to_rad(-60.0), deg_to_rad(60.0), deg_to_rad(0.5)};
        const auto y = clean(g, {to_cartesian({1e5, {deg_to_rad(-20.0), 0.0}}, g.origin()),
                                 to_cartesian({1e5, {deg_to_rad(25.0), 0.0}}, g.origin())});
        const AngularEstimate a = music_farfield_angles(sample_covariance(y), g, 2, grid);
        REQUIRE(a.directions.size() == 2);
        std::vector<double> az{a.directions[0].azimuth, a.directions[1].azimuth};
        std::sort(az.begin(), az.end());
        CHECK(az[0] == doctest::Approx(deg_to_rad(-20.0)).epsilon(1e-9));
        CHECK(az[1] == doctest::Approx(deg_to_rad(25.0)).epsilon(1e-9));
        GridSpec near = grid;
        near.distance = Axis{1.0, 2.0, 0.5};
        CHECK_THROWS_AS(music_farfield_angles(sample_covariance(y), g, 2, near), ContractError);
    }

    TEST_CASE("anti-diagonal and smoothing")
    {
        CMatrix r(3, 3);
        r << 1, 2, 3, 4, 5, 6, 7, 8, 9;
        const CVector z = anti_diagonal(r);
        CHECK(z[0] == cdouble(3));
        CHECK(z[1] == cdouble(5));
        CHECK(z[2] == cdouble(7));

        CVector f(4);
        f << 1, 2, 3, 4;
        const CMatrix s = smoothed_covariance(f, 4, 1, 2, 1);
        REQUIRE(s.rows() == 3);
        // windows (1,2,3) and (2,3,4)
        CHECK(s(0, 0).real() == doctest::Approx((1 + 4) / 2.0));
        CHECK(s(0, 2).real() == doctest::Approx((3 + 8) / 2.0));
        CHECK(s(2, 2).real() == doctest::Approx((9 + 16) / 2.0));
        CHECK_THROWS_AS(smoothed_covariance(f, 3, 1, 1, 1), DimensionError);
        CHECK_THROWS_AS(smoothed_covariance(f, 4, 1, 5, 1), ConfigError);
    }

    TEST_CASE("Modified MUSIC on a symmetric ULA")
    {
        const auto g = ArrayGeometry::ula(21, 0.0025, 0.01);
        const GridSpec grid = ula_grid(deg_to_rad(1.0), 0.01);
        const Vec3 c = g.center();

        SUBCASE("single source: bearing from the centre and range within a cell")
        {
            const PolarPoint truth{0.25, {deg_to_rad(14.0), 0.0}};
            const auto est = modified_music_ula(clean(g, {to_cartesian(truth, c)}), g, 1, grid);
            REQUIRE(est.size() == 1);
            const PolarPoint seen = to_polar(est[0].position, c);
            CHECK(std::abs(seen.direction.azimuth - truth.direction.azimuth) <= grid.azimuth.step);
            CHECK(std::abs(seen.range - truth.range) <= grid.distance->step * (1 + 1e-9));
            CHECK(est[0].method == "modified");
            // The returned polar form is relative to element 0.
            CHECK(est[0].polar.range == doctest::Approx((est[0].position - g.origin()).norm()));
        }

        SUBCASE("mirrored sources give mirrored bearings")
        {
            const double az = deg_to_rad(23.0);
            const auto plus = modified_music_ula(clean(g, {to_cartesian({0.3, {az, 0.0}}, c)}), g, 1, grid);
            const auto minus = modified_music_ula(clean(g, {to_cartesian({0.3, {-az, 0.0}}, c)}), g, 1, grid);
            const double a = to_polar(plus[0].position, c).direction.azimuth;
            const double b = to_polar(minus[0].position, c).direction.azimuth;
            CHECK(a == doctest::Approx(-b).epsilon(1e-9));
        }

        SUBCASE("angle stage does not depend on range")
        {
            const double az1 = deg_to_rad(-17.0), az2 = deg_to_rad(31.0);
            std::vector<double> first;
            for (double scale : {1.0, 1.4, 2.0})
            {
                const auto est = modified_music_ula(
                    clean(g, {to_cartesian({0.1 * scale, {az1, 0.0}}, c), to_cartesian({0.13 * scale, {az2, 0.0}}, c)},
                          20),
                    g, 2, grid);
                std::vector<double> az;
                for (const auto &e : est)
                    az.push_back(to_polar(e.position, c).direction.azimuth);
                std::sort(az.begin(), az.end());
                if (first.empty())
                    first = az;
                for (std::size_t i = 0; i < 2; ++i)
                    CHECK(std::abs(az[i] - first[i]) <= grid.azimuth.step * (1 + 1e-9));
            }
        }

        SUBCASE("configuration errors")
        {
            const auto even = ArrayGeometry::ula(20, 0.0025, 0.01);
            CHECK_THROWS_AS(modified_music_ula(clean(even, {Vec3(0.2, 0, 0)}), even, 1, grid), ConfigError);
            const auto y = clean(g, {Vec3(0.2, 0, 0)});
            CHECK_THROWS_AS(modified_music_ula(y, g, 2, grid, 2), ConfigError);
            CHECK_THROWS_AS(modified_music_ula(y, g, 2, grid, 22), ConfigError);
            GridSpec angles_only;
            angles_only.azimuth = grid.azimuth;
            CHECK_THROWS_AS(modified_music_ula(y, g, 1, angles_only), ContractError);
        }
    }

    TEST_CASE("Modified MUSIC on a planar array")
    {
        const auto g = ArrayGeometry::upa(7, 7, 0.075, 0.075, 0.3);
        GridSpec grid;
        grid.azimuth = {deg_to_rad(-40.0), deg_to_rad(40.0), deg_to_rad(2.0)};
        grid.elevation = Axis{deg_to_rad(-20.0), deg_to_rad(20.0), deg_to_rad(2.0)};
        grid.distance = Axis{0.8, 2.0, 0.05};
        const PolarPoint truth{1.3, {deg_to_rad(12.0), deg_to_rad(-6.0)}};
        const auto est = modified_music_upa(clean(g, {to_cartesian(truth, g.center())}), g, 1, grid);
        const PolarPoint seen = to_polar(est[0].position, g.center());
        CHECK(std::abs(seen.direction.azimuth - truth.direction.azimuth) <= grid.azimuth.step);
        CHECK(std::abs(seen.direction.elevation - truth.direction.elevation) <= grid.elevation->step);
        CHECK(std::abs(seen.range - truth.range) <= 2 * grid.distance->step);
    }

    TEST_CASE("estimates do not depend on the worker count")
    {
        const auto g = ArrayGeometry::ula(21, 0.0025, 0.01);
        const GridSpec grid = ula_grid(deg_to_rad(1.0), 0.01);
        Scenario s{g, {{Vec3(0.2, 0.03, 0), 1, 1}, {Vec3(0.15, -0.1, 0), 1, 1}}, 0.3, 10, 77};
        const auto y = synthesize_snapshots(s);
        SpectrumOptions one, many;
        one.workers = 1;
        many.workers = 4;
        many.materialize_cap = 100;
        const auto a = music_2d_nearfield(y, g, 2, grid, DistanceModel::exact, one);
        const auto b = music_2d_nearfield(y, g, 2, grid, DistanceModel::exact, many);
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(a[i].position == b[i].position);
    }
}
