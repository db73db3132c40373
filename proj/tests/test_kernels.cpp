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

#include "nfloc/kernels.hpp"
#include "nfloc/synthesis.hpp"

#include <doctest.h>

#include <cmath>

using namespace nfloc;

namespace
{
    SubspaceDecomposition noisy_decomposition(const ArrayGeometry &g, std::size_t k, std::uint64_t seed)
    {
        Scenario s{g, {}, 0.1, 12, seed};
        for (std::size_t i = 0; i < k; ++i)
            s.sources.push_back({Vec3(0.4 + 0.1 * static_cast<double>(i), 0.05 * static_cast<double>(i), 0.02), 1.0, 1.0});
        return decompose(sample_covariance(synthesize_snapshots(s)), k);
    }

    GridSpec ula_grid()
    {
        GridSpec grid;
        grid.azimuth = {-1.0, 1.0, 0.013};
        grid.distance = Axis{0.1, 0.6, 0.01};
        return grid;
    }

    GridSpec upa_grid()
    {
        GridSpec grid;
        grid.azimuth = {-0.8, 0.8, 0.05};
        grid.elevation = Axis{-0.4, 0.4, 0.05};
        grid.distance = Axis{0.5, 1.5, 0.1};
        return grid;
    }
}

TEST_SUITE("kernels")
{
    TEST_CASE("parallel kernel matches the serial reference")
    {
        const auto ula = ArrayGeometry::ula(40, 0.0025, 0.01);
        const auto upa = ArrayGeometry::upa(6, 5, 0.075, 0.075, 0.3);
        const std::pair<ArrayGeometry, GridSpec> cases[] = {{ula, ula_grid()}, {upa, upa_grid()}};
        for (const auto &[g, grid] : cases)
        {
            const auto d = noisy_decomposition(g, 2, 4);
            for (SteeringMode mode : {SteeringMode::exact, SteeringMode::fresnel, SteeringMode::farfield})
            {
                const std::size_t n = grid.cell_count();
                std::vector<double> ref(n), par(n);
                kernels::evaluate_serial(d, g, grid, mode, ref);
                kernels::evaluate_parallel(d.noise_basis, g, grid, mode, 0, n, par, 3);
                double worst = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    worst = std::max(worst, std::abs(par[i] - ref[i]) / ref[i]);
                CHECK(worst < 1e-8);
            }
        }
    }

    TEST_CASE("results are bit-identical across worker counts")
    {
        const auto g = ArrayGeometry::ula(40, 0.0025, 0.01);
        const auto grid = ula_grid();
        const auto d = noisy_decomposition(g, 3, 5);
        const std::size_t n = grid.cell_count();
        std::vector<double> one(n);
        kernels::evaluate_parallel(d.noise_basis, g, grid, SteeringMode::exact, 0, n, one, 1);
        for (int w : {2, 3, 8})
        {
            std::vector<double> many(n);
            kernels::evaluate_parallel(d.noise_basis, g, grid, SteeringMode::exact, 0, n, many, w);
            CHECK(many == one);
        }
    }

    TEST_CASE("block-aligned sub-ranges reproduce the full evaluation")
    {
        const auto g = ArrayGeometry::ula(24, 0.0025, 0.01);
        const auto grid = ula_grid();
        const auto d = noisy_decomposition(g, 1, 6);
        const std::size_t n = grid.cell_count();
        std::vector<double> full(n);
        kernels::evaluate_parallel(d.noise_basis, g, grid, SteeringMode::fresnel, 0, n, full, 2);
        const std::size_t lo = 3 * kernels::block_cells;
        std::vector<double> part(n - lo);
        kernels::evaluate_parallel(d.noise_basis, g, grid, SteeringMode::fresnel, lo, n, part, 2);
        CHECK(std::equal(part.begin(), part.end(), full.begin() + static_cast<long>(lo)));

        OpCounter counter;
        kernels::evaluate_parallel(d.noise_basis, g, grid, SteeringMode::fresnel, 0, n, full, 1, &counter);
        CHECK(counter.evaluations == n);
        CHECK(counter.operations == 2 * n * (24 * 23 + 23));
    }

    TEST_CASE("kernel argument errors")
    {
        const auto g = ArrayGeometry::ula(24, 0.0025, 0.01);
        const auto grid = ula_grid();
        const auto d = noisy_decomposition(g, 1, 6);
        const std::size_t n = grid.cell_count();
        std::vector<double> out(n);
        CHECK_THROWS_AS(kernels::evaluate_parallel(d.noise_basis, g, grid, SteeringMode::exact, 3, n, out), DimensionError);
        CHECK_THROWS_AS(kernels::evaluate_parallel(d.noise_basis, g, grid, SteeringMode::exact, 0, 70, out), DimensionError);
        CHECK_THROWS_AS(kernels::evaluate_parallel(d.noise_basis, g, grid, SteeringMode::exact, 0, n + 1, out), DimensionError);
        std::vector<double> small(10);
        CHECK_THROWS_AS(kernels::evaluate_parallel(d.noise_basis, g, grid, SteeringMode::exact, 0, n, small), DimensionError);
        const auto other = ArrayGeometry::ula(20, 0.0025, 0.01);
        CHECK_THROWS_AS(kernels::evaluate_parallel(d.noise_basis, other, grid, SteeringMode::exact, 0, n, out), DimensionError);
        CHECK_THROWS_AS(kernels::evaluate_serial(d, g, grid, SteeringMode::exact, small), DimensionError);
    }
}
