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

#include <cmath>

#include <algorithm>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nfloc::kernels
{
    void evaluate_serial(const SubspaceDecomposition &decomp, const ArrayGeometry &geom, const GridSpec &grid,
                         SteeringMode mode, std::span<double> out)
    {
        const std::size_t cells = grid.cell_count();
        if (out.size() != cells)
            throw DimensionError("output span does not match the grid");
        CVector a(static_cast<Eigen::Index>(geom.element_count()));
        for (std::size_t c = 0; c < cells; ++c)
        {
            fill_steering(geom, grid.point(c), mode, std::span<cdouble>(a.data(), geom.element_count()));
            out[c] = music_spectrum_value(decomp, a);
        }
    }

    void evaluate_parallel(const CMatrix &noise_basis, const ArrayGeometry &geom, const GridSpec &grid,
                           SteeringMode mode, std::size_t begin, std::size_t end, std::span<double> out,
                           int workers, OpCounter *counter)
    {
        const std::size_t cells = grid.cell_count();
        if (begin % block_cells != 0 || end > cells || begin > end || (end % block_cells != 0 && end != cells))
            throw DimensionError("kernel range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                 ") is not block aligned");
        if (out.size() < end - begin)
            throw DimensionError("output span too short");
        const auto m = static_cast<Eigen::Index>(geom.element_count());
        if (noise_basis.rows() != m)
            throw DimensionError("noise basis does not match the array");
        const Eigen::Index noise_dim = noise_basis.cols();
        const auto n_blocks = static_cast<long>((end - begin + block_cells - 1) / block_cells);
        const auto block = static_cast<Eigen::Index>(block_cells);

#ifdef _OPENMP
        const int threads = workers > 0 ? workers : omp_get_max_threads();
#else
        (void)workers;
#endif

        // Trig of every axis sample, computed once per call.
        const std::size_t n_dist = grid.distance ? grid.distance->size() : 1;
        const std::size_t n_elev = grid.elevation ? grid.elevation->size() : 1;
        const std::size_t n_azim = grid.azimuth.size();
        std::vector<double> dist(n_dist, 1.0), sin_el(n_elev, 0.0), cos_el(n_elev, 1.0), sin_az(n_azim), cos_az(n_azim);
        for (std::size_t i = 0; i < n_dist && grid.distance; ++i)
            dist[i] = grid.distance->at(i);
        for (std::size_t i = 0; i < n_elev && grid.elevation; ++i)
        {
            sin_el[i] = std::sin(grid.elevation->at(i));
            cos_el[i] = std::cos(grid.elevation->at(i));
        }
        for (std::size_t i = 0; i < n_azim; ++i)
        {
            sin_az[i] = std::sin(grid.azimuth.at(i));
            cos_az[i] = std::cos(grid.azimuth.at(i));
        }
        const auto angles_at = [&](std::size_t flat) {
            const std::size_t id = flat % n_dist;
            flat /= n_dist;
            const std::size_t ie = flat % n_elev;
            const std::size_t ia = flat / n_elev;
            return SteeringAngles{dist[id], sin_az[ia], cos_az[ia], sin_el[ie], cos_el[ie]};
        };

#pragma omp parallel num_threads(threads)
        {
            CMatrix steer(m, block);
            CMatrix proj(noise_dim, block);

#pragma omp for schedule(static)
            for (long b = 0; b < n_blocks; ++b)
            {
                const std::size_t lo = begin + static_cast<std::size_t>(b) * block_cells;
                const std::size_t hi = std::min(lo + block_cells, end);
                const auto cols = static_cast<Eigen::Index>(hi - lo);
                for (Eigen::Index c = 0; c < cols; ++c)
                    fill_steering(geom, angles_at(lo + static_cast<std::size_t>(c)), mode,
                                  std::span<cdouble>(steer.col(c).data(), static_cast<std::size_t>(m)));
                proj.leftCols(cols).noalias() = noise_basis.adjoint() * steer.leftCols(cols);
                for (Eigen::Index c = 0; c < cols; ++c)
                {
                    const double reg = 1e-12 * steer.col(c).squaredNorm();
                    out[lo - begin + static_cast<std::size_t>(c)] = 1.0 / (proj.col(c).squaredNorm() + reg);
                }
            }
        }

        if (counter != nullptr)
        {
            // Per cell: M x (M-K) projection MACs plus (M-K) for the squared norm.
            const auto n = static_cast<std::uint64_t>(end - begin);
            const auto per_cell = static_cast<std::uint64_t>(m * noise_dim + noise_dim);
            counter->evaluations += n;
            counter->operations += 2 * n * per_cell;
        }
    }
}
