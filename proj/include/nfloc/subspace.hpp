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

#ifndef NFLOC_SUBSPACE_HPP
#define NFLOC_SUBSPACE_HPP

#include "nfloc/geometry.hpp"
#include "nfloc/synthesis.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace nfloc
{
    // Uniformly sampled search axis: start, start + step, ... up to stop (inclusive,
    // within a 1e-9 step tolerance).
    struct Axis
    {
        double start = 0.0;
        double stop = 0.0;
        double step = 1.0;

        std::size_t size() const;
        double at(std::size_t i) const { return start + static_cast<double>(i) * step; }
        std::vector<double> samples() const;
        void validate(const char *name) const;
    };

    // Search grid: azimuth always, elevation for planar arrays, distance for near-field
    // searches. Angles in radians, distance in meters.
    struct GridSpec
    {
        Axis azimuth;
        std::optional<Axis> elevation;
        std::optional<Axis> distance;

        void validate() const;
        std::size_t cell_count() const;
        // Axis sizes in storage order (azimuth, [elevation], [distance]); the last is fastest.
        std::vector<std::size_t> shape() const;
        // Polar point of a flat cell index. Missing elevation is 0, missing distance is 1.
        PolarPoint point(std::size_t flat) const;
    };

    struct CovarianceEstimate
    {
        CMatrix matrix;
        std::size_t snapshot_count = 0;
    };

    struct SubspaceDecomposition
    {
        CMatrix signal_basis;  // M x K
        CMatrix noise_basis;   // M x (M - K)
        RVector eigenvalues;   // descending, length M
    };

    // (1/T) Y Y^H, symmetrised.
    CovarianceEstimate sample_covariance(const SnapshotSet &snapshots);
    CovarianceEstimate sample_covariance(const CMatrix &data);

    // Hermitian eigendecomposition split into the K dominant eigenvectors and the
    // rest. Each eigenvector is rotated so that its largest-magnitude component is
    // real and positive. Throws DimensionError unless 1 <= K < M.
    SubspaceDecomposition decompose(const CovarianceEstimate &cov, std::size_t k);

    // 1 / (a^H Un Un^H a + 1e-12 |a|^2)
    double music_spectrum_value(const SubspaceDecomposition &decomp, const CVector &a);

    // Tally of the work done in the spectrum kernels. One multiply-accumulate of
    // complex values counts as two operations (multiply + add).
    struct OpCounter
    {
        std::atomic<std::uint64_t> evaluations{0};
        std::atomic<std::uint64_t> operations{0};

        void reset()
        {
            evaluations = 0;
            operations = 0;
        }
    };

    struct SpectrumOptions
    {
        int workers = 0;                          // 0: OpenMP default
        std::size_t materialize_cap = 1u << 22;   // cells; larger grids are streamed
        OpCounter *counter = nullptr;
    };

    enum class AxisRole
    {
        azimuth,
        elevation,
        distance
    };

    struct SpectrumGrid
    {
        std::vector<AxisRole> roles;
        std::vector<std::vector<double>> axes;
        std::vector<double> values; // row-major, last axis fastest

        std::vector<std::size_t> shape() const;
    };

    SpectrumGrid evaluate_spectrum(const SubspaceDecomposition &decomp, const ArrayGeometry &geom,
                                   const GridSpec &grid, SteeringMode mode, const SpectrumOptions &opts = {});

    struct Peak
    {
        std::size_t index = 0;
        std::vector<std::size_t> coords;
        double value = 0.0;
    };

    struct PeakSet
    {
        std::vector<Peak> peaks; // descending value
        bool padded = false;      // fewer than K strict local maxima were found
        bool on_boundary = false; // a returned cell lies on a grid edge

        bool degraded() const { return padded || on_boundary; }
    };

    // Top-K strict local maxima over axis-adjacent neighbours (edge cells compare
    // existing neighbours only). Ties in value go to the lower flat index. When
    // fewer than K maxima exist the remainder is filled with the largest other cells.
    PeakSet find_k_peaks(const SpectrumGrid &grid, std::size_t k);
    PeakSet find_k_peaks(std::span<const double> values, std::span<const std::size_t> shape, std::size_t k);

    // Evaluates the spectrum and extracts K peaks in one pass. Grids above
    // opts.materialize_cap cells are streamed slab by slab; the result is identical
    // to find_k_peaks(evaluate_spectrum(...), k).
    PeakSet search_peaks(const SubspaceDecomposition &decomp, const ArrayGeometry &geom, const GridSpec &grid,
                         SteeringMode mode, std::size_t k, const SpectrumOptions &opts = {});

    // One row per cell: axis values, then the spectrum value.
    void write_spectrum_csv(const SpectrumGrid &grid, const std::filesystem::path &path);
}

#endif
