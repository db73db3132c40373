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

#ifndef NFLOC_ESTIMATORS_HPP
#define NFLOC_ESTIMATORS_HPP

#include "nfloc/subspace.hpp"

#include <string>
#include <vector>

namespace nfloc
{
    enum class DistanceModel
    {
        exact,
        fresnel
    };

    inline SteeringMode steering_mode(DistanceModel model)
    {
        return model == DistanceModel::exact ? SteeringMode::exact : SteeringMode::fresnel;
    }

    struct SourceEstimate
    {
        Vec3 position = Vec3::Zero();
        PolarPoint polar;          // relative to element 0 of the full array
        std::string method;
        bool degraded = false;
    };

    // Far-field angular MUSIC on a covariance: 1D over azimuth for a ULA, 2D over
    // azimuth x elevation for a UPA. The grid must not carry a distance axis.
    struct AngularEstimate
    {
        std::vector<Direction> directions; // descending spectrum value
        bool degraded = false;
    };

    AngularEstimate music_farfield_angles(const CovarianceEstimate &cov, const ArrayGeometry &geom, std::size_t k,
                                          const GridSpec &angle_grid, const SpectrumOptions &opts = {});

    // Standard near-field MUSIC over azimuth x distance on the full ULA.
    std::vector<SourceEstimate> music_2d_nearfield(const SnapshotSet &snapshots, const ArrayGeometry &geom,
                                                   std::size_t k, const GridSpec &grid, DistanceModel model,
                                                   const SpectrumOptions &opts = {});

    // Near-field MUSIC over azimuth x elevation x distance on the full UPA. Large grids
    // are streamed (see SpectrumOptions::materialize_cap) with identical results.
    std::vector<SourceEstimate> music_3d_upa(const SnapshotSet &snapshots, const ArrayGeometry &geom, std::size_t k,
                                             const GridSpec &grid, DistanceModel model,
                                             const SpectrumOptions &opts = {});

    // Modified MUSIC for a symmetric ULA with M = 2N + 1 elements.
    //
    // The anti-diagonal R[n, M-1-n] of the covariance only carries the phase
    // 2 (n - N) gamma_k, gamma_k = (2 pi / lambda) d sin(az_k), because the
    // second-order range terms cancel between mirrored elements. It is cut into
    // `windows` overlapping sub-vectors of length 2N + 2 - windows whose averaged
    // outer product gives a rank-K reduced covariance. 1D MUSIC on it with
    // b(az)[l] = exp(j 2 l gamma) yields the azimuths; each range then comes from a
    // distance-only search of the full-array Fresnel spectrum, using grid.distance.
    // windows == 0 selects the default N + 1.
    std::vector<SourceEstimate> modified_music_ula(const SnapshotSet &snapshots, const ArrayGeometry &geom,
                                                   std::size_t k, const GridSpec &grid, std::size_t windows = 0,
                                                   const SpectrumOptions &opts = {});

    // Planar counterpart: mirrored element pairs (i, k) <-> (M_H-1-i, M_V-1-k) form an
    // M_H x M_V field of phases 2 (u alpha + w beta), which is smoothed with
    // windows_h x windows_v overlapping blocks. Angles come from a 2D search, ranges
    // from a distance-only search of the full-array Fresnel spectrum.
    // windows == 0 selects floor(M_H/2) + 1 (resp. M_V) windows per axis.
    std::vector<SourceEstimate> modified_music_upa(const SnapshotSet &snapshots, const ArrayGeometry &geom,
                                                   std::size_t k, const GridSpec &grid, std::size_t windows_h = 0,
                                                   std::size_t windows_v = 0, const SpectrumOptions &opts = {});

    // Helpers shared with the timing harness.
    CVector anti_diagonal(const CMatrix &cov);
    CMatrix smoothed_covariance(const CVector &field, std::size_t rows, std::size_t cols, std::size_t windows_h,
                                std::size_t windows_v);
}

#endif
