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

#ifndef NFLOC_TRIANGULATION_HPP
#define NFLOC_TRIANGULATION_HPP

#include "nfloc/estimators.hpp"

#include <vector>

namespace nfloc
{
    struct SubarrayBearings
    {
        Vec3 reference = Vec3::Zero();     // sub-array center
        std::vector<Direction> directions; // ascending azimuth (then elevation)
        bool degraded = false;
    };

    struct SubarrayAngleSet
    {
        std::vector<SubarrayBearings> subarrays;

        std::size_t source_count() const { return subarrays.empty() ? 0 : subarrays.front().directions.size(); }
    };

    // Least-squares system for one source. Lines u = p_q + t_q d_q are differenced
    // against the first one, giving b = [p_1 - p_q] (q = 2..Q) and A with -d_1 in
    // the first column of every block row and d_q in column q of block row q - 1.
    struct TriangulationSystem
    {
        RVector offsets;              // b, length D (Q - 1)
        RMatrix design;               // A, D (Q - 1) x Q
        std::vector<RVector> directions; // d_q, each of length D
        std::vector<RVector> anchors;    // p_q, each of length D
    };

    // Per sub-array far-field MUSIC followed by sorting of the K bearings.
    // ULA sub-arrays search angle_grid.azimuth; UPA sub-arrays search azimuth x
    // elevation. Throws ConfigError unless each sub-array has N = M / Q > K elements.
    SubarrayAngleSet estimate_subarray_angles(const SnapshotSet &snapshots, const ArrayGeometry &geom, std::size_t q,
                                              std::size_t k, const GridSpec &angle_grid,
                                              const SpectrumOptions &opts = {});

    TriangulationSystem build_triangulation_system(const SubarrayAngleSet &angles, std::size_t source,
                                                   int dimension);

    // Intersects the k-th bearing of every sub-array. dimension 2 uses
    // d = (cos az, sin az) in the X-Y plane, dimension 3 uses
    // d = (cos el cos az, cos el sin az, sin el). Solves the normal equations, or a
    // complete orthogonal decomposition when cond(A^T A) > 1e12, and averages the
    // per-line points p_q + t_q d_q. Throws DegenerateGeometryError (carrying the
    // source index) when every bearing of a source is parallel within 1e-9 rad.
    std::vector<SourceEstimate> triangulate(const SubarrayAngleSet &angles, int dimension);

    std::vector<SourceEstimate> proposed_localize(const SnapshotSet &snapshots, const ArrayGeometry &geom,
                                                  std::size_t q, std::size_t k, const GridSpec &angle_grid,
                                                  const SpectrumOptions &opts = {});

    // Simulation-only diagnostic: true when sorting the true bearings gives a
    // different source order on some sub-array than on the first one, i.e. the
    // sort-based association cannot pair the bearings correctly.
    bool association_swapped(const std::vector<Vec3> &truths, const std::vector<Subarray> &subarrays);
}

#endif
