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

#include "nfloc/triangulation.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace nfloc
{
    namespace
    {
        bool bearing_less(const Direction &a, const Direction &b)
        {
            if (a.azimuth != b.azimuth)
                return a.azimuth < b.azimuth;
            return a.elevation < b.elevation;
        }

        RVector direction_vector(const Direction &dir, int dimension)
        {
            if (dimension == 2)
                return Eigen::Vector2d(std::cos(dir.azimuth), std::sin(dir.azimuth));
            return unit_direction(dir);
        }

        RVector anchor(const Vec3 &p, int dimension)
        {
            if (dimension == 2)
                return p.head<2>();
            return p;
        }

        // Sine of the angle between two unit vectors.
        double parallel_sine(const RVector &a, const RVector &b)
        {
            if (a.size() == 2)
                return std::abs(a[0] * b[1] - a[1] * b[0]);
            return Eigen::Vector3d(a).cross(Eigen::Vector3d(b)).norm();
        }
    }

    SubarrayAngleSet estimate_subarray_angles(const SnapshotSet &snapshots, const ArrayGeometry &geom, std::size_t q,
                                              std::size_t k, const GridSpec &angle_grid, const SpectrumOptions &opts)
    {
        if (snapshots.element_count() != geom.element_count())
            throw DimensionError("snapshot rows do not match the array");
        const auto subs = subarray_split(geom, q);
        const std::size_t n = subs.front().geometry.element_count();
        if (n <= k)
            throw ConfigError("sub-arrays have N = " + std::to_string(n) + " elements, need N > K = " +
                              std::to_string(k));

        GridSpec grid;
        grid.azimuth = angle_grid.azimuth;
        if (geom.kind() == ArrayKind::upa)
        {
            if (!angle_grid.elevation)
                throw ContractError("planar sub-arrays need an elevation axis");
            grid.elevation = angle_grid.elevation;
        }

        SubarrayAngleSet out;
        out.subarrays.resize(subs.size());
        const auto t = snapshots.data.cols();
        for (std::size_t s = 0; s < subs.size(); ++s)
        {
            const auto &sub = subs[s];
            CMatrix rows(static_cast<Eigen::Index>(n), t);
            for (std::size_t e = 0; e < n; ++e)
                rows.row(static_cast<Eigen::Index>(e)) = snapshots.data.row(static_cast<Eigen::Index>(sub.parent_indices[e]));

            AngularEstimate est = music_farfield_angles(sample_covariance(rows), sub.geometry, k, grid, opts);
            std::sort(est.directions.begin(), est.directions.end(), bearing_less);
            out.subarrays[s].reference = sub.center;
            out.subarrays[s].directions = std::move(est.directions);
            out.subarrays[s].degraded = est.degraded;
        }
        return out;
    }

    TriangulationSystem build_triangulation_system(const SubarrayAngleSet &angles, std::size_t source, int dimension)
    {
        if (dimension != 2 && dimension != 3)
            throw ConfigError("triangulation dimension must be 2 or 3");
        const std::size_t q = angles.subarrays.size();
        if (q < 2)
            throw ConfigError("triangulation needs at least two sub-arrays");

        TriangulationSystem sys;
        for (const auto &sa : angles.subarrays)
        {
            if (source >= sa.directions.size())
                throw DimensionError("sub-array bearing list is shorter than the source index");
            sys.directions.push_back(direction_vector(sa.directions[source], dimension));
            sys.anchors.push_back(anchor(sa.reference, dimension));
        }

        const auto dim = static_cast<Eigen::Index>(dimension);
        const auto rows = dim * static_cast<Eigen::Index>(q - 1);
        sys.offsets = RVector::Zero(rows);
        sys.design = RMatrix::Zero(rows, static_cast<Eigen::Index>(q));
        for (std::size_t j = 1; j < q; ++j)
        {
            const auto r0 = dim * static_cast<Eigen::Index>(j - 1);
            sys.offsets.segment(r0, dim) = sys.anchors[0] - sys.anchors[j];
            sys.design.block(r0, 0, dim, 1) = -sys.directions[0];
            sys.design.block(r0, static_cast<Eigen::Index>(j), dim, 1) = sys.directions[j];
        }
        return sys;
    }

    std::vector<SourceEstimate> triangulate(const SubarrayAngleSet &angles, int dimension)
    {
        const std::size_t k_count = angles.source_count();
        for (const auto &sa : angles.subarrays)
            if (sa.directions.size() != k_count)
                throw DimensionError("every sub-array must report the same number of bearings");

        bool any_degraded = false;
        for (const auto &sa : angles.subarrays)
            any_degraded = any_degraded || sa.degraded;

        std::vector<SourceEstimate> out;
        out.reserve(k_count);
        for (std::size_t k = 0; k < k_count; ++k)
        {
            const TriangulationSystem sys = build_triangulation_system(angles, k, dimension);
            const std::size_t q = sys.directions.size();

            bool all_parallel = true;
            for (std::size_t j = 1; j < q && all_parallel; ++j)
                all_parallel = parallel_sine(sys.directions[0], sys.directions[j]) <= std::sin(1e-9);
            if (all_parallel)
                throw DegenerateGeometryError("bearings of source " + std::to_string(k) + " never intersect", k);

            const RMatrix normal = sys.design.transpose() * sys.design;
            Eigen::SelfAdjointEigenSolver<RMatrix> spectrum(normal, Eigen::EigenvaluesOnly);
            const double lo = spectrum.eigenvalues().minCoeff();
            const double hi = spectrum.eigenvalues().maxCoeff();
            RVector t;
            if (lo > 0.0 && hi / lo <= 1e12)
                t = normal.ldlt().solve(sys.design.transpose() * sys.offsets);
            else
                t = sys.design.completeOrthogonalDecomposition().solve(sys.offsets);

            RVector sum = RVector::Zero(dimension);
            for (std::size_t j = 0; j < q; ++j)
                sum += sys.anchors[j] + t[static_cast<Eigen::Index>(j)] * sys.directions[j];
            sum /= static_cast<double>(q);

            SourceEstimate e;
            if (dimension == 2)
            {
                double z = 0.0;
                for (const auto &sa : angles.subarrays)
                    z += sa.reference.z();
                e.position = Vec3(sum[0], sum[1], z / static_cast<double>(q));
            }
            else
            {
                e.position = Vec3(sum[0], sum[1], sum[2]);
            }
            e.polar = to_polar(e.position);
            e.method = "proposed";
            e.degraded = any_degraded;
            out.push_back(std::move(e));
        }
        return out;
    }

    std::vector<SourceEstimate> proposed_localize(const SnapshotSet &snapshots, const ArrayGeometry &geom,
                                                  std::size_t q, std::size_t k, const GridSpec &angle_grid,
                                                  const SpectrumOptions &opts)
    {
        const auto angles = estimate_subarray_angles(snapshots, geom, q, k, angle_grid, opts);
        return triangulate(angles, geom.kind() == ArrayKind::ula ? 2 : 3);
    }

    bool association_swapped(const std::vector<Vec3> &truths, const std::vector<Subarray> &subarrays)
    {
        std::vector<std::size_t> first;
        for (std::size_t s = 0; s < subarrays.size(); ++s)
        {
            std::vector<Direction> bearings;
            for (const auto &t : truths)
                bearings.push_back(to_polar(t, subarrays[s].center).direction);
            std::vector<std::size_t> order(truths.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return bearing_less(bearings[a], bearings[b]); });
            if (s == 0)
                first = order;
            else if (order != first)
                return true;
        }
        return false;
    }
}
