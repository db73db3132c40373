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

#include <cmath>
#include <complex>
#include <string>

namespace nfloc
{
    namespace
    {
        SourceEstimate make_estimate(const PolarPoint &polar, const ArrayGeometry &geom, const char *method,
                                     bool degraded)
        {
            SourceEstimate e;
            e.polar = polar;
            e.position = to_cartesian(polar, geom.origin());
            e.method = method;
            e.degraded = degraded;
            return e;
        }

        void require(bool ok, const std::string &what)
        {
            if (!ok)
                throw ContractError(what);
        }

        // Fresnel response expanded about the array centre: the symmetric-array
        // model the anti-diagonal construction relies on. Phases are relative to
        // the centre, which MUSIC does not see (a common phase cancels).
        void fill_centred_fresnel(const ArrayGeometry &geom, const Vec3 &centre, double range, const Direction &dir,
                                  CVector &out)
        {
            const double k0 = geom.wavenumber();
            const double ca = std::cos(dir.azimuth), sa = std::sin(dir.azimuth);
            const double ce = std::cos(dir.elevation), se = std::sin(dir.elevation);
            for (std::size_t m = 0; m < geom.element_count(); ++m)
            {
                const Vec3 off = geom.element_position(m) - centre;
                double dist = 0.0;
                if (geom.kind() == ArrayKind::ula)
                    dist = range + off.y() * off.y() * ca * ca / (2.0 * range) - off.y() * sa;
                else
                    dist = range + (off.y() * off.y() + off.z() * off.z()) / (2.0 * range) - off.y() * sa * ce -
                           off.z() * se;
                out[static_cast<Eigen::Index>(m)] = std::polar(1.0, -k0 * (dist - range));
            }
        }

        // Range-only search along a ray leaving the array centre. The anti-diagonal
        // of a symmetric array measures the bearing seen from its centre, so the
        // distance stage of Modified MUSIC walks that ray. The result is returned
        // relative to element 0 like every other estimate.
        PolarPoint centre_range_search(const SubspaceDecomposition &decomp, const ArrayGeometry &geom,
                                       const Direction &dir, const Axis &distance, const SpectrumOptions &opts,
                                       bool &degraded)
        {
            distance.validate("distance");
            const Vec3 centre = geom.center();
            const std::size_t n = distance.size();
            std::vector<double> values(n);
            CVector a(static_cast<Eigen::Index>(geom.element_count()));
            for (std::size_t i = 0; i < n; ++i)
            {
                fill_centred_fresnel(geom, centre, distance.at(i), dir, a);
                values[i] = music_spectrum_value(decomp, a);
            }
            if (opts.counter != nullptr)
            {
                const auto m = static_cast<std::uint64_t>(geom.element_count());
                const auto noise_dim = static_cast<std::uint64_t>(decomp.noise_basis.cols());
                opts.counter->evaluations += n;
                opts.counter->operations += 2 * n * (m * noise_dim + noise_dim);
            }
            const std::size_t shape[] = {n};
            const PeakSet best = find_k_peaks(values, shape, 1);
            degraded = degraded || best.degraded();
            return to_polar(to_cartesian({distance.at(best.peaks.front().index), dir}, centre), geom.origin());
        }
    }

    AngularEstimate music_farfield_angles(const CovarianceEstimate &cov, const ArrayGeometry &geom, std::size_t k,
                                          const GridSpec &angle_grid, const SpectrumOptions &opts)
    {
        require(!angle_grid.distance, "angular search grid must not have a distance axis");
        require(geom.kind() == ArrayKind::ula || angle_grid.elevation.has_value(),
                "planar arrays need an elevation axis");
        const auto decomp = decompose(cov, k);
        const PeakSet peaks = search_peaks(decomp, geom, angle_grid, SteeringMode::farfield, k, opts);
        AngularEstimate out;
        out.degraded = peaks.degraded();
        for (const auto &p : peaks.peaks)
            out.directions.push_back(angle_grid.point(p.index).direction);
        return out;
    }

    std::vector<SourceEstimate> music_2d_nearfield(const SnapshotSet &snapshots, const ArrayGeometry &geom,
                                                   std::size_t k, const GridSpec &grid, DistanceModel model,
                                                   const SpectrumOptions &opts)
    {
        require(geom.kind() == ArrayKind::ula, "2D near-field MUSIC needs a ULA");
        require(grid.distance.has_value() && !grid.elevation, "2D MUSIC grid needs azimuth and distance axes only");
        const auto decomp = decompose(sample_covariance(snapshots), k);
        const PeakSet peaks = search_peaks(decomp, geom, grid, steering_mode(model), k, opts);
        const char *tag = model == DistanceModel::exact ? "music2d" : "music2d-fresnel";
        std::vector<SourceEstimate> out;
        for (const auto &p : peaks.peaks)
            out.push_back(make_estimate(grid.point(p.index), geom, tag, peaks.degraded()));
        return out;
    }

    std::vector<SourceEstimate> music_3d_upa(const SnapshotSet &snapshots, const ArrayGeometry &geom, std::size_t k,
                                             const GridSpec &grid, DistanceModel model, const SpectrumOptions &opts)
    {
        require(geom.kind() == ArrayKind::upa, "3D MUSIC needs a UPA");
        require(grid.distance.has_value() && grid.elevation.has_value(),
                "3D MUSIC grid needs azimuth, elevation and distance axes");
        const auto decomp = decompose(sample_covariance(snapshots), k);
        const PeakSet peaks = search_peaks(decomp, geom, grid, steering_mode(model), k, opts);
        const char *tag = model == DistanceModel::exact ? "music3d" : "music3d-fresnel";
        std::vector<SourceEstimate> out;
        for (const auto &p : peaks.peaks)
            out.push_back(make_estimate(grid.point(p.index), geom, tag, peaks.degraded()));
        return out;
    }

    CVector anti_diagonal(const CMatrix &cov)
    {
        const Eigen::Index m = cov.rows();
        CVector z(m);
        for (Eigen::Index n = 0; n < m; ++n)
            z[n] = cov(n, m - 1 - n);
        return z;
    }

    CMatrix smoothed_covariance(const CVector &field, std::size_t rows, std::size_t cols, std::size_t windows_h,
                                std::size_t windows_v)
    {
        if (static_cast<std::size_t>(field.size()) != rows * cols)
            throw DimensionError("field size does not match rows x cols");
        if (windows_h < 1 || windows_h > rows || windows_v < 1 || windows_v > cols)
            throw ConfigError("window count out of range");
        const std::size_t lh = rows + 1 - windows_h;
        const std::size_t lv = cols + 1 - windows_v;
        const auto len = static_cast<Eigen::Index>(lh * lv);
        CMatrix out = CMatrix::Zero(len, len);
        CVector v(len);
        for (std::size_t b = 0; b < windows_v; ++b)
        {
            for (std::size_t a = 0; a < windows_h; ++a)
            {
                for (std::size_t lk = 0; lk < lv; ++lk)
                    for (std::size_t li = 0; li < lh; ++li)
                        v[static_cast<Eigen::Index>(li + lk * lh)] =
                            field[static_cast<Eigen::Index>((a + li) + (b + lk) * rows)];
                out.noalias() += v * v.adjoint();
            }
        }
        return out / static_cast<double>(windows_h * windows_v);
    }

    std::vector<SourceEstimate> modified_music_ula(const SnapshotSet &snapshots, const ArrayGeometry &geom,
                                                   std::size_t k, const GridSpec &grid, std::size_t windows,
                                                   const SpectrumOptions &opts)
    {
        require(geom.kind() == ArrayKind::ula, "modified_music_ula needs a ULA");
        const std::size_t m = geom.element_count();
        if (m % 2 == 0)
            throw ConfigError("Modified MUSIC needs an odd element count M = 2N + 1, got " + std::to_string(m));
        require(grid.distance.has_value(), "Modified MUSIC needs a distance axis for the range stage");
        const std::size_t n_half = (m - 1) / 2;
        if (windows == 0)
            windows = n_half + 1;
        if (windows <= k || windows > m)
            throw ConfigError("window count W = " + std::to_string(windows) + " must satisfy K < W <= M");
        const std::size_t len = m + 1 - windows;
        if (len <= k)
            throw ConfigError("sub-vector length 2N + 2 - W must exceed K");

        const CovarianceEstimate cov = sample_covariance(snapshots);

        // Angle stage on the reduced covariance of the virtual 2d-spaced array.
        const CMatrix reduced = smoothed_covariance(anti_diagonal(cov.matrix), m, 1, windows, 1);
        const auto virtual_geom = ArrayGeometry::ula(len, 2.0 * geom.spacing(), geom.wavelength());
        GridSpec angles;
        angles.azimuth = grid.azimuth;
        const AngularEstimate az = music_farfield_angles({reduced, cov.snapshot_count}, virtual_geom, k, angles, opts);

        // Range stage on the full-array subspace with the Fresnel response.
        const auto decomp = decompose(cov, k);
        std::vector<SourceEstimate> out;
        for (const auto &dir : az.directions)
        {
            bool degraded = az.degraded;
            const PolarPoint p = centre_range_search(decomp, geom, dir, *grid.distance, opts, degraded);
            out.push_back(make_estimate(p, geom, "modified", degraded));
        }
        return out;
    }

    std::vector<SourceEstimate> modified_music_upa(const SnapshotSet &snapshots, const ArrayGeometry &geom,
                                                   std::size_t k, const GridSpec &grid, std::size_t windows_h,
                                                   std::size_t windows_v, const SpectrumOptions &opts)
    {
        require(geom.kind() == ArrayKind::upa, "modified_music_upa needs a UPA");
        require(grid.distance.has_value() && grid.elevation.has_value(),
                "Modified MUSIC on a UPA needs azimuth, elevation and distance axes");
        const std::size_t mh = geom.horizontal_count();
        const std::size_t mv = geom.vertical_count();
        if (windows_h == 0)
            windows_h = mh / 2 + 1;
        if (windows_v == 0)
            windows_v = mv / 2 + 1;
        if (windows_h > mh || windows_v > mv || windows_h * windows_v <= k)
            throw ConfigError("window counts must fit the panel and exceed K in product");
        const std::size_t lh = mh + 1 - windows_h;
        const std::size_t lv = mv + 1 - windows_v;
        if (lh * lv <= k)
            throw ConfigError("smoothed block must have more than K entries");

        const CovarianceEstimate cov = sample_covariance(snapshots);
        const CMatrix reduced = smoothed_covariance(anti_diagonal(cov.matrix), mh, mv, windows_h, windows_v);
        const auto virtual_geom =
            ArrayGeometry::upa(lh, lv, 2.0 * geom.spacing_h(), 2.0 * geom.spacing_v(), geom.wavelength());
        GridSpec angles;
        angles.azimuth = grid.azimuth;
        angles.elevation = grid.elevation;
        const AngularEstimate dirs = music_farfield_angles({reduced, cov.snapshot_count}, virtual_geom, k, angles, opts);

        const auto decomp = decompose(cov, k);
        std::vector<SourceEstimate> out;
        for (const auto &dir : dirs.directions)
        {
            bool degraded = dirs.degraded;
            const PolarPoint p = centre_range_search(decomp, geom, dir, *grid.distance, opts, degraded);
            out.push_back(make_estimate(p, geom, "modified", degraded));
        }
        return out;
    }
}
