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

#include "nfloc/subspace.hpp"
#include "nfloc/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>

namespace nfloc
{
    std::size_t Axis::size() const
    {
        if (!(step > 0.0) || stop < start)
            return 0;
        return static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    }

    std::vector<double> Axis::samples() const
    {
        std::vector<double> out(size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = at(i);
        return out;
    }

    void Axis::validate(const char *name) const
    {
        if (!(step > 0.0) || !std::isfinite(start) || !std::isfinite(stop) || stop < start)
            throw ConfigError(std::string(name) + " axis needs step > 0 and stop >= start");
    }

    void GridSpec::validate() const
    {
        azimuth.validate("azimuth");
        if (elevation)
            elevation->validate("elevation");
        if (distance)
        {
            distance->validate("distance");
            if (!(distance->start > 0.0))
                throw ConfigError("distance axis must start above zero");
        }
    }

    std::vector<std::size_t> GridSpec::shape() const
    {
        std::vector<std::size_t> s{azimuth.size()};
        if (elevation)
            s.push_back(elevation->size());
        if (distance)
            s.push_back(distance->size());
        return s;
    }

    std::size_t GridSpec::cell_count() const
    {
        std::size_t n = 1;
        for (auto d : shape())
            n *= d;
        return n;
    }

    PolarPoint GridSpec::point(std::size_t flat) const
    {
        PolarPoint p{1.0, {}};
        if (distance)
        {
            const std::size_t nd = distance->size();
            p.range = distance->at(flat % nd);
            flat /= nd;
        }
        if (elevation)
        {
            const std::size_t ne = elevation->size();
            p.direction.elevation = elevation->at(flat % ne);
            flat /= ne;
        }
        p.direction.azimuth = azimuth.at(flat);
        return p;
    }

    std::vector<std::size_t> SpectrumGrid::shape() const
    {
        std::vector<std::size_t> s;
        s.reserve(axes.size());
        for (const auto &a : axes)
            s.push_back(a.size());
        return s;
    }

    CovarianceEstimate sample_covariance(const CMatrix &data)
    {
        if (data.cols() < 1)
            throw DimensionError("sample covariance needs at least one snapshot");
        CovarianceEstimate out;
        out.snapshot_count = static_cast<std::size_t>(data.cols());
        CMatrix r = (data * data.adjoint()) / static_cast<double>(data.cols());
        out.matrix = 0.5 * (r + r.adjoint());
        return out;
    }

    CovarianceEstimate sample_covariance(const SnapshotSet &snapshots)
    {
        return sample_covariance(snapshots.data);
    }

    SubspaceDecomposition decompose(const CovarianceEstimate &cov, std::size_t k)
    {
        const auto m = static_cast<std::size_t>(cov.matrix.rows());
        if (cov.matrix.cols() != cov.matrix.rows())
            throw DimensionError("covariance must be square");
        if (k < 1 || k >= m)
            throw DimensionError("signal dimension K = " + std::to_string(k) + " must satisfy 1 <= K < M = " +
                                 std::to_string(m));

        Eigen::SelfAdjointEigenSolver<CMatrix> solver(cov.matrix);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("Hermitian eigendecomposition did not converge");

        // Eigen returns ascending order; flip to descending.
        const auto n = static_cast<Eigen::Index>(m);
        CMatrix vectors = solver.eigenvectors().rowwise().reverse();
        RVector values = solver.eigenvalues().reverse();

        for (Eigen::Index c = 0; c < n; ++c)
        {
            Eigen::Index pivot = 0;
            double best = -1.0;
            for (Eigen::Index r = 0; r < n; ++r)
            {
                const double mag = std::abs(vectors(r, c));
                if (mag > best)
                {
                    best = mag;
                    pivot = r;
                }
            }
            if (best > 0.0)
                vectors.col(c) *= std::conj(vectors(pivot, c)) / best;
        }

        SubspaceDecomposition out;
        const auto ks = static_cast<Eigen::Index>(k);
        out.signal_basis = vectors.leftCols(ks);
        out.noise_basis = vectors.rightCols(n - ks);
        out.eigenvalues = std::move(values);
        return out;
    }

    double music_spectrum_value(const SubspaceDecomposition &decomp, const CVector &a)
    {
        if (a.size() != decomp.noise_basis.rows())
            throw DimensionError("steering vector length does not match the subspace");
        const double projected = (decomp.noise_basis.adjoint() * a).squaredNorm();
        return 1.0 / (projected + 1e-12 * a.squaredNorm());
    }

    namespace
    {
        std::vector<AxisRole> roles_of(const GridSpec &grid)
        {
            std::vector<AxisRole> r{AxisRole::azimuth};
            if (grid.elevation)
                r.push_back(AxisRole::elevation);
            if (grid.distance)
                r.push_back(AxisRole::distance);
            return r;
        }

        void check_mode(const GridSpec &grid, SteeringMode mode)
        {
            if (mode != SteeringMode::farfield && !grid.distance)
                throw ContractError("near-field spectrum needs a distance axis");
        }

        std::vector<std::size_t> unravel(std::size_t flat, std::span<const std::size_t> shape)
        {
            std::vector<std::size_t> coords(shape.size());
            for (std::size_t d = shape.size(); d-- > 0;)
            {
                coords[d] = flat % shape[d];
                flat /= shape[d];
            }
            return coords;
        }

        // Strict local maximum over the 2*D axis neighbours that exist.
        template <typename ValueAt>
        bool is_local_max(std::size_t flat, std::span<const std::size_t> shape, ValueAt &&value_at)
        {
            const double v = value_at(flat);
            std::size_t stride = 1;
            std::size_t rest = flat;
            for (std::size_t d = shape.size(); d-- > 0;)
            {
                const std::size_t n = shape[d];
                const std::size_t coord = rest % n;
                rest /= n;
                if (coord > 0 && !(value_at(flat - stride) < v))
                    return false;
                if (coord + 1 < n && !(value_at(flat + stride) < v))
                    return false;
                stride *= n;
            }
            return true;
        }

        bool on_edge(std::span<const std::size_t> coords, std::span<const std::size_t> shape)
        {
            for (std::size_t d = 0; d < shape.size(); ++d)
                if (shape[d] > 1 && (coords[d] == 0 || coords[d] + 1 == shape[d]))
                    return true;
            return false;
        }

        // Keeps the best K strict maxima and the best K other cells seen so far.
        class PeakAccumulator
        {
        public:
            explicit PeakAccumulator(std::size_t k) : k_(k) {}

            void offer(std::size_t flat, double value, bool peak)
            {
                auto &list = peak ? peaks_ : others_;
                const Candidate c{flat, value};
                if (list.size() == k_ && !better(c, list.back()))
                    return;
                auto pos = std::lower_bound(list.begin(), list.end(), c, better);
                list.insert(pos, c);
                if (list.size() > k_)
                    list.pop_back();
            }

            PeakSet finish(std::span<const std::size_t> shape) const
            {
                PeakSet out;
                std::vector<Candidate> chosen = peaks_;
                if (chosen.size() < k_)
                {
                    out.padded = true;
                    for (const auto &c : others_)
                    {
                        if (chosen.size() == k_)
                            break;
                        chosen.push_back(c);
                    }
                }
                for (const auto &c : chosen)
                {
                    Peak p;
                    p.index = c.flat;
                    p.coords = unravel(c.flat, shape);
                    p.value = c.value;
                    if (on_edge(p.coords, shape))
                        out.on_boundary = true;
                    out.peaks.push_back(std::move(p));
                }
                return out;
            }

        private:
            struct Candidate
            {
                std::size_t flat;
                double value;
            };

            static bool better(const Candidate &a, const Candidate &b)
            {
                return a.value > b.value || (a.value == b.value && a.flat < b.flat);
            }

            std::size_t k_;
            std::vector<Candidate> peaks_;
            std::vector<Candidate> others_;
        };
    }

    SpectrumGrid evaluate_spectrum(const SubspaceDecomposition &decomp, const ArrayGeometry &geom,
                                   const GridSpec &grid, SteeringMode mode, const SpectrumOptions &opts)
    {
        grid.validate();
        check_mode(grid, mode);
        SpectrumGrid out;
        out.roles = roles_of(grid);
        out.axes.push_back(grid.azimuth.samples());
        if (grid.elevation)
            out.axes.push_back(grid.elevation->samples());
        if (grid.distance)
            out.axes.push_back(grid.distance->samples());
        out.values.resize(grid.cell_count());
        kernels::evaluate_parallel(decomp.noise_basis, geom, grid, mode, 0, out.values.size(), out.values,
                                   opts.workers, opts.counter);
        return out;
    }

    PeakSet find_k_peaks(std::span<const double> values, std::span<const std::size_t> shape, std::size_t k)
    {
        std::size_t cells = 1;
        for (auto n : shape)
            cells *= n;
        if (cells != values.size())
            throw DimensionError("value count does not match the grid shape");
        if (k > cells)
            throw DimensionError("grid has fewer cells than requested peaks");
        PeakAccumulator acc(k);
        const auto value_at = [&](std::size_t i) { return values[i]; };
        for (std::size_t i = 0; i < cells; ++i)
            acc.offer(i, values[i], is_local_max(i, shape, value_at));
        return acc.finish(shape);
    }

    PeakSet find_k_peaks(const SpectrumGrid &grid, std::size_t k)
    {
        const auto shape = grid.shape();
        return find_k_peaks(grid.values, shape, k);
    }

    PeakSet search_peaks(const SubspaceDecomposition &decomp, const ArrayGeometry &geom, const GridSpec &grid,
                         SteeringMode mode, std::size_t k, const SpectrumOptions &opts)
    {
        grid.validate();
        check_mode(grid, mode);
        const std::size_t cells = grid.cell_count();
        if (cells <= opts.materialize_cap)
            return find_k_peaks(evaluate_spectrum(decomp, geom, grid, mode, opts), k);
        if (k > cells)
            throw DimensionError("grid has fewer cells than requested peaks");

        // Streaming: a cell can be classified once the slab after it is known.
        const auto shape = grid.shape();
        const std::size_t slab = cells / shape.front();
        const std::size_t bc = kernels::block_cells;
        const std::size_t chunk = ((std::max<std::size_t>(slab, 4096) + bc - 1) / bc) * bc;

        PeakAccumulator acc(k);
        std::vector<double> window;
        std::size_t win_lo = 0;
        std::size_t next_check = 0;
        const auto value_at = [&](std::size_t i) { return window[i - win_lo]; };

        for (std::size_t c0 = 0; c0 < cells; c0 += chunk)
        {
            const std::size_t c1 = std::min(c0 + chunk, cells);
            const std::size_t old = window.size();
            window.resize(old + (c1 - c0));
            kernels::evaluate_parallel(decomp.noise_basis, geom, grid, mode, c0, c1,
                                       std::span<double>(window.data() + old, c1 - c0), opts.workers, opts.counter);

            const std::size_t check_end = c1 == cells ? cells : (c1 > slab ? c1 - slab : 0);
            for (; next_check < check_end; ++next_check)
                acc.offer(next_check, value_at(next_check), is_local_max(next_check, shape, value_at));

            const std::size_t keep_from = next_check > slab ? next_check - slab : 0;
            if (keep_from > win_lo)
            {
                window.erase(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(keep_from - win_lo));
                win_lo = keep_from;
            }
        }
        return acc.finish(shape);
    }

    void write_spectrum_csv(const SpectrumGrid &grid, const std::filesystem::path &path)
    {
        std::ofstream os(path, std::ios::trunc);
        if (!os)
            throw std::runtime_error("cannot open " + path.string() + " for writing");
        for (auto role : grid.roles)
        {
            switch (role)
            {
            case AxisRole::azimuth:
                os << "azimuth_rad,";
                break;
            case AxisRole::elevation:
                os << "elevation_rad,";
                break;
            case AxisRole::distance:
                os << "distance_m,";
                break;
            }
        }
        os << "value\n";
        const auto shape = grid.shape();
        char buf[32];
        for (std::size_t i = 0; i < grid.values.size(); ++i)
        {
            const auto coords = unravel(i, shape);
            for (std::size_t d = 0; d < coords.size(); ++d)
            {
                std::snprintf(buf, sizeof buf, "%.9g,", grid.axes[d][coords[d]]);
                os << buf;
            }
            std::snprintf(buf, sizeof buf, "%.9g\n", grid.values[i]);
            os << buf;
        }
        if (!os)
            throw std::runtime_error("write failed for " + path.string());
    }
}
