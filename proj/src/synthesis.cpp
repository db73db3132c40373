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

#include "nfloc/synthesis.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace nfloc
{
    namespace
    {
        std::uint64_t splitmix64(std::uint64_t x)
        {
            x += 0x9e3779b97f4a7c15ULL;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
            return x ^ (x >> 31);
        }

        void check_interval(const Interval &iv, const char *name)
        {
            if (!(iv.lo <= iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
                throw ConfigError(std::string("empty or invalid ") + name + " interval");
        }

        double draw(Rng &rng, const Interval &iv)
        {
            if (iv.lo == iv.hi)
                return iv.lo;
            return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
        }

        constexpr std::array<char, 8> snapshot_magic = {'N', 'F', 'S', 'N', 'A', 'P', '0', '1'};

        template <typename T>
        void put_le(std::ostream &os, T value)
        {
            static_assert(sizeof(T) == 8);
            auto bits = std::bit_cast<std::uint64_t>(value);
            std::array<char, 8> buf{};
            for (std::size_t b = 0; b < 8; ++b)
                buf[b] = static_cast<char>((bits >> (8 * b)) & 0xffU);
            os.write(buf.data(), 8);
        }

        template <typename T>
        T get_le(std::istream &is)
        {
            std::array<unsigned char, 8> buf{};
            is.read(reinterpret_cast<char *>(buf.data()), 8);
            std::uint64_t bits = 0;
            for (std::size_t b = 0; b < 8; ++b)
                bits |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
            return std::bit_cast<T>(bits);
        }
    }

    std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter)
    {
        return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ counter);
    }

    std::vector<SourceTruth> sample_sources(const ArrayGeometry &geom, std::size_t k, Interval range,
                                            Interval azimuth, Rng &rng, std::optional<Interval> elevation)
    {
        check_interval(range, "range");
        check_interval(azimuth, "azimuth");
        if (!(range.lo > 0.0))
            throw ConfigError("range interval must lie in (0, inf)");
        if (!(azimuth.lo > -pi / 2) || !(azimuth.hi < pi / 2))
            throw ConfigError("azimuth interval must lie in (-pi/2, pi/2)");
        const bool planar = geom.kind() == ArrayKind::upa;
        Interval el{0.0, 0.0};
        if (planar && elevation)
        {
            check_interval(*elevation, "elevation");
            el = *elevation;
        }

        std::vector<SourceTruth> out;
        out.reserve(k);
        for (std::size_t s = 0; s < k; ++s)
        {
            PolarPoint p;
            p.range = draw(rng, range);
            p.direction.azimuth = draw(rng, azimuth);
            if (planar)
                p.direction.elevation = draw(rng, el);
            SourceTruth t;
            t.position = to_cartesian(p, geom.origin());
            out.push_back(t);
        }
        return out;
    }

    Scenario set_noise_for_snr(Scenario scenario, double snr_db)
    {
        double weakest = 1.0;
        if (!scenario.sources.empty())
        {
            weakest = scenario.sources.front().gain * scenario.sources.front().power;
            for (const auto &s : scenario.sources)
                weakest = std::min(weakest, s.gain * s.power);
        }
        scenario.noise_variance = weakest / std::pow(10.0, snr_db / 10.0);
        return scenario;
    }

    SnapshotSet synthesize_snapshots(const Scenario &scenario)
    {
        const auto &geom = scenario.geometry;
        const auto m = static_cast<Eigen::Index>(geom.element_count());
        const auto t_count = static_cast<Eigen::Index>(scenario.snapshots);
        const auto k_count = static_cast<Eigen::Index>(scenario.sources.size());
        if (t_count < 1)
            throw ConfigError("snapshot count must be at least 1");

        // Channel columns h_k = sqrt(beta_k) exp(-j k0 r_0k) a_exact(psi_k).
        CMatrix channels(m, k_count);
        const double k0 = geom.wavenumber();
        for (Eigen::Index k = 0; k < k_count; ++k)
        {
            const auto &src = scenario.sources[static_cast<std::size_t>(k)];
            const double r0 = exact_distance(geom, 0, src.position);
            const cdouble coeff = std::sqrt(src.gain) * std::polar(1.0, -k0 * r0);
            channels.col(k) = coeff * steering_vector(geom, src.position, SteeringMode::exact);
        }

        Rng rng(scenario.seed);
        std::normal_distribution<double> normal(0.0, 1.0);

        // Draw order: symbols (k fastest, then t), then noise (m fastest, then t).
        CMatrix symbols(k_count, t_count);
        for (Eigen::Index t = 0; t < t_count; ++t)
        {
            for (Eigen::Index k = 0; k < k_count; ++k)
            {
                const double sd = std::sqrt(scenario.sources[static_cast<std::size_t>(k)].power / 2.0);
                const double re = normal(rng);
                const double im = normal(rng);
                symbols(k, t) = cdouble(sd * re, sd * im);
            }
        }

        SnapshotSet out;
        out.wavelength = geom.wavelength();
        out.data = CMatrix::Zero(m, t_count);
        if (k_count > 0)
            out.data.noalias() = channels * symbols;

        if (scenario.noise_variance > 0.0)
        {
            const double sd = std::sqrt(scenario.noise_variance / 2.0);
            for (Eigen::Index t = 0; t < t_count; ++t)
            {
                for (Eigen::Index e = 0; e < m; ++e)
                {
                    const double re = normal(rng);
                    const double im = normal(rng);
                    out.data(e, t) += cdouble(sd * re, sd * im);
                }
            }
        }
        return out;
    }

    void write_snapshots(const SnapshotSet &snaps, const std::filesystem::path &path)
    {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os)
            throw std::runtime_error("cannot open " + path.string() + " for writing");
        os.write(snapshot_magic.data(), snapshot_magic.size());
        put_le<std::uint64_t>(os, snaps.element_count());
        put_le<std::uint64_t>(os, snaps.snapshot_count());
        put_le<double>(os, snaps.wavelength);
        for (Eigen::Index r = 0; r < snaps.data.rows(); ++r)
        {
            for (Eigen::Index c = 0; c < snaps.data.cols(); ++c)
            {
                put_le<double>(os, snaps.data(r, c).real());
                put_le<double>(os, snaps.data(r, c).imag());
            }
        }
        if (!os)
            throw std::runtime_error("write failed for " + path.string());
    }

    SnapshotSet read_snapshots(const std::filesystem::path &path)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw std::runtime_error("cannot open " + path.string());
        std::array<char, 8> magic{};
        is.read(magic.data(), magic.size());
        if (!is || magic != snapshot_magic)
            throw std::runtime_error(path.string() + ": not a snapshot file");
        const auto m = get_le<std::uint64_t>(is);
        const auto t = get_le<std::uint64_t>(is);
        SnapshotSet out;
        out.wavelength = get_le<double>(is);
        out.data.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(t));
        for (Eigen::Index r = 0; r < out.data.rows(); ++r)
        {
            for (Eigen::Index c = 0; c < out.data.cols(); ++c)
            {
                const double re = get_le<double>(is);
                const double im = get_le<double>(is);
                out.data(r, c) = cdouble(re, im);
            }
        }
        if (!is)
            throw std::runtime_error(path.string() + ": truncated snapshot file");
        return out;
    }

    std::uint64_t snapshot_hash(const SnapshotSet &snaps)
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        const auto *bytes = reinterpret_cast<const unsigned char *>(snaps.data.data());
        const std::size_t n = static_cast<std::size_t>(snaps.data.size()) * sizeof(cdouble);
        for (std::size_t i = 0; i < n; ++i)
        {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
        return h;
    }
}
