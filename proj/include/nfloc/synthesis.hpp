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

#ifndef NFLOC_SYNTHESIS_HPP
#define NFLOC_SYNTHESIS_HPP

#include "nfloc/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

namespace nfloc
{
    struct SourceTruth
    {
        Vec3 position = Vec3::Zero();
        double power = 1.0; // rho_k, variance of the emitted symbols
        double gain = 1.0;  // beta_k, constant channel gain
    };

    struct Scenario
    {
        ArrayGeometry geometry;
        std::vector<SourceTruth> sources;
        double noise_variance = 0.0;
        std::size_t snapshots = 15;
        std::uint64_t seed = 0;
    };

    // M x T observation matrix, one snapshot per column.
    struct SnapshotSet
    {
        CMatrix data;
        double wavelength = 0.0;

        std::size_t element_count() const { return static_cast<std::size_t>(data.rows()); }
        std::size_t snapshot_count() const { return static_cast<std::size_t>(data.cols()); }
    };

    struct Interval
    {
        double lo = 0.0;
        double hi = 0.0;
    };

    using Rng = std::mt19937_64;

    // Counter-based seed derivation (SplitMix64 finaliser over the mixed inputs).
    // Independent of how trials are scheduled across workers.
    std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter = 0);

    // K independent uniform placements in polar coordinates about element 0.
    // The elevation interval is used for UPAs only; ULAs place sources in the X-Y plane.
    std::vector<SourceTruth> sample_sources(const ArrayGeometry &geom, std::size_t k, Interval range,
                                            Interval azimuth, Rng &rng,
                                            std::optional<Interval> elevation = std::nullopt);

    // sigma^2 = min_k(beta_k rho_k) / 10^(snr_db / 10).
    Scenario set_noise_for_snr(Scenario scenario, double snr_db);

    // y[t] = sum_k sqrt(beta_k) exp(-j 2 pi r_0k / lambda) a_exact(source k) x_k[t] + n[t]
    // with x_k[t] ~ CN(0, rho_k) and n[t] ~ CN(0, sigma^2 I). Fully determined by
    // scenario.seed.
    SnapshotSet synthesize_snapshots(const Scenario &scenario);

    // Binary dump: 32-byte header (8-byte magic "NFSNAP01", uint64 M, uint64 T,
    // float64 lambda), then M*T interleaved (re, im) float64 pairs, row-major.
    // All values little-endian.
    void write_snapshots(const SnapshotSet &snaps, const std::filesystem::path &path);
    SnapshotSet read_snapshots(const std::filesystem::path &path);

    // FNV-1a over the raw matrix bytes; equal hashes mean byte-identical snapshots.
    std::uint64_t snapshot_hash(const SnapshotSet &snaps);
}

#endif
