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

#include "oracles.hpp"

#include "nfloc/subspace.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace nfloc;

namespace
{
    CMatrix random_complex(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> n(0.0, 1.0);
        CMatrix out(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                out(i, j) = cdouble(n(rng), n(rng));
        return out;
    }

    // Noise-free snapshots of K sources on a ULA plus their steering matrix.
    std::pair<SnapshotSet, CMatrix> noise_free(const ArrayGeometry &g, const std::vector<Vec3> &sources,
                                               std::size_t t)
    {
        Scenario s{g, {}, 0.0, t, 17};
        for (const auto &p : sources)
            s.sources.push_back({p, 1.0, 1.0});
        CMatrix a(static_cast<Eigen::Index>(g.element_count()), static_cast<Eigen::Index>(sources.size()));
        for (std::size_t k = 0; k < sources.size(); ++k)
            a.col(static_cast<Eigen::Index>(k)) = steering_vector(g, sources[k], SteeringMode::exact);
        return {synthesize_snapshots(s), a};
    }
}

TEST_SUITE("subspace")
{
    TEST_CASE("axis sampling")
    {
        const Axis a{0.0, 1.0, 0.25};
        CHECK(a.size() == 5);
        CHECK(a.samples().back() == doctest::Approx(1.0));
        // 0.1 steps accumulate rounding; the endpoint is still included.
        CHECK(Axis{0.0, 0.3, 0.1}.size() == 4);
        CHECK(Axis{0.2, 0.2, 1.0}.size() == 1);
        CHECK_THROWS_AS(Axis({0.0, 1.0, 0.0}).validate("x"), ConfigError);
        CHECK_THROWS_AS(Axis({1.0, 0.0, 0.1}).validate("x"), ConfigError);
    }

    TEST_CASE("grid layout puts distance fastest")
    {
        GridSpec g;
        g.azimuth = {-0.1, 0.1, 0.1};
        g.elevation = Axis{0.0, 0.2, 0.2};
        g.distance = Axis{1.0, 4.0, 1.0};
        CHECK(g.cell_count() == 3 * 2 * 4);
        CHECK(g.shape() == std::vector<std::size_t>{3, 2, 4});
        const PolarPoint p = g.point(1 * 8 + 1 * 4 + 2);
        CHECK(p.direction.azimuth == doctest::Approx(0.0));
        CHECK(p.direction.elevation == doctest::Approx(0.2));
        CHECK(p.range == doctest::Approx(3.0));

        GridSpec flat;
        flat.azimuth = {0.0, 0.5, 0.5};
        CHECK(flat.point(1).range == 1.0);
        CHECK(flat.point(1).direction.elevation == 0.0);
    }

    TEST_CASE("sample covariance")
    {
        const CMatrix y = random_complex(5, 7, 1);
        const CovarianceEstimate c = sample_covariance(y);
        CHECK(c.snapshot_count == 7);
        CHECK((c.matrix - oracle::covariance(y)).norm() < 1e-12 * c.matrix.norm());
        CHECK((c.matrix - c.matrix.adjoint()).norm() == 0.0);

        const CMatrix one = random_complex(4, 1, 2);
        const CovarianceEstimate r1 = sample_covariance(one);
        CHECK((r1.matrix - one * one.adjoint()).norm() < 1e-14);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(r1.matrix);
        CHECK(es.eigenvalues()[2] < 1e-12 * es.eigenvalues()[3]);

        CHECK(sample_covariance(CMatrix::Zero(3, 4)).matrix.norm() == 0.0);

        // Unit-variance noise: real and imaginary parts of variance 1/2 each.
        const CMatrix noise = random_complex(6, 10000, 3) * std::sqrt(0.5);
        const CMatrix r = sample_covariance(noise).matrix;
        for (Eigen::Index i = 0; i < 6; ++i)
            for (Eigen::Index j = 0; j < 6; ++j)
            {
                if (i == j)
                    CHECK(r(i, i).real() == doctest::Approx(1.0).epsilon(0.05));
                else
                    CHECK(std::abs(r(i, j)) < 0.05);
            }
    }

    TEST_CASE("decomposition invariants")
    {
        const CMatrix y = random_complex(8, 20, 4);
        const CovarianceEstimate c = sample_covariance(y);
        for (std::size_t k = 1; k < 8; ++k)
        {
            const SubspaceDecomposition d = decompose(c, k);
            CHECK(d.signal_basis.cols() == static_cast<Eigen::Index>(k));
            CHECK(d.noise_basis.cols() == static_cast<Eigen::Index>(8 - k));
            for (Eigen::Index i = 1; i < 8; ++i)
                CHECK(d.eigenvalues[i - 1] >= d.eigenvalues[i]);

            CMatrix u(8, 8);
            u << d.signal_basis, d.noise_basis;
            CHECK((u.adjoint() * u - CMatrix::Identity(8, 8)).cwiseAbs().maxCoeff() <= 1e-10);

            const auto ks = static_cast<Eigen::Index>(k);
            const CMatrix rebuilt =
                d.signal_basis * d.eigenvalues.head(ks).asDiagonal() * d.signal_basis.adjoint() +
                d.noise_basis * d.eigenvalues.tail(8 - ks).asDiagonal() * d.noise_basis.adjoint();
            CHECK((c.matrix - rebuilt).norm() <= 1e-9 * c.matrix.norm());

            // Phase convention: the largest-magnitude entry of each vector is real positive.
            for (Eigen::Index col = 0; col < 8; ++col)
            {
                Eigen::Index at = 0;
                u.col(col).cwiseAbs().maxCoeff(&at);
                CHECK(u(at, col).real() > 0.0);
                CHECK(std::abs(u(at, col).imag()) < 1e-12);
            }

            // Projection identity on a random vector.
            const CVector v = random_complex(8, 1, 50 + k);
            const double split = (d.signal_basis.adjoint() * v).squaredNorm() +
                                 (d.noise_basis.adjoint() * v).squaredNorm();
            CHECK(std::abs(split - v.squaredNorm()) <= 1e-9 * v.squaredNorm());
        }
        CHECK_THROWS_AS(decompose(c, 0), DimensionError);
        CHECK_THROWS_AS(decompose(c, 8), DimensionError);
    }

    TEST_CASE("decomposition of structured covariances")
    {
        const CovarianceEstimate eye{CMatrix::Identity(6, 6), 1};
        const SubspaceDecomposition d = decompose(eye, 1);
        CHECK((d.eigenvalues - RVector::Ones(6)).cwiseAbs().maxCoeff() < 1e-12);
        const CMatrix rebuilt = d.signal_basis * d.signal_basis.adjoint() + d.noise_basis * d.noise_basis.adjoint();
        CHECK((rebuilt - eye.matrix).norm() < 1e-9);

        const auto g = ArrayGeometry::ula(8, 0.0025, 0.01);
        const CVector a = steering_vector(g, Direction{0.3, 0.0}, SteeringMode::farfield);
        const CovarianceEstimate r1{a * a.adjoint() + 0.01 * CMatrix::Identity(8, 8), 1};
        const SubspaceDecomposition dr = decompose(r1, 1);
        CHECK(dr.eigenvalues[0] == doctest::Approx(8.01).epsilon(1e-12));
        for (Eigen::Index i = 1; i < 8; ++i)
            CHECK(dr.eigenvalues[i] == doctest::Approx(0.01).epsilon(1e-9));
    }

    TEST_CASE("noise-free scenarios: rank, orthogonality and projection identity")
    {
        const auto g = ArrayGeometry::ula(16, 0.0025, 0.01);
        const std::vector<Vec3> all = {to_cartesian({0.25, {0.3, 0.0}}, g.origin()),
                                       to_cartesian({0.35, {-0.4, 0.0}}, g.origin()),
                                       to_cartesian({0.30, {0.9, 0.0}}, g.origin()),
                                       to_cartesian({0.45, {-0.05, 0.0}}, g.origin())};
        for (std::size_t k = 1; k <= 4; ++k)
        {
            const std::vector<Vec3> src(all.begin(), all.begin() + static_cast<long>(k));
            const auto [snaps, steer] = noise_free(g, src, k + 3);
            const auto cov = sample_covariance(snaps);
            const SubspaceDecomposition d = decompose(cov, k);
            const auto ks = static_cast<Eigen::Index>(k);
            for (Eigen::Index i = ks; i < 16; ++i)
                CHECK(d.eigenvalues[i] < 1e-10 * d.eigenvalues[0]);
            for (Eigen::Index s = 0; s < ks; ++s)
            {
                const CVector a = steer.col(s);
                CHECK((d.noise_basis.adjoint() * a).squaredNorm() <= 1e-8 * 16.0);
            }
            const CMatrix pn = d.noise_basis * d.noise_basis.adjoint();
            CHECK((pn - oracle::complement_projector(steer)).norm() < 1e-7);
        }
    }

    TEST_CASE("spectrum value")
    {
        const CMatrix y = random_complex(8, 12, 5);
        const SubspaceDecomposition d = decompose(sample_covariance(y), 3);
        const CVector v = d.noise_basis.col(2) * 2.0;
        CHECK(music_spectrum_value(d, v) == doctest::Approx(1.0 / v.squaredNorm()).epsilon(1e-9));

        const CVector s = d.signal_basis.col(0);
        CHECK(music_spectrum_value(d, s) > 1e9);

        const CVector r = random_complex(8, 1, 6);
        const CMatrix pn = oracle::complement_projector(d.signal_basis);
        const double explicit_value = 1.0 / ((r.adjoint() * pn * r)(0, 0).real() + 1e-12 * r.squaredNorm());
        CHECK(music_spectrum_value(d, r) == doctest::Approx(explicit_value).epsilon(1e-9));
    }

    TEST_CASE("spectrum evaluation on grids")
    {
        const auto g = ArrayGeometry::ula(16, 0.0025, 0.01);
        const Direction truth{deg_to_rad(12.0), 0.0};
        Scenario s{g, {{to_cartesian({1e6, truth}, g.origin()), 1.0, 1.0}}, 0.0, 4, 3};
        const auto d = decompose(sample_covariance(synthesize_snapshots(s)), 1);

        GridSpec angles;
        angles.azimuth = {deg_to_rad(-60.0), deg_to_rad(60.0), deg_to_rad(1.0)};
        const SpectrumGrid sg = evaluate_spectrum(d, g, angles, SteeringMode::farfield);
        CHECK(sg.values.size() == 121);
        const auto best = std::max_element(sg.values.begin(), sg.values.end()) - sg.values.begin();
        CHECK(best == 72);
        for (double v : sg.values)
        {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }

        GridSpec single;
        single.azimuth = {0.2, 0.2, 1.0};
        const SpectrumGrid one = evaluate_spectrum(d, g, single, SteeringMode::farfield);
        REQUIRE(one.values.size() == 1);
        const CVector a = steering_vector(g, Direction{0.2, 0.0}, SteeringMode::farfield);
        CHECK(one.values[0] == doctest::Approx(music_spectrum_value(d, a)).epsilon(1e-10));

        CHECK_THROWS_AS(evaluate_spectrum(d, g, angles, SteeringMode::exact), ContractError);
    }

    TEST_CASE("peak finding examples")
    {
        const std::vector<double> line = {0, 1, 0, 2, 0};
        const std::size_t shape1[] = {5};
        const PeakSet two = find_k_peaks(line, shape1, 2);
        REQUIRE(two.peaks.size() == 2);
        CHECK(two.peaks[0].index == 3);
        CHECK(two.peaks[1].index == 1);
        CHECK_FALSE(two.degraded());

        const std::vector<double> ramp = {0, 1, 2, 3, 4, 5};
        const std::size_t shape2[] = {6};
        const PeakSet top = find_k_peaks(ramp, shape2, 1);
        CHECK(top.peaks[0].index == 5);
        CHECK(top.on_boundary);
        CHECK(top.degraded());

        // Only one maximum exists; the second slot is padded with the best other cell.
        const PeakSet padded = find_k_peaks(line, shape1, 3);
        CHECK(padded.padded);
        CHECK(padded.peaks.size() == 3);
        CHECK(padded.peaks[2].value == 0.0);

        // Equal plateau values are not strict maxima.
        const std::vector<double> flat = {1, 3, 3, 1};
        const std::size_t shape3[] = {4};
        const PeakSet plateau = find_k_peaks(flat, shape3, 1);
        CHECK(plateau.padded);
        CHECK(plateau.peaks[0].index == 1);

        // Padding follows the real maxima even when a filler cell is larger.
        const std::vector<double> mixed = {5, 5, 0, 1, 0};
        const PeakSet order = find_k_peaks(mixed, shape1, 2);
        CHECK(order.peaks[0].index == 3);
        CHECK(order.peaks[1].index == 0);

        // Two Gaussian bumps on a 2D field.
        const std::size_t rows = 30, cols = 40;
        std::vector<double> field(rows * cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
            {
                const auto di = static_cast<double>(i), dj = static_cast<double>(j);
                field[i * cols + j] = std::exp(-((di - 8) * (di - 8) + (dj - 10) * (dj - 10)) / 20.0) +
                                      0.7 * std::exp(-((di - 20) * (di - 20) + (dj - 31) * (dj - 31)) / 30.0);
            }
        const std::size_t shape4[] = {rows, cols};
        const PeakSet bumps = find_k_peaks(field, shape4, 2);
        CHECK(bumps.peaks[0].index == 8 * cols + 10);
        CHECK(bumps.peaks[1].index == 20 * cols + 31);
        CHECK(bumps.peaks[1].coords == std::vector<std::size_t>{20, 31});
        CHECK_FALSE(bumps.degraded());
    }

    TEST_CASE("peak finder agrees with the brute-force oracle")
    {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const std::vector<std::vector<std::size_t>> shapes = {{37}, {9, 11}, {5, 6, 7}, {1, 13}, {4, 1, 9}};
        for (const auto &shape : shapes)
        {
            std::size_t n = 1;
            for (auto s : shape)
                n *= s;
            for (int rep = 0; rep < 20; ++rep)
            {
                std::vector<double> v(n);
                for (auto &x : v)
                    x = std::floor(u(rng) * 8.0); // coarse values force ties
                const auto want = oracle::local_maxima(v, shape);
                const std::size_t k = 4;
                const PeakSet got = find_k_peaks(v, shape, k);
                REQUIRE(got.peaks.size() == std::min(k, n));
                std::set<std::size_t> unique;
                for (const auto &p : got.peaks)
                    CHECK(unique.insert(p.index).second);
                const std::size_t real_peaks = std::min(k, want.size());
                for (std::size_t i = 0; i < real_peaks; ++i)
                    CHECK(got.peaks[i].index == want[i]);
                CHECK(got.padded == (want.size() < k));
            }
        }
    }

    TEST_CASE("streamed search matches the materialised one")
    {
        const auto g = ArrayGeometry::upa(6, 6, 0.075, 0.075, 0.3);
        Scenario s{g, {}, 0.01, 20, 9};
        s.sources = {{Vec3(0.9, 0.2, 0.1), 1.0, 1.0}, {Vec3(1.1, -0.3, -0.15), 1.0, 1.0}};
        const auto d = decompose(sample_covariance(synthesize_snapshots(s)), 2);
        GridSpec grid;
        grid.azimuth = {-0.6, 0.6, 0.05};
        grid.elevation = Axis{-0.3, 0.3, 0.05};
        grid.distance = Axis{0.6, 1.6, 0.05};

        SpectrumOptions full;
        full.materialize_cap = grid.cell_count();
        const PeakSet reference = find_k_peaks(evaluate_spectrum(d, g, grid, SteeringMode::exact, full), 5);
        for (std::size_t cap : {std::size_t{1}, std::size_t{500}, std::size_t{4096}, grid.cell_count()})
        {
            SpectrumOptions o;
            o.materialize_cap = cap;
            const PeakSet got = search_peaks(d, g, grid, SteeringMode::exact, 5, o);
            REQUIRE(got.peaks.size() == reference.peaks.size());
            for (std::size_t i = 0; i < got.peaks.size(); ++i)
            {
                CHECK(got.peaks[i].index == reference.peaks[i].index);
                CHECK(got.peaks[i].value == reference.peaks[i].value);
            }
            CHECK(got.padded == reference.padded);
            CHECK(got.on_boundary == reference.on_boundary);
        }
    }

    TEST_CASE("scaling the snapshots leaves peak locations unchanged")
    {
        const auto g = ArrayGeometry::ula(32, 0.0025, 0.01);
        Scenario s{g, {}, 0.05, 15, 21};
        s.sources = {{to_cartesian({0.3, {0.2, 0.0}}, g.origin()), 1.0, 1.0},
                     {to_cartesian({0.4, {-0.5, 0.0}}, g.origin()), 1.0, 1.0}};
        SnapshotSet y = synthesize_snapshots(s);
        GridSpec grid;
        grid.azimuth = {-1.0, 1.0, deg_to_rad(1.0)};
        grid.distance = Axis{0.2, 0.5, 0.01};
        const PeakSet base = search_peaks(decompose(sample_covariance(y), 2), g, grid, SteeringMode::exact, 2);
        y.data *= cdouble(-3.0, 2.0);
        const PeakSet scaled = search_peaks(decompose(sample_covariance(y), 2), g, grid, SteeringMode::exact, 2);
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(base.peaks[i].index == scaled.peaks[i].index);
    }

    TEST_CASE("spectrum CSV export")
    {
        SpectrumGrid sg;
        sg.roles = {AxisRole::azimuth, AxisRole::distance};
        sg.axes = {{0.0, 0.5}, {1.0, 2.0, 3.0}};
        sg.values = {1, 2, 3, 4, 5, 6};
        const auto path = std::filesystem::temp_directory_path() / "nfloc_spectrum.csv";
        write_spectrum_csv(sg, path);
        std::ifstream in(path);
        std::string header, row;
        std::getline(in, header);
        CHECK(header == "azimuth_rad,distance_m,value");
        std::getline(in, row);
        CHECK(row == "0,1,1");
        std::size_t lines = 1;
        while (std::getline(in, row))
            ++lines;
        CHECK(lines == 6);
        std::filesystem::remove(path);
    }
}
