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

#ifndef NFLOC_BENCH_HPP
#define NFLOC_BENCH_HPP

#include "nfloc/complexity.hpp"
#include "nfloc/triangulation.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nfloc::bench
{
    enum class Profile
    {
        desk,
        paper
    };

    // Scenario template plus search settings. Read from flat `key = value` files
    // (see parse_config for the keys); angles are stored in radians.
    struct ExperimentConfig
    {
        ArrayKind kind = ArrayKind::ula;
        std::size_t m = 63;          // ULA element count
        std::size_t mh = 8, mv = 8;  // UPA panel
        double lambda = 0.01;
        double spacing_over_lambda = 0.25;
        std::optional<double> dh, dv; // UPA spacings in meters, override spacing_over_lambda

        std::size_t sources = 4;
        std::size_t snapshots = 15;
        double snr_db = 10.0;
        std::uint64_t seed = 1;

        std::optional<Interval> range; // default [d_bjo, d_FA / 10]
        Interval azimuth{-pi / 3, pi / 3};
        Interval elevation{-pi / 6, pi / 6};

        std::size_t subarrays = 3;
        double az_step = deg_to_rad(1.0);
        double el_step = deg_to_rad(1.0);
        double dist_step = 0.029;
        double subarray_az_limit = deg_to_rad(80.0);
        double subarray_el_limit = deg_to_rad(60.0);
        std::size_t windows = 0; // Modified MUSIC window count per axis, 0 = default
        DistanceModel distance_model = DistanceModel::exact;

        ArrayGeometry geometry() const;
        Interval range_interval() const;
        // Near-field search grid over the scenario prior: azimuth, [elevation], distance.
        GridSpec nearfield_grid() const;
        // Far-field grid for the sub-arrays: +-subarray_az_limit (and +-subarray_el_limit).
        GridSpec subarray_grid() const;
    };

    ExperimentConfig default_config(ArrayKind kind, Profile profile);

    // Keys: kind (ula|upa), m, mh, mv, spacing_over_lambda, dh, dv, lambda_m,
    // sources, snapshots, snr_db, seed, range_min_m, range_max_m, az_min_deg,
    // az_max_deg, el_min_deg, el_max_deg, subarrays, az_step_deg, el_step_deg,
    // dist_step_m, subarray_az_limit_deg, subarray_el_limit_deg, windows,
    // distance_model (exact|fresnel). '#' starts a comment. Unknown keys and
    // malformed values throw ConfigError naming the line.
    ExperimentConfig parse_config(std::istream &in, ExperimentConfig base);
    ExperimentConfig load_config(const std::filesystem::path &path, ExperimentConfig base);
    std::string format_config(const ExperimentConfig &cfg);

    enum class MethodId
    {
        music2d,
        music3d,
        modified,
        proposed
    };

    struct MethodSpec
    {
        MethodId id = MethodId::proposed;
        DistanceModel model = DistanceModel::exact;

        // music2d, music2d-fresnel, music3d, music3d-fresnel, modified, proposed
        std::string label() const;
    };

    // Accepts the labels above; a bare music2d / music3d takes `default_model`.
    MethodSpec parse_method(std::string_view label, DistanceModel default_model = DistanceModel::exact);
    std::vector<MethodSpec> parse_methods(std::string_view comma_list, DistanceModel default_model);

    std::vector<SourceEstimate> run_method(const MethodSpec &method, const SnapshotSet &snapshots,
                                           const ExperimentConfig &cfg, const SpectrumOptions &opts = {});

    // Minimum-total-distance bijection, exhaustive over all K! permutations.
    struct Matching
    {
        std::vector<std::size_t> assignment; // truth i -> estimate assignment[i]
        std::vector<double> distances;       // |truth i - estimate assignment[i]|
        double total = 0.0;
    };

    Matching match_estimates(const std::vector<Vec3> &truths, const std::vector<Vec3> &estimates);

    // One trial of the Monte-Carlo loop: placement, snapshots, and the scenario used.
    struct TrialSetup
    {
        Scenario scenario;
        SnapshotSet snapshots;
        std::vector<Vec3> truths;
    };

    TrialSetup make_trial(const ExperimentConfig &cfg, std::uint64_t trial_seed);

    enum class SweepVariable
    {
        snr_db,
        source_count
    };

    struct SweepSpec
    {
        ExperimentConfig base;
        SweepVariable variable = SweepVariable::snr_db;
        std::vector<double> values;
        std::size_t trials = 200;
        std::vector<MethodSpec> methods;
        std::uint64_t master_seed = 1;
        bool record_timing = false; // elapsed_us stays 0 otherwise, keeping CSVs reproducible
        int workers = 1;            // trials evaluated in parallel
    };

    struct TrialRecord
    {
        double sweep_value = 0.0;
        std::size_t trial = 0;
        std::string method;
        std::vector<Vec3> truths;
        std::vector<Vec3> estimates; // estimates[i] is matched to truths[i]
        std::vector<double> errors;
        double elapsed_us = 0.0;
        bool degraded = false;
        bool swap_flag = false;
        bool failed = false;
        std::uint64_t snapshot_hash = 0;
    };

    struct SummaryRow
    {
        double sweep_value = 0.0;
        std::string method;
        double mae_m = 0.0;
        double mae_stderr = 0.0;
        double time_mean_us = 0.0;
        double time_std_us = 0.0;
        double degradation_rate = 0.0;
    };

    struct SweepResult
    {
        std::vector<TrialRecord> records; // ordered by (sweep value, method, trial)
        std::vector<SummaryRow> summaries;
    };

    // Every method of a trial sees the same snapshots. Placements and noise are
    // seeded per trial index, so all sweep values share them (common random
    // numbers); failed estimator runs become records with failed = true.
    SweepResult run_sweep(const SweepSpec &spec);

    // MAE over non-failed records, standard error from per-trial means, timing
    // moments, and the share of degraded or failed records. Row order follows
    // the first appearance of each (sweep value, method) pair.
    std::vector<SummaryRow> summarize(const std::vector<TrialRecord> &records);

    void emit_csv(const std::vector<TrialRecord> &records, const std::filesystem::path &path);
    void emit_csv(const std::vector<SummaryRow> &rows, const std::filesystem::path &path);
    void write_csv(const std::vector<TrialRecord> &records, std::ostream &os);
    void write_csv(const std::vector<SummaryRow> &rows, std::ostream &os);
    std::vector<TrialRecord> read_trials_csv(std::istream &is);
    std::vector<SummaryRow> read_summary_csv(std::istream &is);

    struct TimingResult
    {
        double mean_us = 0.0;
        double std_us = 0.0;
        double median_of_means_us = 0.0;
        std::size_t repetitions = 0;
    };

    // Times the spectrum-evaluation stage only (covariances, decompositions and,
    // for Modified MUSIC, the angle estimates are prepared beforehand), single
    // worker, after 5 discarded warm-up runs. Needs repetitions >= 10.
    TimingResult time_spectrum_evaluation(const MethodSpec &method, const ExperimentConfig &cfg,
                                          std::size_t repetitions);

    // Runs a method with every search axis sampled `samples` times across the
    // scenario prior (sub-array angle grids across +-subarray_az_limit) and returns
    // the operation tally of the spectrum kernels.
    CostModel instrumented_counts(const MethodSpec &method, const ExperimentConfig &cfg, std::size_t samples);

    struct BeamGainPoint
    {
        double angle = 0.0;
        double gain = 0.0;
    };

    // gain(az) = |a_farfield(az)^H a_exact(source)|^2 / M^2 for a ULA.
    std::vector<BeamGainPoint> beam_gain_sweep(const ArrayGeometry &geom, const Vec3 &source, const Axis &angles);

    // Number of grid angles whose gain is within 3 dB of the maximum.
    std::size_t three_db_support(const std::vector<BeamGainPoint> &curve);

    void emit_csv(const std::vector<BeamGainPoint> &curve, const std::filesystem::path &path);
}

#endif
