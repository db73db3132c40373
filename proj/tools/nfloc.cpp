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

#include "nfloc/bench.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace nfloc;
using namespace nfloc::bench;

namespace
{
    struct Common
    {
        std::string config;
        std::string method;
        std::size_t trials = 200;
        std::optional<std::uint64_t> seed;
        std::string out;
        std::string profile = "desk";
        std::string array = "ula";
        std::string distance_model;
        std::optional<double> az_step_deg;
        std::optional<double> el_step_deg;
        std::optional<double> dist_step_m;
        std::optional<std::size_t> subarrays;
        int workers = 1;
        bool record_timing = false;
    };

    void add_common(CLI::App *cmd, Common &c, bool with_trials)
    {
        cmd->add_option("--config", c.config, "scenario file (key = value)")->check(CLI::ExistingFile);
        cmd->add_option("--method", c.method,
                        "comma list of music2d, music3d, modified, proposed (suffix -exact/-fresnel allowed)");
        if (with_trials)
            cmd->add_option("--trials", c.trials, "Monte-Carlo trials per sweep value")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
        cmd->add_option("--out", c.out, "output path or prefix");
        cmd->add_option("--profile", c.profile, "default scale")->check(CLI::IsMember({"desk", "paper"}));
        cmd->add_option("--array", c.array, "array kind")->check(CLI::IsMember({"ula", "upa"}));
        cmd->add_option("--distance-model", c.distance_model, "steering model for near-field MUSIC")
            ->check(CLI::IsMember({"exact", "fresnel"}));
        cmd->add_option("--az-step-deg", c.az_step_deg, "azimuth grid step")->check(CLI::PositiveNumber);
        cmd->add_option("--el-step-deg", c.el_step_deg, "elevation grid step")->check(CLI::PositiveNumber);
        cmd->add_option("--dist-step-m", c.dist_step_m, "distance grid step")->check(CLI::PositiveNumber);
        cmd->add_option("--subarrays", c.subarrays, "sub-array count Q for the proposed method")
            ->check(CLI::PositiveNumber);
    }

    ExperimentConfig resolve(const Common &c)
    {
        const ArrayKind kind = c.array == "upa" ? ArrayKind::upa : ArrayKind::ula;
        ExperimentConfig cfg = default_config(kind, c.profile == "paper" ? Profile::paper : Profile::desk);
        if (!c.config.empty())
            cfg = load_config(c.config, cfg);
        if (c.seed)
            cfg.seed = *c.seed;
        if (!c.distance_model.empty())
            cfg.distance_model = c.distance_model == "exact" ? DistanceModel::exact : DistanceModel::fresnel;
        if (c.az_step_deg)
            cfg.az_step = deg_to_rad(*c.az_step_deg);
        if (c.el_step_deg)
            cfg.el_step = deg_to_rad(*c.el_step_deg);
        if (c.dist_step_m)
            cfg.dist_step = *c.dist_step_m;
        if (c.subarrays)
            cfg.subarrays = *c.subarrays;
        return cfg;
    }

    std::vector<MethodSpec> methods_for(const Common &c, const ExperimentConfig &cfg)
    {
        if (!c.method.empty())
            return parse_methods(c.method, cfg.distance_model);
        if (cfg.kind == ArrayKind::ula)
            return parse_methods("music2d,modified,proposed", cfg.distance_model);
        return parse_methods("music3d,modified,proposed", cfg.distance_model);
    }

    std::vector<double> parse_values(const std::string &list)
    {
        std::vector<double> out;
        std::stringstream ss(list);
        std::string item;
        while (std::getline(ss, item, ','))
        {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size())
                throw ConfigError("bad sweep value '" + item + "'");
            out.push_back(v);
        }
        if (out.empty())
            throw ConfigError("no sweep values");
        return out;
    }

    void print_position(const char *label, const Vec3 &p)
    {
        const PolarPoint q = to_polar(p, Vec3::Zero());
        std::printf("  %-10s x=%+.4f y=%+.4f z=%+.4f  r=%.4f az=%+.3f el=%+.3f deg\n", label, p.x(), p.y(), p.z(),
                    q.range, rad_to_deg(q.direction.azimuth), rad_to_deg(q.direction.elevation));
    }

    int run_simulate(const Common &c, const std::string &dump, const std::string &spectrum_out)
    {
        const ExperimentConfig cfg = resolve(c);
        const auto methods = methods_for(c, cfg);
        const TrialSetup setup = make_trial(cfg, cfg.seed);
        if (!dump.empty())
            write_snapshots(setup.snapshots, dump);

        std::printf("scenario: %s, K=%zu, T=%zu, SNR=%.1f dB, seed=%llu, snapshot hash %016llx\n",
                    cfg.kind == ArrayKind::ula ? "ula" : "upa", cfg.sources, cfg.snapshots, cfg.snr_db,
                    static_cast<unsigned long long>(cfg.seed),
                    static_cast<unsigned long long>(snapshot_hash(setup.snapshots)));
        for (std::size_t i = 0; i < setup.truths.size(); ++i)
            print_position(("truth " + std::to_string(i)).c_str(), setup.truths[i]);

        for (const auto &m : methods)
        {
            std::printf("%s:\n", m.label().c_str());
            std::vector<SourceEstimate> est;
            try
            {
                est = run_method(m, setup.snapshots, cfg, {});
            }
            catch (const std::exception &e)
            {
                std::printf("  failed: %s\n", e.what());
                continue;
            }
            std::vector<Vec3> pos;
            for (const auto &e : est)
                pos.push_back(e.position);
            const Matching match = match_estimates(setup.truths, pos);
            for (std::size_t i = 0; i < setup.truths.size(); ++i)
            {
                const auto &e = est[match.assignment[i]];
                print_position(("est " + std::to_string(i)).c_str(), e.position);
                std::printf("             error %.4f m%s\n", match.distances[i], e.degraded ? " (degraded)" : "");
            }
        }

        if (!spectrum_out.empty())
        {
            const SubspaceDecomposition d = decompose(sample_covariance(setup.snapshots), cfg.sources);
            const MethodSpec first = methods.front();
            const SteeringMode mode = steering_mode(first.id == MethodId::proposed || first.id == MethodId::modified
                                                        ? cfg.distance_model
                                                        : first.model);
            const SpectrumGrid grid = evaluate_spectrum(d, cfg.geometry(), cfg.nearfield_grid(), mode, {});
            write_spectrum_csv(grid, spectrum_out);
            std::printf("spectrum written to %s\n", spectrum_out.c_str());
        }
        return 0;
    }

    int run_sweep_cmd(const Common &c, SweepVariable variable, const std::string &values)
    {
        const ExperimentConfig cfg = resolve(c);
        SweepSpec spec;
        spec.base = cfg;
        spec.variable = variable;
        spec.values = parse_values(values);
        spec.trials = c.trials;
        spec.methods = methods_for(c, cfg);
        spec.master_seed = cfg.seed;
        spec.record_timing = c.record_timing;
        spec.workers = c.workers;

        const SweepResult result = run_sweep(spec);
        const std::string prefix = c.out.empty() ? (variable == SweepVariable::snr_db ? "sweep_snr" : "sweep_sources")
                                                 : c.out;
        emit_csv(result.records, prefix + "_trials.csv");
        emit_csv(result.summaries, prefix + "_summary.csv");
        write_csv(result.summaries, std::cout);
        return 0;
    }

    int run_timing(const Common &c, std::size_t reps)
    {
        const ExperimentConfig cfg = resolve(c);
        const auto methods = methods_for(c, cfg);
        std::ofstream file;
        std::ostream *os = &std::cout;
        if (!c.out.empty())
        {
            file.open(c.out);
            if (!file)
                throw std::runtime_error("cannot open " + c.out + " for writing");
            os = &file;
        }
        *os << "method,mean_us,std_us,median_of_means_us,repetitions\n";
        for (const auto &m : methods)
        {
            const TimingResult t = time_spectrum_evaluation(m, cfg, reps);
            char line[256];
            std::snprintf(line, sizeof line, "%s,%.9g,%.9g,%.9g,%zu\n", m.label().c_str(), t.mean_us, t.std_us,
                          t.median_of_means_us, t.repetitions);
            *os << line;
            if (os != &std::cout)
                std::cout << line;
        }
        return 0;
    }

    int run_beam(const Common &c, std::size_t m, double range, double az_deg, double step_deg)
    {
        const double lambda = 0.01;
        const ArrayGeometry geom = ArrayGeometry::ula(m, lambda / 2.0, lambda);
        const Direction dir{deg_to_rad(az_deg), 0.0};
        const Axis grid{-pi / 2.0, pi / 2.0, deg_to_rad(step_deg)};
        const double far = 1e3 * field_boundaries(geom).fraunhofer;
        const auto near_curve = beam_gain_sweep(geom, to_cartesian({range, dir}, geom.origin()), grid);
        const auto far_curve = beam_gain_sweep(geom, to_cartesian({far, dir}, geom.origin()), grid);
        const std::string prefix = c.out.empty() ? "beam" : c.out;
        emit_csv(near_curve, prefix + "_near.csv");
        emit_csv(far_curve, prefix + "_far.csv");
        std::printf("3-dB support: near-field (r=%.3f m) %zu cells, far-field (r=%.1f m) %zu cells\n", range,
                    three_db_support(near_curve), far, three_db_support(far_curve));
        return 0;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"nfloc: near-field multi-source localization benchmarks"};
    app.require_subcommand(1);

    Common common;
    std::string dump, spectrum_out, snr_values, source_values;
    std::size_t reps = 30, beam_m = 128;
    double beam_range = 2.0, beam_az = 0.0, beam_step = 0.1;

    auto *sim = app.add_subcommand("simulate", "run one trial and print estimates");
    add_common(sim, common, false);
    sim->add_option("--dump-snapshots", dump, "write the snapshot matrix (binary)");
    sim->add_option("--spectrum-out", spectrum_out, "write the full-array near-field spectrum as CSV");

    auto *snr = app.add_subcommand("sweep-snr", "Monte-Carlo MAE versus SNR");
    add_common(snr, common, true);
    snr->add_option("--values", snr_values, "comma list of SNR values in dB")->default_val("0,5,10,15,20");
    snr->add_option("--workers", common.workers, "parallel trials")->check(CLI::PositiveNumber);
    snr->add_flag("--record-timing", common.record_timing, "store wall-clock per method in elapsed_us");

    auto *src = app.add_subcommand("sweep-sources", "Monte-Carlo MAE versus source count");
    add_common(src, common, true);
    src->add_option("--values", source_values, "comma list of source counts")->default_val("2,3,4,5,6");
    src->add_option("--workers", common.workers, "parallel trials")->check(CLI::PositiveNumber);
    src->add_flag("--record-timing", common.record_timing, "store wall-clock per method in elapsed_us");

    auto *timing = app.add_subcommand("bench-timing", "single-worker spectrum evaluation timing");
    add_common(timing, common, false);
    timing->add_option("--repetitions", reps, "timed repetitions (>= 10)")->check(CLI::Range(10, 100000));

    auto *beam = app.add_subcommand("beam-demo", "far-field beam gain against a near-field source");
    beam->add_option("--out", common.out, "output prefix");
    beam->add_option("--elements", beam_m, "ULA size")->check(CLI::Range(2, 100000));
    beam->add_option("--range-m", beam_range, "near-field source range")->check(CLI::PositiveNumber);
    beam->add_option("--azimuth-deg", beam_az, "source bearing")->check(CLI::Range(-89.0, 89.0));
    beam->add_option("--step-deg", beam_step, "angle grid step")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*sim)
            return run_simulate(common, dump, spectrum_out);
        if (*snr)
            return run_sweep_cmd(common, SweepVariable::snr_db, snr_values);
        if (*src)
            return run_sweep_cmd(common, SweepVariable::source_count, source_values);
        if (*timing)
            return run_timing(common, reps);
        if (*beam)
            return run_beam(common, beam_m, beam_range, beam_az, beam_step);
    }
    catch (const ConfigError &e)
    {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
