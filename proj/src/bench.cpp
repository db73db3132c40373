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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nfloc::bench
{
    // ---------------------------------------------------------------- config

    ArrayGeometry ExperimentConfig::geometry() const
    {
        const double d = spacing_over_lambda * lambda;
        if (kind == ArrayKind::ula)
            return ArrayGeometry::ula(m, d, lambda);
        return ArrayGeometry::upa(mh, mv, dh.value_or(d), dv.value_or(d), lambda);
    }

    Interval ExperimentConfig::range_interval() const
    {
        if (range)
            return *range;
        const FieldBoundaries fb = field_boundaries(geometry());
        return {fb.bjornson, fb.fraunhofer / 10.0};
    }

    GridSpec ExperimentConfig::nearfield_grid() const
    {
        GridSpec g;
        g.azimuth = Axis{azimuth.lo, azimuth.hi, az_step};
        if (kind == ArrayKind::upa)
            g.elevation = Axis{elevation.lo, elevation.hi, el_step};
        const Interval r = range_interval();
        g.distance = Axis{r.lo, r.hi, dist_step};
        return g;
    }

    GridSpec ExperimentConfig::subarray_grid() const
    {
        GridSpec g;
        g.azimuth = Axis{-subarray_az_limit, subarray_az_limit, az_step};
        if (kind == ArrayKind::upa)
            g.elevation = Axis{-subarray_el_limit, subarray_el_limit, el_step};
        return g;
    }

    ExperimentConfig default_config(ArrayKind kind, Profile profile)
    {
        ExperimentConfig c;
        c.kind = kind;
        if (kind == ArrayKind::ula)
        {
            c.lambda = 0.01;
            c.spacing_over_lambda = 0.25;
            c.m = profile == Profile::desk ? 63 : 255;
            c.sources = profile == Profile::desk ? 4 : 6;
            c.subarrays = 3;
            return c;
        }
        c.lambda = 0.3;
        c.spacing_over_lambda = 0.25;
        c.sources = 2;
        c.subarrays = 4;
        if (profile == Profile::desk)
        {
            c.mh = c.mv = 8;
            c.range = Interval{0.5, 1.5};
            c.az_step = c.el_step = deg_to_rad(2.0);
            c.dist_step = 0.05;
        }
        else
        {
            c.mh = c.mv = 16;
            c.range = Interval{0.07, 1.9};
        }
        return c;
    }

    namespace
    {
        std::string trim(std::string_view s)
        {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string_view::npos)
                return {};
            const auto e = s.find_last_not_of(" \t\r");
            return std::string(s.substr(b, e - b + 1));
        }

        double to_double(const std::string &v, const std::string &where)
        {
            std::size_t used = 0;
            double out = 0.0;
            try
            {
                out = std::stod(v, &used);
            }
            catch (const std::exception &)
            {
                used = 0;
            }
            if (used != v.size() || v.empty())
                throw ConfigError(where + ": expected a number, got '" + v + "'");
            return out;
        }

        std::size_t to_count(const std::string &v, const std::string &where)
        {
            const double d = to_double(v, where);
            if (d < 0 || d != std::floor(d))
                throw ConfigError(where + ": expected a non-negative integer, got '" + v + "'");
            return static_cast<std::size_t>(d);
        }

        std::uint64_t to_seed(const std::string &v, const std::string &where)
        {
            std::size_t used = 0;
            std::uint64_t out = 0;
            try
            {
                out = std::stoull(v, &used);
            }
            catch (const std::exception &)
            {
                used = 0;
            }
            if (used != v.size() || v.empty())
                throw ConfigError(where + ": expected an unsigned integer, got '" + v + "'");
            return out;
        }
    }

    ExperimentConfig parse_config(std::istream &in, ExperimentConfig c)
    {
        std::string line;
        std::size_t line_no = 0;
        std::optional<double> range_lo, range_hi;
        while (std::getline(in, line))
        {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            const std::string body = trim(line);
            if (body.empty())
                continue;
            const auto eq = body.find('=');
            const std::string where = "line " + std::to_string(line_no);
            if (eq == std::string::npos)
                throw ConfigError(where + ": expected 'key = value'");
            const std::string key = trim(std::string_view(body).substr(0, eq));
            const std::string val = trim(std::string_view(body).substr(eq + 1));

            if (key == "kind")
            {
                if (val == "ula")
                    c.kind = ArrayKind::ula;
                else if (val == "upa")
                    c.kind = ArrayKind::upa;
                else
                    throw ConfigError(where + ": kind must be ula or upa");
            }
            else if (key == "m")
                c.m = to_count(val, where);
            else if (key == "mh")
                c.mh = to_count(val, where);
            else if (key == "mv")
                c.mv = to_count(val, where);
            else if (key == "spacing_over_lambda")
                c.spacing_over_lambda = to_double(val, where);
            else if (key == "dh")
                c.dh = to_double(val, where);
            else if (key == "dv")
                c.dv = to_double(val, where);
            else if (key == "lambda_m")
                c.lambda = to_double(val, where);
            else if (key == "sources")
                c.sources = to_count(val, where);
            else if (key == "snapshots")
                c.snapshots = to_count(val, where);
            else if (key == "snr_db")
                c.snr_db = to_double(val, where);
            else if (key == "seed")
                c.seed = to_seed(val, where);
            else if (key == "range_min_m")
                range_lo = to_double(val, where);
            else if (key == "range_max_m")
                range_hi = to_double(val, where);
            else if (key == "az_min_deg")
                c.azimuth.lo = deg_to_rad(to_double(val, where));
            else if (key == "az_max_deg")
                c.azimuth.hi = deg_to_rad(to_double(val, where));
            else if (key == "el_min_deg")
                c.elevation.lo = deg_to_rad(to_double(val, where));
            else if (key == "el_max_deg")
                c.elevation.hi = deg_to_rad(to_double(val, where));
            else if (key == "subarrays")
                c.subarrays = to_count(val, where);
            else if (key == "az_step_deg")
                c.az_step = deg_to_rad(to_double(val, where));
            else if (key == "el_step_deg")
                c.el_step = deg_to_rad(to_double(val, where));
            else if (key == "dist_step_m")
                c.dist_step = to_double(val, where);
            else if (key == "subarray_az_limit_deg")
                c.subarray_az_limit = deg_to_rad(to_double(val, where));
            else if (key == "subarray_el_limit_deg")
                c.subarray_el_limit = deg_to_rad(to_double(val, where));
            else if (key == "windows")
                c.windows = to_count(val, where);
            else if (key == "distance_model")
            {
                if (val == "exact")
                    c.distance_model = DistanceModel::exact;
                else if (val == "fresnel")
                    c.distance_model = DistanceModel::fresnel;
                else
                    throw ConfigError(where + ": distance_model must be exact or fresnel");
            }
            else
                throw ConfigError(where + ": unknown key '" + key + "'");
        }

        if (range_lo || range_hi)
        {
            const Interval fallback = c.range_interval();
            c.range = Interval{range_lo.value_or(fallback.lo), range_hi.value_or(fallback.hi)};
        }
        return c;
    }

    ExperimentConfig load_config(const std::filesystem::path &path, ExperimentConfig base)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open config " + path.string());
        try
        {
            return parse_config(in, std::move(base));
        }
        catch (const ConfigError &e)
        {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }

    std::string format_config(const ExperimentConfig &c)
    {
        std::ostringstream os;
        os.precision(17);
        os << "kind = " << (c.kind == ArrayKind::ula ? "ula" : "upa") << '\n';
        if (c.kind == ArrayKind::ula)
            os << "m = " << c.m << '\n';
        else
            os << "mh = " << c.mh << "\nmv = " << c.mv << '\n';
        os << "spacing_over_lambda = " << c.spacing_over_lambda << '\n';
        if (c.dh)
            os << "dh = " << *c.dh << '\n';
        if (c.dv)
            os << "dv = " << *c.dv << '\n';
        os << "lambda_m = " << c.lambda << '\n'
           << "sources = " << c.sources << '\n'
           << "snapshots = " << c.snapshots << '\n'
           << "snr_db = " << c.snr_db << '\n'
           << "seed = " << c.seed << '\n';
        if (c.range)
            os << "range_min_m = " << c.range->lo << "\nrange_max_m = " << c.range->hi << '\n';
        os << "az_min_deg = " << rad_to_deg(c.azimuth.lo) << '\n'
           << "az_max_deg = " << rad_to_deg(c.azimuth.hi) << '\n'
           << "el_min_deg = " << rad_to_deg(c.elevation.lo) << '\n'
           << "el_max_deg = " << rad_to_deg(c.elevation.hi) << '\n'
           << "subarrays = " << c.subarrays << '\n'
           << "az_step_deg = " << rad_to_deg(c.az_step) << '\n'
           << "el_step_deg = " << rad_to_deg(c.el_step) << '\n'
           << "dist_step_m = " << c.dist_step << '\n'
           << "subarray_az_limit_deg = " << rad_to_deg(c.subarray_az_limit) << '\n'
           << "subarray_el_limit_deg = " << rad_to_deg(c.subarray_el_limit) << '\n'
           << "windows = " << c.windows << '\n'
           << "distance_model = " << (c.distance_model == DistanceModel::exact ? "exact" : "fresnel") << '\n';
        return os.str();
    }

    // --------------------------------------------------------------- methods

    std::string MethodSpec::label() const
    {
        switch (id)
        {
        case MethodId::music2d:
            return model == DistanceModel::exact ? "music2d" : "music2d-fresnel";
        case MethodId::music3d:
            return model == DistanceModel::exact ? "music3d" : "music3d-fresnel";
        case MethodId::modified:
            return "modified";
        case MethodId::proposed:
            return "proposed";
        }
        return "?";
    }

    MethodSpec parse_method(std::string_view label, DistanceModel default_model)
    {
        if (label == "music2d")
            return {MethodId::music2d, default_model};
        if (label == "music2d-exact")
            return {MethodId::music2d, DistanceModel::exact};
        if (label == "music2d-fresnel")
            return {MethodId::music2d, DistanceModel::fresnel};
        if (label == "music3d")
            return {MethodId::music3d, default_model};
        if (label == "music3d-exact")
            return {MethodId::music3d, DistanceModel::exact};
        if (label == "music3d-fresnel")
            return {MethodId::music3d, DistanceModel::fresnel};
        if (label == "modified")
            return {MethodId::modified, DistanceModel::fresnel};
        if (label == "proposed")
            return {MethodId::proposed, DistanceModel::exact};
        throw ConfigError("unknown method '" + std::string(label) + "'");
    }

    std::vector<MethodSpec> parse_methods(std::string_view list, DistanceModel default_model)
    {
        std::vector<MethodSpec> out;
        std::size_t pos = 0;
        while (pos <= list.size())
        {
            const auto comma = list.find(',', pos);
            const auto token = trim(list.substr(pos, comma == std::string_view::npos ? list.npos : comma - pos));
            if (!token.empty())
                out.push_back(parse_method(token, default_model));
            if (comma == std::string_view::npos)
                break;
            pos = comma + 1;
        }
        if (out.empty())
            throw ConfigError("no methods given");
        return out;
    }

    std::vector<SourceEstimate> run_method(const MethodSpec &method, const SnapshotSet &snapshots,
                                           const ExperimentConfig &cfg, const SpectrumOptions &opts)
    {
        const ArrayGeometry geom = cfg.geometry();
        const bool ula = geom.kind() == ArrayKind::ula;
        switch (method.id)
        {
        case MethodId::music2d:
            if (!ula)
                throw ConfigError("music2d runs on a ULA; use music3d for a UPA");
            return music_2d_nearfield(snapshots, geom, cfg.sources, cfg.nearfield_grid(), method.model, opts);
        case MethodId::music3d:
            if (ula)
                throw ConfigError("music3d runs on a UPA; use music2d for a ULA");
            return music_3d_upa(snapshots, geom, cfg.sources, cfg.nearfield_grid(), method.model, opts);
        case MethodId::modified:
            if (ula)
                return modified_music_ula(snapshots, geom, cfg.sources, cfg.nearfield_grid(), cfg.windows, opts);
            return modified_music_upa(snapshots, geom, cfg.sources, cfg.nearfield_grid(), cfg.windows, cfg.windows,
                                      opts);
        case MethodId::proposed:
            return proposed_localize(snapshots, geom, cfg.subarrays, cfg.sources, cfg.subarray_grid(), opts);
        }
        throw ConfigError("unhandled method");
    }

    // -------------------------------------------------------------- matching

    Matching match_estimates(const std::vector<Vec3> &truths, const std::vector<Vec3> &estimates)
    {
        const std::size_t k = truths.size();
        if (estimates.size() != k)
            throw DimensionError("matching needs as many estimates as truths");
        if (k > 8)
            throw ConfigError("exhaustive matching supports at most 8 sources");

        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Matching best;
        best.total = std::numeric_limits<double>::infinity();
        do
        {
            double total = 0.0;
            for (std::size_t i = 0; i < k; ++i)
                total += (truths[i] - estimates[perm[i]]).norm();
            if (total < best.total)
            {
                best.total = total;
                best.assignment = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));

        if (k == 0)
            best.total = 0.0;
        best.distances.resize(k);
        for (std::size_t i = 0; i < k; ++i)
            best.distances[i] = (truths[i] - estimates[best.assignment[i]]).norm();
        return best;
    }

    // ----------------------------------------------------------------- sweep

    TrialSetup make_trial(const ExperimentConfig &cfg, std::uint64_t trial_seed)
    {
        const ArrayGeometry geom = cfg.geometry();
        Rng rng(derive_seed(trial_seed, 1));
        std::optional<Interval> el;
        if (geom.kind() == ArrayKind::upa)
            el = cfg.elevation;
        auto sources = sample_sources(geom, cfg.sources, cfg.range_interval(), cfg.azimuth, rng, el);

        TrialSetup out{Scenario{geom, std::move(sources), 0.0, cfg.snapshots, derive_seed(trial_seed, 2)}, {}, {}};
        out.scenario = set_noise_for_snr(std::move(out.scenario), cfg.snr_db);
        out.snapshots = synthesize_snapshots(out.scenario);
        for (const auto &s : out.scenario.sources)
            out.truths.push_back(s.position);
        return out;
    }

    SweepResult run_sweep(const SweepSpec &spec)
    {
        if (spec.trials < 1)
            throw ConfigError("trials must be at least 1");
        if (spec.values.empty())
            throw ConfigError("sweep needs at least one value");
        if (spec.methods.empty())
            throw ConfigError("sweep needs at least one method");

        const std::size_t nv = spec.values.size();
        const std::size_t nm = spec.methods.size();
        const std::size_t nt = spec.trials;
        std::vector<TrialRecord> records(nv * nm * nt);

        SpectrumOptions inner;
        inner.workers = spec.workers > 1 ? 1 : 0;

        const auto jobs = static_cast<long>(nv * nt);
#ifdef _OPENMP
        const int threads = std::max(1, spec.workers);
#endif
        const auto run_job = [&](long job)
        {
            const std::size_t vi = static_cast<std::size_t>(job) / nt;
            const std::size_t t = static_cast<std::size_t>(job) % nt;

            ExperimentConfig cfg = spec.base;
            if (spec.variable == SweepVariable::snr_db)
                cfg.snr_db = spec.values[vi];
            else
                cfg.sources = static_cast<std::size_t>(std::llround(spec.values[vi]));

            const TrialSetup setup = make_trial(cfg, derive_seed(spec.master_seed, t));
            const std::uint64_t hash = snapshot_hash(setup.snapshots);
            bool swapped = false;
            if (cfg.sources > 1)
                swapped = association_swapped(setup.truths, subarray_split(cfg.geometry(), cfg.subarrays));

            for (std::size_t mi = 0; mi < nm; ++mi)
            {
                TrialRecord &rec = records[(vi * nm + mi) * nt + t];
                rec.sweep_value = spec.values[vi];
                rec.trial = t;
                rec.method = spec.methods[mi].label();
                rec.truths = setup.truths;
                rec.snapshot_hash = hash;
                rec.swap_flag = spec.methods[mi].id == MethodId::proposed && swapped;

                const auto t0 = std::chrono::steady_clock::now();
                std::vector<SourceEstimate> est;
                try
                {
                    est = run_method(spec.methods[mi], setup.snapshots, cfg, inner);
                }
                catch (const std::exception &)
                {
                    rec.failed = true;
                }
                const auto t1 = std::chrono::steady_clock::now();
                if (spec.record_timing)
                    rec.elapsed_us = std::chrono::duration<double, std::micro>(t1 - t0).count();

                const std::size_t k = setup.truths.size();
                if (rec.failed || est.size() != k)
                {
                    rec.failed = true;
                    const double nan = std::numeric_limits<double>::quiet_NaN();
                    rec.estimates.assign(k, Vec3(nan, nan, nan));
                    rec.errors.assign(k, nan);
                    continue;
                }
                std::vector<Vec3> positions;
                for (const auto &e : est)
                {
                    positions.push_back(e.position);
                    rec.degraded = rec.degraded || e.degraded;
                }
                const Matching match = match_estimates(setup.truths, positions);
                for (std::size_t i = 0; i < k; ++i)
                    rec.estimates.push_back(positions[match.assignment[i]]);
                rec.errors = match.distances;
            }
        };

        // Setup errors (bad scenario values) cannot leave the parallel region;
        // the first one is rethrown after it.
        std::exception_ptr setup_error;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (long job = 0; job < jobs; ++job)
        {
            try
            {
                run_job(job);
            }
            catch (...)
            {
#pragma omp critical(nfloc_sweep_error)
                if (!setup_error)
                    setup_error = std::current_exception();
            }
        }
        if (setup_error)
            std::rethrow_exception(setup_error);


        SweepResult out;
        out.records = std::move(records);
        out.summaries = summarize(out.records);
        return out;
    }

    std::vector<SummaryRow> summarize(const std::vector<TrialRecord> &records)
    {
        struct Acc
        {
            SummaryRow row;
            std::vector<double> errors;
            std::vector<double> trial_means;
            std::vector<double> times;
            std::size_t count = 0;
            std::size_t bad = 0;
        };
        std::vector<Acc> groups;
        std::map<std::pair<double, std::string>, std::size_t> index;

        for (const auto &r : records)
        {
            const auto key = std::make_pair(r.sweep_value, r.method);
            auto it = index.find(key);
            if (it == index.end())
            {
                it = index.emplace(key, groups.size()).first;
                groups.push_back({});
                groups.back().row.sweep_value = r.sweep_value;
                groups.back().row.method = r.method;
            }
            Acc &g = groups[it->second];
            ++g.count;
            if (r.failed || r.degraded)
                ++g.bad;
            g.times.push_back(r.elapsed_us);
            if (r.failed || r.errors.empty())
                continue;
            g.errors.insert(g.errors.end(), r.errors.begin(), r.errors.end());
            g.trial_means.push_back(std::accumulate(r.errors.begin(), r.errors.end(), 0.0) /
                                    static_cast<double>(r.errors.size()));
        }

        const auto mean = [](const std::vector<double> &v) {
            return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                             : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        const auto stddev = [&](const std::vector<double> &v) {
            if (v.size() < 2)
                return 0.0;
            const double mu = mean(v);
            double ss = 0.0;
            for (double x : v)
                ss += (x - mu) * (x - mu);
            return std::sqrt(ss / static_cast<double>(v.size() - 1));
        };

        std::vector<SummaryRow> out;
        for (auto &g : groups)
        {
            g.row.mae_m = mean(g.errors);
            g.row.mae_stderr =
                g.trial_means.size() < 2 ? 0.0 : stddev(g.trial_means) / std::sqrt(static_cast<double>(g.trial_means.size()));
            g.row.time_mean_us = mean(g.times);
            g.row.time_std_us = stddev(g.times);
            g.row.degradation_rate = static_cast<double>(g.bad) / static_cast<double>(g.count);
            out.push_back(g.row);
        }
        return out;
    }

    // ------------------------------------------------------------------- csv

    namespace
    {
        std::string num(double v)
        {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.9g", v);
            return buf;
        }

        std::vector<std::string> split(const std::string &line)
        {
            std::vector<std::string> out;
            std::string cell;
            std::istringstream ss(line);
            while (std::getline(ss, cell, ','))
                out.push_back(trim(cell));
            if (!line.empty() && line.back() == ',')
                out.emplace_back();
            return out;
        }

        double parse_num(const std::string &s)
        {
            if (s == "nan" || s == "-nan")
                return std::numeric_limits<double>::quiet_NaN();
            return to_double(s, "csv");
        }

        constexpr const char *trials_header = "sweep_value,trial,method,source_idx,true_x,true_y,true_z,est_x,est_y,"
                                              "est_z,err_m,elapsed_us,degraded,swap_flag";
        constexpr const char *summary_header =
            "sweep_value,method,mae_m,mae_stderr,time_mean_us,time_std_us,degradation_rate";

        template <typename Writer>
        void to_file(const std::filesystem::path &path, Writer &&write)
        {
            std::ofstream os(path, std::ios::binary | std::ios::trunc);
            if (!os)
                throw std::runtime_error("cannot open " + path.string() + " for writing");
            write(os);
            os.flush();
            if (!os)
                throw std::runtime_error("write failed for " + path.string());
        }
    }

    void write_csv(const std::vector<TrialRecord> &records, std::ostream &os)
    {
        os << trials_header << '\n';
        for (const auto &r : records)
        {
            for (std::size_t i = 0; i < r.truths.size(); ++i)
            {
                const Vec3 &t = r.truths[i];
                const Vec3 &e = r.estimates[i];
                os << num(r.sweep_value) << ',' << r.trial << ',' << r.method << ',' << i << ',' << num(t.x()) << ','
                   << num(t.y()) << ',' << num(t.z()) << ',' << num(e.x()) << ',' << num(e.y()) << ',' << num(e.z())
                   << ',' << num(r.errors[i]) << ',' << num(r.elapsed_us) << ',' << (r.degraded || r.failed ? 1 : 0)
                   << ',' << (r.swap_flag ? 1 : 0) << '\n';
            }
        }
    }

    void write_csv(const std::vector<SummaryRow> &rows, std::ostream &os)
    {
        os << summary_header << '\n';
        for (const auto &r : rows)
            os << num(r.sweep_value) << ',' << r.method << ',' << num(r.mae_m) << ',' << num(r.mae_stderr) << ','
               << num(r.time_mean_us) << ',' << num(r.time_std_us) << ',' << num(r.degradation_rate) << '\n';
    }

    void emit_csv(const std::vector<TrialRecord> &records, const std::filesystem::path &path)
    {
        to_file(path, [&](std::ostream &os) { write_csv(records, os); });
    }

    void emit_csv(const std::vector<SummaryRow> &rows, const std::filesystem::path &path)
    {
        to_file(path, [&](std::ostream &os) { write_csv(rows, os); });
    }

    std::vector<TrialRecord> read_trials_csv(std::istream &is)
    {
        std::string line;
        if (!std::getline(is, line) || trim(line) != trials_header)
            throw ConfigError("trials csv: unexpected header");
        std::vector<TrialRecord> out;
        while (std::getline(is, line))
        {
            if (trim(line).empty())
                continue;
            const auto c = split(line);
            if (c.size() != 14)
                throw ConfigError("trials csv: expected 14 columns, got " + std::to_string(c.size()));
            const double value = parse_num(c[0]);
            const auto trial = static_cast<std::size_t>(parse_num(c[1]));
            if (out.empty() || out.back().sweep_value != value || out.back().trial != trial ||
                out.back().method != c[2])
            {
                TrialRecord r;
                r.sweep_value = value;
                r.trial = trial;
                r.method = c[2];
                r.elapsed_us = parse_num(c[11]);
                r.degraded = c[12] == "1";
                r.swap_flag = c[13] == "1";
                out.push_back(std::move(r));
            }
            TrialRecord &r = out.back();
            r.truths.emplace_back(parse_num(c[4]), parse_num(c[5]), parse_num(c[6]));
            r.estimates.emplace_back(parse_num(c[7]), parse_num(c[8]), parse_num(c[9]));
            r.errors.push_back(parse_num(c[10]));
            if (std::isnan(r.errors.back()))
                r.failed = true;
        }
        return out;
    }

    std::vector<SummaryRow> read_summary_csv(std::istream &is)
    {
        std::string line;
        if (!std::getline(is, line) || trim(line) != summary_header)
            throw ConfigError("summary csv: unexpected header");
        std::vector<SummaryRow> out;
        while (std::getline(is, line))
        {
            if (trim(line).empty())
                continue;
            const auto c = split(line);
            if (c.size() != 7)
                throw ConfigError("summary csv: expected 7 columns, got " + std::to_string(c.size()));
            SummaryRow r;
            r.sweep_value = parse_num(c[0]);
            r.method = c[1];
            r.mae_m = parse_num(c[2]);
            r.mae_stderr = parse_num(c[3]);
            r.time_mean_us = parse_num(c[4]);
            r.time_std_us = parse_num(c[5]);
            r.degradation_rate = parse_num(c[6]);
            out.push_back(std::move(r));
        }
        return out;
    }

    // ---------------------------------------------------------------- timing

    TimingResult time_spectrum_evaluation(const MethodSpec &method, const ExperimentConfig &cfg,
                                          std::size_t repetitions)
    {
        if (repetitions < 10)
            throw ConfigError("timing needs at least 10 repetitions");

        const TrialSetup setup = make_trial(cfg, cfg.seed);
        const ArrayGeometry geom = cfg.geometry();
        const std::size_t k = cfg.sources;
        SpectrumOptions single;
        single.workers = 1;
        double sink = 0.0;
        std::function<void()> stage;

        // Prepared state captured by the stage closures.
        std::vector<SubspaceDecomposition> decomps;
        std::vector<ArrayGeometry> geoms;
        std::vector<GridSpec> grids;
        std::vector<SteeringMode> modes;

        const CovarianceEstimate cov = sample_covariance(setup.snapshots);
        switch (method.id)
        {
        case MethodId::music2d:
        case MethodId::music3d:
            decomps.push_back(decompose(cov, k));
            geoms.push_back(geom);
            grids.push_back(cfg.nearfield_grid());
            modes.push_back(steering_mode(method.model));
            break;
        case MethodId::proposed:
        {
            const GridSpec grid = cfg.subarray_grid();
            for (const auto &sub : subarray_split(geom, cfg.subarrays))
            {
                CMatrix rows(static_cast<Eigen::Index>(sub.parent_indices.size()), setup.snapshots.data.cols());
                for (std::size_t e = 0; e < sub.parent_indices.size(); ++e)
                    rows.row(static_cast<Eigen::Index>(e)) =
                        setup.snapshots.data.row(static_cast<Eigen::Index>(sub.parent_indices[e]));
                decomps.push_back(decompose(sample_covariance(rows), k));
                geoms.push_back(sub.geometry);
                grids.push_back(grid);
                modes.push_back(SteeringMode::farfield);
            }
            break;
        }
        case MethodId::modified:
        {
            const GridSpec full = cfg.nearfield_grid();
            const bool ula = geom.kind() == ArrayKind::ula;
            const std::size_t mh = geom.horizontal_count();
            const std::size_t mv = geom.vertical_count();
            const std::size_t wh = cfg.windows ? cfg.windows : (ula ? (mh - 1) / 2 + 1 : mh / 2 + 1);
            const std::size_t wv = ula ? 1 : (cfg.windows ? cfg.windows : mv / 2 + 1);
            const CMatrix reduced = smoothed_covariance(anti_diagonal(cov.matrix), mh, mv, wh, wv);
            const std::size_t lh = mh + 1 - wh;
            const std::size_t lv = mv + 1 - wv;
            const ArrayGeometry virt =
                ula ? ArrayGeometry::ula(lh, 2.0 * geom.spacing(), geom.wavelength())
                    : ArrayGeometry::upa(lh, lv, 2.0 * geom.spacing_h(), 2.0 * geom.spacing_v(), geom.wavelength());
            GridSpec angles;
            angles.azimuth = full.azimuth;
            angles.elevation = full.elevation;
            const CovarianceEstimate reduced_cov{reduced, cov.snapshot_count};
            decomps.push_back(decompose(reduced_cov, k));
            geoms.push_back(virt);
            grids.push_back(angles);
            modes.push_back(SteeringMode::farfield);

            const AngularEstimate dirs = music_farfield_angles(reduced_cov, virt, k, angles, single);
            const SubspaceDecomposition full_decomp = decompose(cov, k);
            for (const auto &dir : dirs.directions)
            {
                GridSpec line;
                line.azimuth = Axis{dir.azimuth, dir.azimuth, 1.0};
                if (!ula)
                    line.elevation = Axis{dir.elevation, dir.elevation, 1.0};
                line.distance = full.distance;
                decomps.push_back(full_decomp);
                geoms.push_back(geom);
                grids.push_back(line);
                modes.push_back(SteeringMode::fresnel);
            }
            break;
        }
        }

        stage = [&] {
            for (std::size_t i = 0; i < decomps.size(); ++i)
            {
                const SpectrumGrid g = evaluate_spectrum(decomps[i], geoms[i], grids[i], modes[i], single);
                sink += g.values.front();
            }
        };

        for (int w = 0; w < 5; ++w)
            stage();

        std::vector<double> samples(repetitions);
        for (auto &s : samples)
        {
            const auto t0 = std::chrono::steady_clock::now();
            stage();
            const auto t1 = std::chrono::steady_clock::now();
            s = std::chrono::duration<double, std::micro>(t1 - t0).count();
        }
        volatile double keep = sink;
        (void)keep;

        TimingResult out;
        out.repetitions = repetitions;
        out.mean_us = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(repetitions);
        double ss = 0.0;
        for (double s : samples)
            ss += (s - out.mean_us) * (s - out.mean_us);
        out.std_us = std::sqrt(ss / static_cast<double>(repetitions - 1));

        // Median of the means of consecutive groups of 5.
        std::vector<double> means;
        for (std::size_t i = 0; i + 5 <= repetitions; i += 5)
            means.push_back(std::accumulate(samples.begin() + static_cast<std::ptrdiff_t>(i),
                                            samples.begin() + static_cast<std::ptrdiff_t>(i + 5), 0.0) /
                            5.0);
        std::sort(means.begin(), means.end());
        const std::size_t h = means.size() / 2;
        out.median_of_means_us = means.size() % 2 ? means[h] : 0.5 * (means[h - 1] + means[h]);
        return out;
    }

    CostModel instrumented_counts(const MethodSpec &method, const ExperimentConfig &cfg, std::size_t samples)
    {
        if (samples < 2)
            throw ConfigError("need at least two samples per axis");
        ExperimentConfig c = cfg;
        const double gaps = static_cast<double>(samples - 1);
        const Interval r = cfg.range_interval();
        c.range = r;
        c.dist_step = (r.hi - r.lo) / gaps;
        if (method.id == MethodId::proposed)
        {
            c.az_step = 2.0 * cfg.subarray_az_limit / gaps;
            c.el_step = 2.0 * cfg.subarray_el_limit / gaps;
        }
        else
        {
            c.az_step = (cfg.azimuth.hi - cfg.azimuth.lo) / gaps;
            c.el_step = (cfg.elevation.hi - cfg.elevation.lo) / gaps;
        }

        const TrialSetup setup = make_trial(c, c.seed);
        OpCounter counter;
        SpectrumOptions opts;
        opts.counter = &counter;
        run_method(method, setup.snapshots, c, opts);

        CostModel out;
        out.spectrum_eval_count = counter.evaluations.load();
        out.total_flops = counter.operations.load();
        out.per_eval_flops = out.spectrum_eval_count ? out.total_flops / out.spectrum_eval_count : 0;
        return out;
    }

    // ------------------------------------------------------------- beam gain

    std::vector<BeamGainPoint> beam_gain_sweep(const ArrayGeometry &geom, const Vec3 &source, const Axis &angles)
    {
        if (geom.kind() != ArrayKind::ula)
            throw ContractError("beam gain sweep is defined for a ULA");
        angles.validate("beam angle");
        const CVector target = steering_vector(geom, source, SteeringMode::exact);
        const double m2 = static_cast<double>(geom.element_count() * geom.element_count());
        std::vector<BeamGainPoint> out;
        out.reserve(angles.size());
        for (std::size_t i = 0; i < angles.size(); ++i)
        {
            const double az = angles.at(i);
            const CVector w = steering_vector(geom, Direction{az, 0.0}, SteeringMode::farfield);
            out.push_back({az, std::norm(w.dot(target)) / m2});
        }
        return out;
    }

    std::size_t three_db_support(const std::vector<BeamGainPoint> &curve)
    {
        double peak = 0.0;
        for (const auto &p : curve)
            peak = std::max(peak, p.gain);
        const double floor = peak * std::pow(10.0, -0.3);
        return static_cast<std::size_t>(
            std::count_if(curve.begin(), curve.end(), [&](const BeamGainPoint &p) { return p.gain >= floor; }));
    }

    void emit_csv(const std::vector<BeamGainPoint> &curve, const std::filesystem::path &path)
    {
        to_file(path, [&](std::ostream &os) {
            os << "angle_rad,gain\n";
            for (const auto &p : curve)
                os << num(p.angle) << ',' << num(p.gain) << '\n';
        });
    }
}
