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

#include "nfloc/geometry.hpp"

#include <cmath>
#include <string>

namespace nfloc
{
    Vec3 unit_direction(const Direction &dir)
    {
        const double ce = std::cos(dir.elevation);
        return {ce * std::cos(dir.azimuth), ce * std::sin(dir.azimuth), std::sin(dir.elevation)};
    }

    Vec3 to_cartesian(const PolarPoint &p, const Vec3 &reference)
    {
        return reference + p.range * unit_direction(p.direction);
    }

    PolarPoint to_polar(const Vec3 &position, const Vec3 &reference)
    {
        const Vec3 rel = position - reference;
        PolarPoint out;
        out.range = rel.norm();
        out.direction.azimuth = std::atan2(rel.y(), rel.x());
        const double planar = std::hypot(rel.x(), rel.y());
        out.direction.elevation = std::atan2(rel.z(), planar);
        return out;
    }

    ArrayGeometry ArrayGeometry::ula(std::size_t element_count, double spacing, double wavelength,
                                     const Vec3 &origin)
    {
        if (element_count < 2)
            throw ConfigError("ULA needs at least 2 elements, got " + std::to_string(element_count));
        if (!(spacing > 0.0))
            throw ConfigError("ULA spacing must be positive");
        if (!(wavelength > 0.0))
            throw ConfigError("wavelength must be positive");
        ArrayGeometry g;
        g.kind_ = ArrayKind::ula;
        g.mh_ = element_count;
        g.mv_ = 1;
        g.dh_ = spacing;
        g.dv_ = spacing;
        g.wavelength_ = wavelength;
        g.origin_ = origin;
        return g;
    }

    ArrayGeometry ArrayGeometry::upa(std::size_t horizontal_count, std::size_t vertical_count,
                                     double spacing_h, double spacing_v, double wavelength,
                                     const Vec3 &origin)
    {
        if (horizontal_count == 0 || vertical_count == 0 || horizontal_count * vertical_count < 2)
            throw ConfigError("UPA needs at least 2 elements");
        if (!(spacing_h > 0.0) || !(spacing_v > 0.0))
            throw ConfigError("UPA spacings must be positive");
        if (!(wavelength > 0.0))
            throw ConfigError("wavelength must be positive");
        ArrayGeometry g;
        g.kind_ = ArrayKind::upa;
        g.mh_ = horizontal_count;
        g.mv_ = vertical_count;
        g.dh_ = spacing_h;
        g.dv_ = spacing_v;
        g.wavelength_ = wavelength;
        g.origin_ = origin;
        return g;
    }

    Vec3 ArrayGeometry::element_position(std::size_t m) const
    {
        const double i = static_cast<double>(horizontal_index(m));
        const double k = static_cast<double>(vertical_index(m));
        return origin_ + Vec3(0.0, i * dh_, kind_ == ArrayKind::upa ? k * dv_ : 0.0);
    }

    double ArrayGeometry::max_aperture() const
    {
        const double w = static_cast<double>(mh_ - 1) * dh_;
        if (kind_ == ArrayKind::ula)
            return w;
        const double h = static_cast<double>(mv_ - 1) * dv_;
        return std::hypot(w, h);
    }

    Vec3 ArrayGeometry::center() const
    {
        const double w = static_cast<double>(mh_ - 1) * dh_;
        const double h = kind_ == ArrayKind::upa ? static_cast<double>(mv_ - 1) * dv_ : 0.0;
        return origin_ + Vec3(0.0, 0.5 * w, 0.5 * h);
    }

    std::vector<Vec3> element_positions(const ArrayGeometry &geom)
    {
        std::vector<Vec3> out;
        out.reserve(geom.element_count());
        for (std::size_t m = 0; m < geom.element_count(); ++m)
            out.push_back(geom.element_position(m));
        return out;
    }

    double exact_distance(const ArrayGeometry &geom, std::size_t m, const Vec3 &source)
    {
        const double r = (source - geom.element_position(m)).norm();
        if (r == 0.0)
            throw DegenerateGeometryError("source coincides with element " + std::to_string(m), m);
        return r;
    }

    double fresnel_distance(const ArrayGeometry &geom, std::size_t m, double r1, const Direction &dir)
    {
        const double i = static_cast<double>(geom.horizontal_index(m));
        if (geom.kind() == ArrayKind::ula)
        {
            const double y = i * geom.spacing();
            const double c = std::cos(dir.azimuth);
            return r1 * (1.0 + y * y * c * c / (2.0 * r1 * r1) - y * std::sin(dir.azimuth) / r1);
        }
        const double k = static_cast<double>(geom.vertical_index(m));
        const double y = i * geom.spacing_h();
        const double z = k * geom.spacing_v();
        return r1 + (y * y + z * z) / (2.0 * r1) - y * std::sin(dir.azimuth) * std::cos(dir.elevation) -
               z * std::sin(dir.elevation);
    }

    namespace
    {
        // Plain complex product, skipping the inf/nan recovery path of operator*.
        inline cdouble mul(const cdouble &a, const cdouble &b)
        {
            return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
        }

        // out[n * stride] = exp(j (c2 n^2 + c1 n)) for n < count. Runs a two-term
        // recurrence and recomputes the phase directly every 32 entries so the
        // rounding error stays far below 1e-12.
        void quadratic_phase(double c2, double c1, std::size_t count, std::size_t stride, cdouble *out)
        {
            constexpr std::size_t reseed = 32;
            cdouble value(1.0, 0.0);
            cdouble step = std::polar(1.0, c2 + c1);
            if (c2 == 0.0)
            {
                for (std::size_t n = 0; n < count; ++n)
                {
                    if (n % reseed == 0 && n > 0)
                        value = std::polar(1.0, c1 * static_cast<double>(n));
                    out[n * stride] = value;
                    value = mul(value, step);
                }
                return;
            }
            const cdouble curvature = std::polar(1.0, 2.0 * c2);
            for (std::size_t n = 0; n < count; ++n)
            {
                if (n % reseed == 0 && n > 0)
                {
                    const auto x = static_cast<double>(n);
                    value = std::polar(1.0, c2 * x * x + c1 * x);
                    step = std::polar(1.0, c2 * (2.0 * x + 1.0) + c1);
                }
                out[n * stride] = value;
                value = mul(value, step);
                step = mul(step, curvature);
            }
        }

        // Planar responses that separate into a row factor times a column factor.
        // Row 0 holds the horizontal factor and column 0 the vertical one.
        void separable_fill(const ArrayGeometry &geom, double h2, double h1, double v2, double v1,
                            std::span<cdouble> out)
        {
            const std::size_t mh = geom.horizontal_count();
            const std::size_t mv = geom.vertical_count();
            quadratic_phase(h2, h1, mh, 1, out.data());
            quadratic_phase(v2, v1, mv, mh, out.data());
            for (std::size_t k = 1; k < mv; ++k)
            {
                const cdouble col = out[k * mh];
                for (std::size_t i = 1; i < mh; ++i)
                    out[i + k * mh] = mul(out[i], col);
            }
        }
    }

    void fill_steering(const ArrayGeometry &geom, const PolarPoint &where, SteeringMode mode,
                       std::span<cdouble> out)
    {
        const bool planar = geom.kind() == ArrayKind::upa;
        const SteeringAngles angles{where.range, std::sin(where.direction.azimuth), std::cos(where.direction.azimuth),
                                    planar ? std::sin(where.direction.elevation) : 0.0,
                                    planar ? std::cos(where.direction.elevation) : 1.0};
        fill_steering(geom, angles, mode, out);
    }

    void fill_steering(const ArrayGeometry &geom, const SteeringAngles &where, SteeringMode mode,
                       std::span<cdouble> out)
    {
        const std::size_t m_count = geom.element_count();
        if (out.size() != m_count)
            throw DimensionError("steering buffer has wrong length");
        const double k0 = geom.wavenumber();
        const bool planar = geom.kind() == ArrayKind::upa;
        const double sa = where.sin_az;
        const double ca = where.cos_az;
        const double se = planar ? where.sin_el : 0.0;
        const double ce = planar ? where.cos_el : 1.0;
        const double dh = geom.spacing_h();
        const double dv = planar ? geom.spacing_v() : 0.0;

        switch (mode)
        {
        case SteeringMode::farfield:
            // r_0 - r_m = i dh sin(az) cos(el) + k dv sin(el)
            if (planar)
                separable_fill(geom, 0.0, k0 * dh * sa * ce, 0.0, k0 * dv * se, out);
            else
                quadratic_phase(0.0, k0 * dh * sa, m_count, 1, out.data());
            break;
        case SteeringMode::fresnel:
        {
            // -(fresnel_distance(m) - r1) k0, quadratic in the element indices.
            const double r1 = where.range;
            if (planar)
                separable_fill(geom, -k0 * dh * dh / (2.0 * r1), k0 * dh * sa * ce, -k0 * dv * dv / (2.0 * r1),
                               k0 * dv * se, out);
            else
                quadratic_phase(-k0 * dh * dh * ca * ca / (2.0 * r1), k0 * dh * sa, m_count, 1, out.data());
            break;
        }
        case SteeringMode::exact:
        {
            // Source relative to element 0.
            const double r1 = where.range;
            const double sx = r1 * ce * ca;
            const double sy = r1 * ce * sa;
            const double sz = r1 * se;
            out[0] = cdouble(1.0, 0.0);
            for (std::size_t m = 1; m < m_count; ++m)
            {
                const double y = static_cast<double>(geom.horizontal_index(m)) * dh;
                const double z = static_cast<double>(geom.vertical_index(m)) * dv;
                const double rm = std::sqrt(sx * sx + (sy - y) * (sy - y) + (sz - z) * (sz - z));
                out[m] = std::polar(1.0, -k0 * (rm - r1));
            }
            break;
        }
        }
    }

    CVector steering_vector(const ArrayGeometry &geom, const SourceSpec &source, SteeringMode mode)
    {
        CVector a(static_cast<Eigen::Index>(geom.element_count()));
        std::span<cdouble> out(a.data(), geom.element_count());

        if (mode == SteeringMode::farfield)
        {
            const auto *dir = std::get_if<Direction>(&source);
            if (dir == nullptr)
                throw ContractError("far-field steering takes a direction, not a position");
            fill_steering(geom, PolarPoint{1.0, *dir}, mode, out);
            return a;
        }

        const auto *pos = std::get_if<Vec3>(&source);
        if (pos == nullptr)
            throw ContractError("exact and Fresnel steering take a source position");
        if (mode == SteeringMode::exact)
        {
            const double r0 = exact_distance(geom, 0, *pos);
            const double k0 = geom.wavenumber();
            a[0] = cdouble(1.0, 0.0);
            for (std::size_t m = 1; m < geom.element_count(); ++m)
                a[static_cast<Eigen::Index>(m)] = std::polar(1.0, -k0 * (exact_distance(geom, m, *pos) - r0));
            return a;
        }
        const PolarPoint polar = to_polar(*pos, geom.origin());
        if (polar.range == 0.0)
            throw DegenerateGeometryError("source coincides with the reference element", 0);
        fill_steering(geom, polar, mode, out);
        return a;
    }

    FieldBoundaries field_boundaries(const ArrayGeometry &geom)
    {
        FieldBoundaries fb;
        fb.aperture = geom.max_aperture();
        fb.bjornson = 2.0 * fb.aperture;
        fb.fraunhofer = 2.0 * fb.aperture * fb.aperture / geom.wavelength();
        return fb;
    }

    std::vector<Subarray> subarray_split(const ArrayGeometry &geom, std::size_t q)
    {
        if (q == 0)
            throw ConfigError("sub-array count must be positive");

        std::vector<Subarray> out;
        out.reserve(q);

        if (geom.kind() == ArrayKind::ula)
        {
            const std::size_t m = geom.element_count();
            if (m % q != 0)
                throw ConfigError("sub-array count " + std::to_string(q) + " does not divide M = " +
                                  std::to_string(m));
            const std::size_t n = m / q;
            for (std::size_t s = 0; s < q; ++s)
            {
                const auto sub = ArrayGeometry::ula(n, geom.spacing(), geom.wavelength(),
                                                    geom.element_position(s * n));
                std::vector<std::size_t> idx(n);
                for (std::size_t e = 0; e < n; ++e)
                    idx[e] = s * n + e;
                out.push_back({sub, sub.center(), std::move(idx)});
            }
            return out;
        }

        const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(q))));
        if (side * side != q)
            throw ConfigError("UPA sub-array count must be a perfect square, got " + std::to_string(q));
        const std::size_t mh = geom.horizontal_count();
        const std::size_t mv = geom.vertical_count();
        if (mh % side != 0 || mv % side != 0)
            throw ConfigError("UPA split " + std::to_string(side) + "x" + std::to_string(side) +
                              " does not divide the " + std::to_string(mh) + "x" + std::to_string(mv) + " panel");
        const std::size_t nh = mh / side;
        const std::size_t nv = mv / side;
        for (std::size_t bv = 0; bv < side; ++bv)
        {
            for (std::size_t bh = 0; bh < side; ++bh)
            {
                const std::size_t first = bv * nv * mh + bh * nh;
                const auto sub = ArrayGeometry::upa(nh, nv, geom.spacing_h(), geom.spacing_v(),
                                                    geom.wavelength(), geom.element_position(first));
                std::vector<std::size_t> idx;
                idx.reserve(nh * nv);
                for (std::size_t k = 0; k < nv; ++k)
                    for (std::size_t i = 0; i < nh; ++i)
                        idx.push_back(first + k * mh + i);
                out.push_back({sub, sub.center(), std::move(idx)});
            }
        }
        return out;
    }
}
