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

#ifndef NFLOC_GEOMETRY_HPP
#define NFLOC_GEOMETRY_HPP

#include "nfloc/types.hpp"

#include <span>
#include <variant>
#include <vector>

namespace nfloc
{
    enum class ArrayKind
    {
        ula,
        upa
    };

    // Angles of arrival. Azimuth is measured from the X axis (boresight) towards Y,
    // elevation from the X-Y plane towards Z. Unit direction:
    //   (cos(el) cos(az), cos(el) sin(az), sin(el))
    struct Direction
    {
        double azimuth = 0.0;
        double elevation = 0.0;
    };

    // Range and direction relative to a reference point (usually element 0).
    struct PolarPoint
    {
        double range = 0.0;
        Direction direction;
    };

    Vec3 unit_direction(const Direction &dir);
    Vec3 to_cartesian(const PolarPoint &p, const Vec3 &reference = Vec3::Zero());
    PolarPoint to_polar(const Vec3 &position, const Vec3 &reference = Vec3::Zero());

    // Uniform linear or planar array.
    //
    // The ULA lies along +Y with boresight along +X. The UPA lies in the Y-Z plane,
    // element m (0-based) at horizontal index i(m) = m mod M_H and vertical index
    // k(m) = m / M_H. Element 0 sits at origin(), which is the zero vector for a
    // full array and the first element of the parent for a sub-array.
    class ArrayGeometry
    {
    public:
        static ArrayGeometry ula(std::size_t element_count, double spacing, double wavelength,
                                 const Vec3 &origin = Vec3::Zero());
        static ArrayGeometry upa(std::size_t horizontal_count, std::size_t vertical_count,
                                 double spacing_h, double spacing_v, double wavelength,
                                 const Vec3 &origin = Vec3::Zero());

        ArrayKind kind() const { return kind_; }
        std::size_t element_count() const { return mh_ * mv_; }
        std::size_t horizontal_count() const { return mh_; }
        std::size_t vertical_count() const { return mv_; }
        double spacing() const { return dh_; }
        double spacing_h() const { return dh_; }
        double spacing_v() const { return dv_; }
        double wavelength() const { return wavelength_; }
        double wavenumber() const { return 2.0 * pi / wavelength_; }
        const Vec3 &origin() const { return origin_; }

        std::size_t horizontal_index(std::size_t m) const { return m % mh_; }
        std::size_t vertical_index(std::size_t m) const { return m / mh_; }

        Vec3 element_position(std::size_t m) const;

        // Maximum aperture length D: (M-1)d for a ULA, panel diagonal for a UPA.
        double max_aperture() const;

        // Mean of the element positions.
        Vec3 center() const;

    private:
        ArrayGeometry() = default;

        ArrayKind kind_ = ArrayKind::ula;
        std::size_t mh_ = 0;
        std::size_t mv_ = 1;
        double dh_ = 0.0;
        double dv_ = 0.0;
        double wavelength_ = 0.0;
        Vec3 origin_ = Vec3::Zero();
    };

    std::vector<Vec3> element_positions(const ArrayGeometry &geom);

    // Euclidean distance between element m and a source.
    // Throws DegenerateGeometryError if the source sits on the element.
    double exact_distance(const ArrayGeometry &geom, std::size_t m, const Vec3 &source);

    // Second-order (Fresnel) approximation of the element-to-source distance, given
    // the range r1 and direction seen from element 0.
    //   ULA: r1 (1 + (m d cos az)^2 / (2 r1^2) - m d sin az / r1)
    //   UPA: r1 + (i^2 dh^2 + k^2 dv^2) / (2 r1) - i dh sin az cos el - k dv sin el
    double fresnel_distance(const ArrayGeometry &geom, std::size_t m, double r1,
                            const Direction &dir);

    enum class SteeringMode
    {
        exact,
        fresnel,
        farfield
    };

    // A source is given either by its position (exact / fresnel) or by its
    // direction alone (farfield).
    using SourceSpec = std::variant<Vec3, Direction>;

    // Array response a with a[m] = exp(-j (2 pi / lambda) (r_m - r_0)).
    // a[0] == 1 and |a[m]| == 1 for every mode. The far-field mode uses the
    // plane-wave limit r_0 - r_m = i dh sin az cos el + k dv sin el.
    CVector steering_vector(const ArrayGeometry &geom, const SourceSpec &source, SteeringMode mode);

    // Allocation-free variant used by the spectrum kernels. `where` is relative to
    // element 0; its range is ignored in far-field mode. out.size() must equal M.
    void fill_steering(const ArrayGeometry &geom, const PolarPoint &where, SteeringMode mode,
                       std::span<cdouble> out);

    // A point relative to element 0 given by its range and the sines and cosines
    // of its angles, for callers that tabulate the trig once per grid axis.
    struct SteeringAngles
    {
        double range = 1.0;
        double sin_az = 0.0;
        double cos_az = 1.0;
        double sin_el = 0.0;
        double cos_el = 1.0;
    };

    void fill_steering(const ArrayGeometry &geom, const SteeringAngles &where, SteeringMode mode,
                       std::span<cdouble> out);

    struct FieldBoundaries
    {
        double aperture = 0.0; // D
        double bjornson = 0.0; // 2 D
        double fraunhofer = 0.0; // 2 D^2 / lambda
    };

    FieldBoundaries field_boundaries(const ArrayGeometry &geom);

    struct Subarray
    {
        ArrayGeometry geometry;
        Vec3 center;                            // triangulation anchor
        std::vector<std::size_t> parent_indices; // element m of the sub-array -> parent element
    };

    // Splits the aperture into Q contiguous, non-overlapping sub-arrays.
    // ULA: Q must divide M. UPA: Q must be a square s^2 with s dividing M_H and M_V;
    // blocks are ordered row by row (horizontal block index fastest).
    std::vector<Subarray> subarray_split(const ArrayGeometry &geom, std::size_t q);
}

#endif
