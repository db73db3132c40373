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

#ifndef NFLOC_TYPES_HPP
#define NFLOC_TYPES_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace nfloc
{
    using cdouble = std::complex<double>;
    using CVector = Eigen::VectorXcd;
    using CMatrix = Eigen::MatrixXcd;
    using RVector = Eigen::VectorXd;
    using RMatrix = Eigen::MatrixXd;
    using Vec3 = Eigen::Vector3d;

    inline constexpr double pi = 3.14159265358979323846;

    inline constexpr double deg_to_rad(double deg) { return deg * pi / 180.0; }
    inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / pi; }

    // Invalid user configuration: bad split, empty interval, unknown key, ...
    class ConfigError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    // Matrix or vector sizes that do not fit together (e.g. K >= M).
    class DimensionError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    // Caller passed the wrong kind of argument for the requested mode.
    class ContractError : public std::logic_error
    {
    public:
        using std::logic_error::logic_error;
    };

    // Geometry with no well-defined answer: coincident points, parallel bearings.
    class DegenerateGeometryError : public std::domain_error
    {
    public:
        DegenerateGeometryError(const std::string &what, std::size_t index = 0)
            : std::domain_error(what), index_(index) {}

        // Offending element or source index (0-based), when one applies.
        std::size_t index() const noexcept { return index_; }

    private:
        std::size_t index_;
    };
}

#endif
