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

#ifndef NFLOC_KERNELS_HPP
#define NFLOC_KERNELS_HPP

#include "nfloc/subspace.hpp"

#include <span>

namespace nfloc::kernels
{
    // Cells are processed in fixed blocks of this many flat indices, aligned to
    // multiples of block_cells. A block is always computed as a unit, so the value
    // of a cell does not depend on how blocks are distributed over threads or on
    // whether the grid is streamed.
    inline constexpr std::size_t block_cells = 64;

    // Reference kernel: one steering vector and one music_spectrum_value call per
    // cell, in index order. Kept for testing the parallel kernel.
    void evaluate_serial(const SubspaceDecomposition &decomp, const ArrayGeometry &geom, const GridSpec &grid,
                         SteeringMode mode, std::span<double> out);

    // Blocked kernel: builds an M x 64 steering block, projects it with one GEMM
    // and writes cells [begin, end) to out[0 .. end - begin). `begin` must be a
    // multiple of block_cells and `end` either a multiple or the grid size.
    void evaluate_parallel(const CMatrix &noise_basis, const ArrayGeometry &geom, const GridSpec &grid,
                           SteeringMode mode, std::size_t begin, std::size_t end, std::span<double> out,
                           int workers = 0, OpCounter *counter = nullptr);
}

#endif
