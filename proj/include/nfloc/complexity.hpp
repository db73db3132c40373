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

#ifndef NFLOC_COMPLEXITY_HPP
#define NFLOC_COMPLEXITY_HPP

#include <cstdint>
#include <string_view>

namespace nfloc
{
    struct CostModel
    {
        std::uint64_t spectrum_eval_count = 0;
        std::uint64_t per_eval_flops = 0;
        std::uint64_t total_flops = 0;
    };

    // Closed-form spectrum costs when every search axis is sampled M times.
    //
    //   "music2d"           M^2 cells, 2M(M-K) each          -> 2 M^3 (M - K)
    //   "proposed"          Q M cells, 2N(N-K+1) each, N=M/Q -> 2 M^2 (M/Q - K + 1)
    //   "modified-angle"    M cells, 2M(M-2W+K) each         -> 2 M^2 (M - 2W + K)
    //   "modified-distance" K M cells, 10M(M-K) each         -> 2 M^2 (5MK - 5K^2)
    //   "modified"          sum of the two stages (count and total; per_eval = total / count)
    //
    // `split` is Q for "proposed" and the window count W for the modified stages.
    // Throws ConfigError for unknown method tags or inconsistent sizes.
    CostModel complexity_counts(std::string_view method, std::uint64_t m, std::uint64_t k, std::uint64_t split);
}

#endif
