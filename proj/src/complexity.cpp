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

#include "nfloc/complexity.hpp"
#include "nfloc/types.hpp"

#include <string>

namespace nfloc
{
    namespace
    {
        CostModel make(std::uint64_t count, std::uint64_t per_eval)
        {
            return {count, per_eval, count * per_eval};
        }
    }

    CostModel complexity_counts(std::string_view method, std::uint64_t m, std::uint64_t k, std::uint64_t split)
    {
        if (m == 0)
            throw ConfigError("element count must be positive");
        if (k > m)
            throw ConfigError("K cannot exceed M");

        if (method == "music2d")
            return make(m * m, 2 * m * (m - k));

        if (method == "proposed")
        {
            if (split == 0 || m % split != 0)
                throw ConfigError("sub-array count must divide M");
            const std::uint64_t n = m / split;
            if (n + 1 < k)
                throw ConfigError("sub-array too small for K sources");
            return make(split * m, 2 * n * (n + 1 - k));
        }

        if (method == "modified-angle")
        {
            if (m + k < 2 * split)
                throw ConfigError("window count too large for the angle-stage formula");
            return make(m, 2 * m * (m + k - 2 * split));
        }

        if (method == "modified-distance")
            return make(k * m, 10 * m * (m - k));

        if (method == "modified")
        {
            const CostModel a = complexity_counts("modified-angle", m, k, split);
            const CostModel d = complexity_counts("modified-distance", m, k, split);
            CostModel out;
            out.spectrum_eval_count = a.spectrum_eval_count + d.spectrum_eval_count;
            out.total_flops = a.total_flops + d.total_flops;
            out.per_eval_flops = out.spectrum_eval_count ? out.total_flops / out.spectrum_eval_count : 0;
            return out;
        }

        throw ConfigError("unknown method tag '" + std::string(method) + "'");
    }
}
