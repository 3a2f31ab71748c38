// SPDX-License-Identifier: Apache-2.0
//
// mmlscm: multi-modal radio radiance fields for localized channel modelling
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

#ifndef mmlscm_run_config_H
#define mmlscm_run_config_H

#include "mmlscm/eval.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mmlscm
{
    // Everything a run needs, readable from and printable to a flat `key = value` file.
    // Unknown keys are rejected; '#' starts a comment.
    struct run_config
    {
        scene_config scene;
        dataset_config data;
        field_architecture field;
        train_config train;
        std::size_t eval_ray_samples = 128;
        std::size_t omp_max_atoms = 8;
        noise_config noise;
        query_placement placement = query_placement::midpoint;

        void set(const std::string &key, const std::string &value);
        std::string get(const std::string &key) const;
        static const std::vector<std::string> &keys();

        void read(std::istream &is);
        void load(const std::string &path);
        void write(std::ostream &os) const;
    };
}

#endif
