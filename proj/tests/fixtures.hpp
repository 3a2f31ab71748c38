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

#ifndef mmlscm_test_fixtures_H
#define mmlscm_test_fixtures_H

#include "mmlscm/eval.hpp"

namespace fixture
{
    using namespace mmlscm;

    // 6 x 3 x 6 m room, one box, three grids on a coarse 6 x 12 angle grid
    inline dataset toy_dataset()
    {
        scene s;
        s.room_lo = vec3::Zero();
        s.room_hi = vec3(6.0, 3.0, 6.0);
        s.bs_position = vec3(0.5, 1.5, 0.5);
        s.boxes = {box{vec3(2.0, 0.0, 3.0), vec3(3.0, 2.0, 4.0), 0.7}};
        s.grid_positions = {vec3(1.5, 1.2, 4.5), vec3(4.0, 1.0, 2.5), vec3(4.5, 1.6, 5.0)};
        s.seed = 1;

        const auto angular = build_angular_grid(6, 12);
        array_config a;
        const auto phi = build_measurement_matrix(a, angular, build_dft_codebook(a, 8));
        const auto phi_rot = shift_measurement_matrix(phi, angular, {1, 1});
        dataset_config dc;
        dc.points_per_m2 = 60.0;
        dc.depth_samples = 32;
        dc.split_fraction = 0.67;
        dc.seed = 3;
        return build_dataset(s, angular, phi, phi_rot, dc);
    }

    // Every grid of the toy scene is a training record
    inline training_set toy_training_set(const dataset &d)
    {
        auto set = make_training_set(d);
        set.records.clear();
        for (std::size_t l = 0; l < d.n_grids(); ++l)
            set.records.push_back(d.rsrp_base[l]);
        return set;
    }

    inline field_architecture toy_arch(std::uint64_t seed = 1)
    {
        field_architecture a;
        a.position = {4, 2.0};
        a.density = {2, 2.0};
        a.att_width = 16;
        a.att_layers = 3;
        a.att_skip = 1;
        a.rad_width = 16;
        a.rad_layers = 2;
        a.sh_degree = 2;
        a.seed = seed;
        return a;
    }

    inline train_config toy_train(std::size_t steps)
    {
        train_config c;
        c.steps = steps;
        c.batch_grids = 1;
        c.rays_per_step = 0;
        c.ray_samples = 24;
        c.lr_start = 5e-3;
        c.lr_end = 5e-4;
        return c;
    }
}

#endif
