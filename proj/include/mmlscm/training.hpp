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

#ifndef mmlscm_training_H
#define mmlscm_training_H

#include "mmlscm/array_model.hpp"
#include "mmlscm/pointcloud.hpp"
#include "mmlscm/radiance_field.hpp"
#include "mmlscm/renderer.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

/*!MD
# Training

Loss per step over a batch of explored grids `B` and the BS ray set:

```
radio_fit = sum_{l in B} || y_l - Phi x_l ||^2
sparsity  = lambda1 sum_{l in B} sum_n x_{l,n}
env       = lambda2 sum_{n in mask} (z_n - zhat_n)^2
```

Loss values always cover all N rays. With `rays_per_step > 0` only a seeded random subset of rays is
back-propagated and its gradient is scaled by `N / rays_per_step`, an unbiased estimate of the full
gradient.
MD!*/

namespace mmlscm
{
    struct train_config
    {
        double lambda1 = 1e-4;
        double lambda2 = 0.1;
        double lr_start = 5e-4;
        double lr_end = 5e-5;
        double adam_beta1 = 0.9;
        double adam_beta2 = 0.999;
        double adam_eps = 1e-8;
        std::size_t batch_grids = 4;
        std::size_t steps = 1000;
        std::size_t rays_per_step = 256; // 0 = all rays
        std::size_t ray_samples = 128;   // knots D per ray
        std::uint64_t seed = 1;
        bool sm_mode = false;
        bool deterministic = true;
        std::size_t checkpoint_every = 0; // 0 = never
        std::string checkpoint_path;

        double effective_lambda2() const { return sm_mode ? 0.0 : lambda2; }
        double learning_rate(std::size_t step) const;
        void validate() const;
    };

    struct loss_breakdown
    {
        double radio_fit = 0.0;
        double sparsity = 0.0;
        double env = 0.0;
        double total = 0.0;
        bool operator==(const loss_breakdown &) const = default;
    };

    struct training_set
    {
        std::vector<rsrp_record> records;      // explored grids only
        measurement_matrix phi_base;
        measurement_matrix phi_rotated;        // may be empty
        std::vector<vec3> grid_positions;      // BS frame, indexed by grid_id
        density_grid density;
        angular_grid angular;
        double t_max = 0.0;
        position_normalizer normalizer;

        const measurement_matrix &phi_for(matrix_tag tag) const;
        void validate() const;
    };

    struct loss_value
    {
        double value = 0.0;
        Eigen::VectorXd grad;
    };

    // ||y - phi x||^2 + lambda1 sum(x), gradient -2 phi^T (y - phi x) + lambda1
    loss_value radio_loss(const Eigen::MatrixXd &phi, const Eigen::VectorXd &y, const Eigen::VectorXd &x_hat, double lambda1);

    // sum_{mask} (z - zhat)^2, gradient 2 (zhat - z) on masked entries
    loss_value env_loss(const Eigen::VectorXd &z, const Eigen::VectorXd &z_hat, const std::vector<std::uint8_t> &mask);

    struct depth_targets
    {
        Eigen::VectorXd z;
        std::vector<std::uint8_t> mask;
    };

    // z_n = t_d of the first segment whose query point lies in an occupied voxel
    depth_targets make_depth_targets(const density_grid &grid, const std::vector<vec3> &directions,
                                     const ray_sampling &sampling, query_placement placement);

    struct adam_state
    {
        Eigen::VectorXd m;
        Eigen::VectorXd v;
        std::size_t t = 0;
    };

    struct train_state
    {
        field_params params;
        adam_state adam;
        std::size_t step = 0; // index of the next step to run
    };

    train_state make_train_state(const field_architecture &arch);

    struct loss_gradient
    {
        loss_breakdown loss;
        Eigen::VectorXd grad; // empty unless requested
    };

    // Loss over the records `batch` (indices into set.records) with the given sampling, and optionally its
    // parameter gradient back-propagated through `rays` only (all rays if empty), scaled by N / |rays|
    loss_gradient loss_and_gradient(const field_params &params, const training_set &set, const train_config &cfg,
                                    const std::vector<std::size_t> &batch, const ray_sampling &sampling,
                                    query_placement placement = query_placement::midpoint,
                                    const std::vector<std::size_t> &rays = {}, bool with_gradient = true);

    // One optimizer update at index state.step, seeded by (cfg.seed, state.step). Returns the loss
    // evaluated before the update. Throws training_diverged on a non-finite loss or gradient.
    loss_breakdown train_step(train_state &state, const training_set &set, const train_config &cfg,
                              query_placement placement = query_placement::midpoint);

    struct fit_result
    {
        train_state state;
        std::vector<loss_breakdown> history; // steps run by this call
    };

    using step_callback = std::function<void(std::size_t step, const loss_breakdown &)>;

    // Runs steps state.step .. cfg.steps - 1, checkpointing every cfg.checkpoint_every steps
    fit_result fit(train_state state, const training_set &set, const train_config &cfg,
                   const step_callback &on_step = {}, query_placement placement = query_placement::midpoint);
    fit_result fit(const training_set &set, const train_config &cfg, const field_architecture &arch,
                   const step_callback &on_step = {});

    void save_checkpoint(const std::string &path, const train_state &state);
    train_state load_checkpoint(const std::string &path, const field_architecture *expected = nullptr);

    void write_loss_history_csv(std::ostream &os, const std::vector<loss_breakdown> &history, std::size_t first_step = 0);
}

#endif
