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

#ifndef mmlscm_eval_H
#define mmlscm_eval_H

#include "mmlscm/baseline_wnomp.hpp"
#include "mmlscm/scenegen.hpp"
#include "mmlscm/training.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

/*!MD
# Evaluation

Sub-task | Grids      | Prediction           | Compared against
---------|------------|----------------------|-----------------
1        | explored   | `Phi_rot x_hat`      | `y_rot`
2        | unexplored | `Phi x_hat`          | `y`
3        | unexplored | `Phi_rot x_hat`      | `y_rot`

`mae_db` averages `|10 log10 max(y, eps) - 10 log10 max(y_hat, eps)|` over beams, then over grids;
`mse_aps` averages `(x - x_hat)^2` over the N angles, then over grids. WNOMP only has estimates on
explored grids, so sub-tasks 2 and 3 are reported as not applicable.
MD!*/

namespace mmlscm
{
    inline constexpr double rsrp_floor = 1e-12;

    double mae_db(const Eigen::VectorXd &truth, const Eigen::VectorXd &prediction, double floor = rsrp_floor);
    double mse_aps(const Eigen::VectorXd &truth, const Eigen::VectorXd &prediction);

    struct subtask_metrics
    {
        bool applicable = true;
        double mae_db = 0.0;
        double mse_aps = 0.0;
        std::size_t n_grids = 0;
        bool operator==(const subtask_metrics &) const = default;
    };

    struct metrics
    {
        std::string method;
        std::array<subtask_metrics, 3> subtasks;
        bool operator==(const metrics &) const = default;
    };

    // What predictions are scored against: matrices used to map x_hat to RSRP and the reference RSRP per grid
    struct evaluation_target
    {
        Eigen::MatrixXd phi;
        Eigen::MatrixXd phi_rot;
        std::vector<Eigen::VectorXd> y_base; // per grid
        std::vector<Eigen::VectorXd> y_rot;  // per grid
    };

    evaluation_target clean_target(const dataset &d);

    enum class method_kind
    {
        field,
        wnomp
    };

    // x_hat is indexed by grid id; entries needed by an applicable sub-task must be nonempty.
    // Throws invalid_argument listing missing grid ids.
    metrics evaluate_subtasks(const std::string &method, const std::vector<Eigen::VectorXd> &x_hat, const dataset &d,
                              const evaluation_target &target, method_kind kind);

    struct noise_config
    {
        double level_db = 3.0;
        bool phi = true;
        bool rsrp = true;
        std::uint64_t seed = 11;
        void validate() const;
    };

    // Every nonzero entry v becomes v * 10^(e / 10), e ~ N(0, level_db^2), drawn in storage order
    Eigen::MatrixXd inject_noise(const Eigen::MatrixXd &m, double level_db, std::uint64_t seed);
    Eigen::VectorXd inject_noise(const Eigen::VectorXd &v, double level_db, std::uint64_t seed);

    // Noisy base matrix (the rotated one is the same circular shift of the noisy base) and noisy RSRP
    evaluation_target noisy_target(const dataset &d, const noise_config &cfg);

    // Explored-grid training set with base-matrix records
    training_set make_training_set(const dataset &d);
    // Same, with matrices and explored RSRP taken from `target` (train-on-noisy variant)
    training_set make_training_set(const dataset &d, const evaluation_target &target);

    // Renders the APS of every listed grid (all grids if empty) with uniform sampling. Grid work is split
    // across `threads` workers; results do not depend on the thread count.
    std::vector<Eigen::VectorXd> predict_aps(const field_params &params, const dataset &d, std::size_t ray_samples,
                                             const std::vector<std::size_t> &grids = {}, std::size_t threads = 1,
                                             query_placement placement = query_placement::midpoint);

    // Per explored grid: WNOMP on (target.phi, target.y_base)
    std::vector<Eigen::VectorXd> wnomp_predict(const dataset &d, const evaluation_target &target, const omp_config &cfg);

    // Masked depth MSE of rendered depths against first-obstacle targets on the same uniform sampling
    double depth_mse(const field_params &params, const dataset &d, std::size_t ray_samples);

    // Thread count from MMLSCM_THREADS, default 1
    std::size_t env_threads();

    void write_metrics_csv(std::ostream &os, const std::vector<metrics> &rows);
    std::vector<metrics> read_metrics_csv(std::istream &is);
    void write_metrics_table(std::ostream &os, const std::vector<metrics> &rows);
}

#endif
