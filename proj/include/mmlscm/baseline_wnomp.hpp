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

#ifndef mmlscm_baseline_wnomp_H
#define mmlscm_baseline_wnomp_H

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace mmlscm
{
    struct omp_config
    {
        std::size_t max_atoms = 8;
        double residual_tol = 1e-12;
        Eigen::VectorXd weights; // empty = uniform
        void validate(std::size_t n_atoms) const;
    };

    struct omp_result
    {
        Eigen::VectorXd x;                 // [N], nonnegative, at most max_atoms nonzeros
        std::vector<std::size_t> support;  // selection order
        std::vector<double> residual_norms; // before the first pick and after every refit
        bool degenerate = false;           // zero matrix
    };

    // min ||y - A c||^2 s.t. c >= 0 (Lawson-Hanson active set). Throws numerical_failure at the iteration cap.
    Eigen::VectorXd nnls_on_support(const Eigen::MatrixXd &A, const Eigen::VectorXd &y, std::size_t max_iter = 0);

    // Max KKT violation of a candidate NNLS solution: max(|g_i| on c_i > 0, max(0, -g_i) on c_i = 0), g = A^T (A c - y)
    double nnls_kkt_residual(const Eigen::MatrixXd &A, const Eigen::VectorXd &y, const Eigen::VectorXd &c);

    // Weighted nonnegative OMP (inputs only need to be finite). Selection maximizes w_n <phi_n, r> / ||phi_n||
    // over unselected atoms with positive correlation; coefficients are refit by NNLS on the support after every pick.
    omp_result wnomp_solve(const Eigen::MatrixXd &phi, const Eigen::VectorXd &y, const omp_config &cfg);

    // Several measurement rounds solved jointly by stacking [phi_1; phi_2; ...] and [y_1; y_2; ...]
    omp_result wnomp_solve_stacked(const std::vector<const Eigen::MatrixXd *> &phis, const std::vector<const Eigen::VectorXd *> &ys,
                                   const omp_config &cfg);

    // Nonzero entries as "index,value" rows
    void write_sparse_csv(std::ostream &os, const Eigen::VectorXd &x);
}

#endif
