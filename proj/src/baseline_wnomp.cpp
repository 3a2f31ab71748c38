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

#include "mmlscm/baseline_wnomp.hpp"
#include "mmlscm/error.hpp"
#include "mmlscm/util.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace mmlscm
{
    using Eigen::Index;

    void omp_config::validate(std::size_t n_atoms) const
    {
        if (max_atoms < 1)
            throw invalid_argument("omp_config: max_atoms must be at least 1");
        if (!(residual_tol >= 0.0))
            throw invalid_argument("omp_config: residual_tol must be nonnegative");
        if (weights.size() != 0)
        {
            if (std::size_t(weights.size()) != n_atoms)
                throw invalid_argument("omp_config: weights must have one entry per atom");
            if ((weights.array() < 0.0).any() || !weights.allFinite())
                throw invalid_argument("omp_config: weights must be finite and nonnegative");
        }
    }

    double nnls_kkt_residual(const Eigen::MatrixXd &A, const Eigen::VectorXd &y, const Eigen::VectorXd &c)
    {
        const Eigen::VectorXd g = A.transpose() * (A * c - y);
        double worst = c.size() ? std::max(0.0, -c.minCoeff()) : 0.0;
        for (Index i = 0; i < c.size(); ++i)
            worst = std::max(worst, c[i] > 0.0 ? std::abs(g[i]) : std::max(0.0, -g[i]));
        return worst;
    }

    Eigen::VectorXd nnls_on_support(const Eigen::MatrixXd &A, const Eigen::VectorXd &y, std::size_t max_iter)
    {
        if (A.rows() != y.size())
            throw invalid_argument("nnls_on_support: row count does not match y");
        if (!A.allFinite() || !y.allFinite())
            throw invalid_argument("nnls_on_support: non-finite input");
        const Index k = A.cols();
        if (max_iter == 0)
            max_iter = 30 * std::size_t(std::max<Index>(k, 1)) + 30;

        Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
        if (k == 0)
            return x;
        std::vector<bool> passive(std::size_t(k), false);
        const double tol = 1e-12 * std::max(1.0, (A.transpose() * y).cwiseAbs().maxCoeff());

        auto solve_passive = [&](Eigen::VectorXd &s) {
            std::vector<Index> cols;
            for (Index i = 0; i < k; ++i)
                if (passive[std::size_t(i)])
                    cols.push_back(i);
            Eigen::MatrixXd Ap(A.rows(), Index(cols.size()));
            for (std::size_t j = 0; j < cols.size(); ++j)
                Ap.col(Index(j)) = A.col(cols[j]);
            const Eigen::VectorXd sp = Ap.colPivHouseholderQr().solve(y);
            s.setZero(k);
            for (std::size_t j = 0; j < cols.size(); ++j)
                s[cols[j]] = sp[Index(j)];
        };

        std::size_t iter = 0;
        Eigen::VectorXd w = A.transpose() * (y - A * x);
        Eigen::VectorXd s;
        while (true)
        {
            Index j = -1;
            double best = tol;
            for (Index i = 0; i < k; ++i)
                if (!passive[std::size_t(i)] && w[i] > best)
                    best = w[i], j = i;
            if (j < 0)
                break;
            passive[std::size_t(j)] = true;

            while (true)
            {
                if (++iter > max_iter)
                    throw numerical_failure("nnls_on_support: iteration cap reached");
                solve_passive(s);
                double alpha = std::numeric_limits<double>::infinity();
                for (Index i = 0; i < k; ++i)
                    if (passive[std::size_t(i)] && s[i] <= 0.0)
                        alpha = std::min(alpha, x[i] / (x[i] - s[i]));
                if (!std::isfinite(alpha))
                {
                    x = s;
                    break;
                }
                x += alpha * (s - x);
                for (Index i = 0; i < k; ++i)
                    if (passive[std::size_t(i)] && x[i] <= 1e-15 * std::max(1.0, x.cwiseAbs().maxCoeff()))
                    {
                        passive[std::size_t(i)] = false;
                        x[i] = 0.0;
                    }
            }
            w = A.transpose() * (y - A * x);
        }
        return x;
    }

    omp_result wnomp_solve(const Eigen::MatrixXd &phi, const Eigen::VectorXd &y, const omp_config &cfg)
    {
        const Index M = phi.rows(), N = phi.cols();
        if (y.size() != M)
            throw invalid_argument("wnomp_solve: y length does not match the matrix rows");
        if (!y.allFinite() || !phi.allFinite())
            throw invalid_argument("wnomp_solve: non-finite input");
        cfg.validate(std::size_t(N));

        omp_result out;
        out.x = Eigen::VectorXd::Zero(N);
        if (phi.cwiseAbs().maxCoeff() == 0.0 || N == 0)
        {
            out.degenerate = true;
            out.residual_norms.push_back(y.norm());
            return out;
        }
        const Eigen::VectorXd norms = phi.colwise().norm().transpose();

        Eigen::VectorXd r = y;
        std::vector<bool> used(std::size_t(N), false);
        out.residual_norms.push_back(r.norm());
        const double stop = cfg.residual_tol + 1e-14 * y.norm();
        Eigen::VectorXd c;

        while (out.support.size() < cfg.max_atoms && r.norm() > stop)
        {
            const Eigen::VectorXd corr = phi.transpose() * r;
            Index best = -1;
            double best_val = 0.0;
            for (Index n = 0; n < N; ++n)
            {
                if (used[std::size_t(n)] || norms[n] == 0.0 || corr[n] <= 0.0)
                    continue;
                const double w = cfg.weights.size() ? cfg.weights[n] : 1.0;
                const double v = w * corr[n] / norms[n];
                if (v > best_val)
                    best_val = v, best = n;
            }
            if (best < 0)
                break;
            used[std::size_t(best)] = true;
            out.support.push_back(std::size_t(best));

            Eigen::MatrixXd sub(M, Index(out.support.size()));
            for (std::size_t j = 0; j < out.support.size(); ++j)
                sub.col(Index(j)) = phi.col(Index(out.support[j]));
            c = nnls_on_support(sub, y);
            r = y - sub * c;
            out.residual_norms.push_back(r.norm());
        }
        for (std::size_t j = 0; j < out.support.size(); ++j)
            out.x[Index(out.support[j])] = c[Index(j)];
        return out;
    }

    omp_result wnomp_solve_stacked(const std::vector<const Eigen::MatrixXd *> &phis, const std::vector<const Eigen::VectorXd *> &ys,
                                   const omp_config &cfg)
    {
        if (phis.empty() || phis.size() != ys.size())
            throw invalid_argument("wnomp_solve_stacked: need matching, nonempty matrix and measurement lists");
        Index rows = 0;
        const Index N = phis.front()->cols();
        for (std::size_t i = 0; i < phis.size(); ++i)
        {
            if (phis[i]->cols() != N || phis[i]->rows() != ys[i]->size())
                throw invalid_argument("wnomp_solve_stacked: inconsistent dimensions");
            rows += phis[i]->rows();
        }
        Eigen::MatrixXd A(rows, N);
        Eigen::VectorXd b(rows);
        Index r0 = 0;
        for (std::size_t i = 0; i < phis.size(); ++i)
        {
            A.middleRows(r0, phis[i]->rows()) = *phis[i];
            b.segment(r0, ys[i]->size()) = *ys[i];
            r0 += phis[i]->rows();
        }
        return wnomp_solve(A, b, cfg);
    }

    void write_sparse_csv(std::ostream &os, const Eigen::VectorXd &x)
    {
        os << "index,value\n";
        for (Index n = 0; n < x.size(); ++n)
            if (x[n] != 0.0)
                os << n << ',' << format_double(x[n]) << '\n';
    }
}
