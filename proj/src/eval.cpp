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

#include "mmlscm/eval.hpp"
#include "mmlscm/error.hpp"
#include "mmlscm/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace mmlscm
{
    using Eigen::Index;

    double mae_db(const Eigen::VectorXd &truth, const Eigen::VectorXd &prediction, double floor)
    {
        if (truth.size() != prediction.size() || truth.size() == 0)
            throw invalid_argument("mae_db: length mismatch or empty input");
        double s = 0.0;
        for (Index m = 0; m < truth.size(); ++m)
            s += std::abs(std::log10(std::max(truth[m], floor)) - std::log10(std::max(prediction[m], floor)));
        return 10.0 * s / double(truth.size());
    }

    double mse_aps(const Eigen::VectorXd &truth, const Eigen::VectorXd &prediction)
    {
        if (truth.size() != prediction.size() || truth.size() == 0)
            throw invalid_argument("mse_aps: length mismatch or empty input");
        return (truth - prediction).squaredNorm() / double(truth.size());
    }

    evaluation_target clean_target(const dataset &d)
    {
        evaluation_target t;
        t.phi = d.phi.phi;
        t.phi_rot = d.phi_rot.phi;
        for (std::size_t l = 0; l < d.n_grids(); ++l)
        {
            t.y_base.push_back(d.rsrp_base[l].y);
            t.y_rot.push_back(d.rsrp_rot[l].y);
        }
        return t;
    }

    metrics evaluate_subtasks(const std::string &method, const std::vector<Eigen::VectorXd> &x_hat, const dataset &d,
                              const evaluation_target &target, method_kind kind)
    {
        if (x_hat.size() != d.n_grids() || target.y_base.size() != d.n_grids() || target.y_rot.size() != d.n_grids())
            throw invalid_argument("evaluate_subtasks: per-grid inputs must cover all grids");

        std::vector<std::size_t> missing;
        auto check = [&](const std::vector<std::size_t> &ids) {
            for (auto l : ids)
                if (std::size_t(x_hat[l].size()) != d.angular.size())
                    missing.push_back(l);
        };
        check(d.explored);
        if (kind == method_kind::field)
            check(d.unexplored);
        if (!missing.empty())
        {
            std::sort(missing.begin(), missing.end());
            missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
            std::string list;
            for (std::size_t i = 0; i < missing.size() && i < 32; ++i)
                list += (i ? "," : "") + std::to_string(missing[i]);
            if (missing.size() > 32)
                list += ",...";
            throw invalid_argument("evaluate_subtasks: no estimate for grids " + list);
        }

        auto score = [&](const std::vector<std::size_t> &ids, bool rotated) {
            subtask_metrics m;
            const Eigen::MatrixXd &phi = rotated ? target.phi_rot : target.phi;
            for (auto l : ids)
            {
                const Eigen::VectorXd pred = phi * x_hat[l];
                m.mae_db += mae_db(rotated ? target.y_rot[l] : target.y_base[l], pred);
                m.mse_aps += mse_aps(d.aps[l], x_hat[l]);
            }
            m.n_grids = ids.size();
            if (!ids.empty())
            {
                m.mae_db /= double(ids.size());
                m.mse_aps /= double(ids.size());
            }
            return m;
        };

        metrics out;
        out.method = method;
        out.subtasks[0] = score(d.explored, true);
        if (kind == method_kind::field)
        {
            out.subtasks[1] = score(d.unexplored, false);
            out.subtasks[2] = score(d.unexplored, true);
        }
        else
        {
            out.subtasks[1].applicable = false;
            out.subtasks[2].applicable = false;
        }
        return out;
    }

    void noise_config::validate() const
    {
        if (!(level_db >= 0.0) || !std::isfinite(level_db))
            throw invalid_argument("noise_config: level_db must be finite and nonnegative");
    }

    namespace
    {
        template <typename Dense>
        Dense perturb(const Dense &in, double level_db, std::uint64_t seed)
        {
            if (!(level_db >= 0.0))
                throw invalid_argument("inject_noise: level must be nonnegative");
            Dense out = in;
            if (level_db == 0.0)
                return out;
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> eps(0.0, level_db);
            for (Index i = 0; i < out.size(); ++i)
            {
                const double e = eps(rng);
                if (out.data()[i] != 0.0)
                    out.data()[i] *= std::pow(10.0, e / 10.0);
            }
            return out;
        }
    }

    Eigen::MatrixXd inject_noise(const Eigen::MatrixXd &m, double level_db, std::uint64_t seed)
    {
        return perturb(m, level_db, seed);
    }

    Eigen::VectorXd inject_noise(const Eigen::VectorXd &v, double level_db, std::uint64_t seed)
    {
        return perturb(v, level_db, seed);
    }

    evaluation_target noisy_target(const dataset &d, const noise_config &cfg)
    {
        cfg.validate();
        evaluation_target t = clean_target(d);
        if (cfg.phi)
        {
            measurement_matrix noisy;
            noisy.phi = inject_noise(d.phi.phi, cfg.level_db, mix_seed(cfg.seed, 0xF1));
            t.phi = noisy.phi;
            t.phi_rot = shift_measurement_matrix(noisy, d.angular, d.phi_rot.rotation).phi;
        }
        if (cfg.rsrp)
            for (std::size_t l = 0; l < d.n_grids(); ++l)
            {
                t.y_base[l] = inject_noise(t.y_base[l], cfg.level_db, mix_seed(cfg.seed, 0x100000 + 2 * l));
                t.y_rot[l] = inject_noise(t.y_rot[l], cfg.level_db, mix_seed(cfg.seed, 0x100001 + 2 * l));
            }
        return t;
    }

    training_set make_training_set(const dataset &d)
    {
        training_set s;
        for (auto l : d.explored)
            s.records.push_back(d.rsrp_base[l]);
        s.phi_base = d.phi;
        s.phi_rotated = d.phi_rot;
        for (std::size_t l = 0; l < d.n_grids(); ++l)
            s.grid_positions.push_back(d.grid_bs(l));
        s.density = d.density;
        s.angular = d.angular;
        const auto f = d.frame();
        s.t_max = f.t_max;
        s.normalizer = f.normalizer;
        return s;
    }

    training_set make_training_set(const dataset &d, const evaluation_target &target)
    {
        training_set s = make_training_set(d);
        for (auto &r : s.records)
            r.y = target.y_base[r.grid_id];
        s.phi_base.phi = target.phi;
        s.phi_rotated.phi = target.phi_rot;
        return s;
    }

    std::vector<Eigen::VectorXd> predict_aps(const field_params &params, const dataset &d, std::size_t ray_samples,
                                             const std::vector<std::size_t> &grids, std::size_t threads,
                                             query_placement placement)
    {
        std::vector<std::size_t> ids = grids;
        if (ids.empty())
            for (std::size_t l = 0; l < d.n_grids(); ++l)
                ids.push_back(l);
        for (auto l : ids)
            if (l >= d.n_grids())
                throw invalid_argument("predict_aps: grid id out of range");

        const auto f = d.frame();
        const auto sampling = make_sampling(f.t_max, ray_samples, sampling_mode::uniform);
        render_config rc;
        rc.normalizer = f.normalizer;
        rc.placement = placement;

        std::vector<Eigen::VectorXd> out(d.n_grids());
        threads = std::max<std::size_t>(1, std::min(threads, ids.size()));
        auto work = [&](std::size_t w) {
            std::vector<vec3> pos;
            std::vector<std::size_t> mine;
            for (std::size_t i = w; i < ids.size(); i += threads)
            {
                mine.push_back(ids[i]);
                pos.push_back(d.grid_bs(ids[i]));
            }
            if (mine.empty())
                return;
            auto r = render_grids(params, d.density, d.angular.directions, pos, sampling, rc, false);
            for (std::size_t i = 0; i < mine.size(); ++i)
                out[mine[i]] = std::move(r.per_grid[i].aps);
        };
        if (threads == 1)
            work(0);
        else
        {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < threads; ++w)
                pool.emplace_back(work, w);
            for (auto &t : pool)
                t.join();
        }
        return out;
    }

    std::vector<Eigen::VectorXd> wnomp_predict(const dataset &d, const evaluation_target &target, const omp_config &cfg)
    {
        std::vector<Eigen::VectorXd> out(d.n_grids());
        for (auto l : d.explored)
            out[l] = wnomp_solve(target.phi, target.y_base[l], cfg).x;
        return out;
    }

    double depth_mse(const field_params &params, const dataset &d, std::size_t ray_samples)
    {
        const auto f = d.frame();
        const auto sampling = make_sampling(f.t_max, ray_samples, sampling_mode::uniform);
        render_config rc;
        rc.normalizer = f.normalizer;
        const auto r = render_grids(params, d.density, d.angular.directions, {vec3::Zero()}, sampling, rc, false);
        const auto targets = make_depth_targets(d.density, d.angular.directions, sampling, rc.placement);
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < targets.mask.size(); ++i)
            if (targets.mask[i])
            {
                const double e = r.per_grid[0].depths[Index(i)] - targets.z[Index(i)];
                s += e * e;
                ++n;
            }
        return n ? s / double(n) : 0.0;
    }

    std::size_t env_threads()
    {
        const char *v = std::getenv("MMLSCM_THREADS");
        if (!v || !*v)
            return 1;
        char *end = nullptr;
        const long n = std::strtol(v, &end, 10);
        if (*end != '\0' || n < 1)
            throw invalid_argument("MMLSCM_THREADS must be a positive integer");
        return std::size_t(n);
    }

    void write_metrics_csv(std::ostream &os, const std::vector<metrics> &rows)
    {
        os << "method,subtask,applicable,n_grids,mae_db,mse_aps\n";
        for (const auto &r : rows)
            for (std::size_t k = 0; k < 3; ++k)
            {
                const auto &m = r.subtasks[k];
                os << r.method << ',' << k + 1 << ',' << (m.applicable ? 1 : 0) << ',' << m.n_grids << ',';
                if (m.applicable)
                    os << format_double(m.mae_db) << ',' << format_double(m.mse_aps) << '\n';
                else
                    os << "NA,NA\n";
            }
    }

    std::vector<metrics> read_metrics_csv(std::istream &is)
    {
        std::vector<metrics> rows;
        std::string line;
        std::size_t row = 0;
        if (!std::getline(is, line))
            return rows;
        ++row;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line != "method,subtask,applicable,n_grids,mae_db,mse_aps")
            throw parse_error("metrics csv: unexpected header", row);
        while (std::getline(is, line))
        {
            ++row;
            if (line.empty())
                continue;
            std::vector<std::string> f;
            std::stringstream ss(line);
            std::string tok;
            while (std::getline(ss, tok, ','))
                f.push_back(tok);
            if (f.size() != 6)
                throw parse_error("metrics csv: expected 6 fields", row);
            const int k = std::stoi(f[1]);
            if (k < 1 || k > 3)
                throw parse_error("metrics csv: subtask must be 1, 2 or 3", row);
            if (rows.empty() || rows.back().method != f[0])
            {
                rows.emplace_back();
                rows.back().method = f[0];
            }
            auto &m = rows.back().subtasks[std::size_t(k - 1)];
            m.applicable = f[2] == "1";
            m.n_grids = std::stoul(f[3]);
            if (m.applicable)
            {
                m.mae_db = std::strtod(f[4].c_str(), nullptr);
                m.mse_aps = std::strtod(f[5].c_str(), nullptr);
            }
        }
        return rows;
    }

    void write_metrics_table(std::ostream &os, const std::vector<metrics> &rows)
    {
        std::size_t w = 6;
        for (const auto &r : rows)
            w = std::max(w, r.method.size());
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%-*s | %-12s | %-12s | %-12s | %-12s | %-12s | %-12s\n", int(w), "method",
                      "ST1 MAE(dB)", "ST1 MSE", "ST2 MAE(dB)", "ST2 MSE", "ST3 MAE(dB)", "ST3 MSE");
        os << buf;
        os << std::string(w, '-') << std::string(6 * 15, '-') << '\n';
        for (const auto &r : rows)
        {
            std::snprintf(buf, sizeof(buf), "%-*s", int(w), r.method.c_str());
            os << buf;
            for (const auto &m : r.subtasks)
            {
                if (m.applicable)
                    std::snprintf(buf, sizeof(buf), " | %-12.4f | %-12.4e", m.mae_db, m.mse_aps);
                else
                    std::snprintf(buf, sizeof(buf), " | %-12s | %-12s", "N/A", "N/A");
                os << buf;
            }
            os << '\n';
        }
    }
}
