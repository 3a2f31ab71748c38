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

#include "mmlscm/training.hpp"
#include "mmlscm/container.hpp"
#include "mmlscm/error.hpp"
#include "mmlscm/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace mmlscm
{
    namespace
    {
        using Eigen::Index;

        // First k entries of a seeded Fisher-Yates shuffle of 0..n-1
        std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k, std::mt19937_64 &rng)
        {
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), std::size_t(0));
            k = std::min(k, n);
            for (std::size_t i = 0; i < k; ++i)
            {
                std::uniform_int_distribution<std::size_t> d(i, n - 1);
                std::swap(idx[i], idx[d(rng)]);
            }
            idx.resize(k);
            return idx;
        }
    }

    double train_config::learning_rate(std::size_t step) const
    {
        if (steps <= 1)
            return lr_start;
        const double frac = std::min(1.0, double(step) / double(steps - 1));
        return lr_start * std::pow(lr_end / lr_start, frac);
    }

    void train_config::validate() const
    {
        if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
            throw invalid_argument("train_config: lambda1 and lambda2 must be nonnegative");
        if (!(lr_start > 0.0) || !(lr_end > 0.0))
            throw invalid_argument("train_config: learning rates must be positive");
        if (batch_grids == 0)
            throw invalid_argument("train_config: batch_grids must be at least 1");
        if (steps == 0)
            throw invalid_argument("train_config: steps must be at least 1");
        if (ray_samples < 2)
            throw invalid_argument("train_config: ray_samples must be at least 2");
        if (checkpoint_every > 0 && checkpoint_path.empty())
            throw invalid_argument("train_config: checkpoint_every needs a checkpoint_path");
    }

    const measurement_matrix &training_set::phi_for(matrix_tag tag) const
    {
        const auto &m = tag == matrix_tag::base ? phi_base : phi_rotated;
        if (m.phi.size() == 0)
            throw invalid_argument(std::string("training_set: no measurement matrix for tag ") + to_string(tag));
        return m;
    }

    void training_set::validate() const
    {
        if (records.empty())
            throw invalid_argument("training_set: no RSRP records");
        if (!(t_max > 0.0))
            throw invalid_argument("training_set: t_max must be positive");
        for (const auto &r : records)
        {
            if (r.grid_id >= grid_positions.size())
                throw invalid_argument("training_set: record for grid " + std::to_string(r.grid_id) + " has no position");
            const auto &m = phi_for(r.tag);
            if (std::size_t(r.y.size()) != m.rows())
                throw invalid_argument("training_set: record length does not match the measurement matrix");
            if (m.cols() != angular.size())
                throw invalid_argument("training_set: measurement matrix does not match the angular grid");
        }
    }

    loss_value radio_loss(const Eigen::MatrixXd &phi, const Eigen::VectorXd &y, const Eigen::VectorXd &x_hat, double lambda1)
    {
        if (phi.rows() != y.size() || phi.cols() != x_hat.size())
            throw invalid_argument("radio_loss: dimension mismatch");
        const Eigen::VectorXd res = y - phi * x_hat;
        loss_value out;
        out.value = res.squaredNorm() + lambda1 * x_hat.sum();
        out.grad = -2.0 * (phi.transpose() * res);
        out.grad.array() += lambda1;
        return out;
    }

    loss_value env_loss(const Eigen::VectorXd &z, const Eigen::VectorXd &z_hat, const std::vector<std::uint8_t> &mask)
    {
        if (z.size() != z_hat.size() || std::size_t(z.size()) != mask.size())
            throw invalid_argument("env_loss: length mismatch");
        loss_value out;
        out.grad = Eigen::VectorXd::Zero(z.size());
        for (Index n = 0; n < z.size(); ++n)
            if (mask[std::size_t(n)])
            {
                const double e = z_hat[n] - z[n];
                out.value += e * e;
                out.grad[n] = 2.0 * e;
            }
        return out;
    }

    depth_targets make_depth_targets(const density_grid &grid, const std::vector<vec3> &directions,
                                     const ray_sampling &sampling, query_placement placement)
    {
        const auto tq = query_distances(sampling, placement);
        depth_targets out;
        out.z = Eigen::VectorXd::Zero(Index(directions.size()));
        out.mask.assign(directions.size(), 0);
        for (std::size_t n = 0; n < directions.size(); ++n)
            if (auto d = first_obstacle_index(grid, directions[n], tq))
            {
                out.z[Index(n)] = sampling.ts[*d];
                out.mask[n] = 1;
            }
        return out;
    }

    train_state make_train_state(const field_architecture &arch)
    {
        train_state s;
        s.params = field_params::init(arch);
        s.adam.m = Eigen::VectorXd::Zero(Index(s.params.size()));
        s.adam.v = Eigen::VectorXd::Zero(Index(s.params.size()));
        return s;
    }

    loss_gradient loss_and_gradient(const field_params &params, const training_set &set, const train_config &cfg,
                                    const std::vector<std::size_t> &batch, const ray_sampling &sampling,
                                    query_placement placement, const std::vector<std::size_t> &rays, bool with_gradient)
    {
        const std::size_t N = set.angular.size();
        const double lambda2 = cfg.effective_lambda2();

        std::vector<vec3> positions;
        for (auto b : batch)
        {
            if (b >= set.records.size())
                throw invalid_argument("loss_and_gradient: record index out of range");
            positions.push_back(set.grid_positions[set.records[b].grid_id]);
        }

        render_config rc;
        rc.normalizer = set.normalizer;
        rc.placement = placement;
        auto fwd = render_grids(params, set.density, set.angular.directions, positions, sampling, rc, with_gradient);

        loss_gradient out;
        auto &loss = out.loss;
        std::vector<Eigen::VectorXd> g_aps(batch.size());
        for (std::size_t b = 0; b < batch.size(); ++b)
        {
            const auto &rec = set.records[batch[b]];
            const auto &phi = set.phi_for(rec.tag).phi;
            const Eigen::VectorXd &x = fwd.per_grid[b].aps;
            const Eigen::VectorXd res = rec.y - phi * x;
            loss.radio_fit += res.squaredNorm();
            loss.sparsity += cfg.lambda1 * x.sum();
            g_aps[b] = -2.0 * (phi.transpose() * res);
            g_aps[b].array() += cfg.lambda1;
        }

        Eigen::VectorXd g_depth = Eigen::VectorXd::Zero(Index(N));
        if (lambda2 > 0.0)
        {
            const auto targets = make_depth_targets(set.density, set.angular.directions, sampling, placement);
            auto e = env_loss(targets.z, fwd.per_grid.front().depths, targets.mask);
            loss.env = lambda2 * e.value;
            g_depth = lambda2 * e.grad;
        }
        loss.total = loss.radio_fit + loss.sparsity + loss.env;
        if (!with_gradient)
            return out;

        std::vector<std::size_t> subset = rays;
        if (subset.empty())
        {
            subset.resize(N);
            std::iota(subset.begin(), subset.end(), std::size_t(0));
        }
        const double scale = double(N) / double(subset.size());

        render_tape sub;
        sub.valid = true;
        sub.sampling = sampling;
        sub.grids = positions;
        sub.gains.assign(batch.size(), Eigen::VectorXcd(Index(subset.size())));
        std::vector<Eigen::VectorXd> g_aps_sub(batch.size(), Eigen::VectorXd(Index(subset.size())));
        Eigen::VectorXd g_depth_sub(Index(subset.size()));
        for (std::size_t i = 0; i < subset.size(); ++i)
        {
            const std::size_t n = subset[i];
            if (n >= N)
                throw invalid_argument("loss_and_gradient: ray index out of range");
            sub.directions.push_back(set.angular.directions[n]);
            sub.rays.push_back(std::move(fwd.tape.rays[n]));
            for (std::size_t b = 0; b < batch.size(); ++b)
            {
                sub.gains[b][Index(i)] = fwd.tape.gains[b][Index(n)];
                g_aps_sub[b][Index(i)] = scale * g_aps[b][Index(n)];
            }
            g_depth_sub[Index(i)] = scale * g_depth[Index(n)];
        }
        out.grad = render_backward(params, set.density, sub, g_aps_sub, g_depth_sub, rc);
        return out;
    }

    loss_breakdown train_step(train_state &state, const training_set &set, const train_config &cfg, query_placement placement)
    {
        const std::size_t step = state.step;
        if (!state.params.flat.allFinite())
            throw training_diverged("non-finite parameters", step);
        std::mt19937_64 rng(mix_seed(cfg.seed, step));
        const std::size_t N = set.angular.size();

        const auto batch = draw_without_replacement(set.records.size(), cfg.batch_grids, rng);
        const auto sampling = make_sampling(set.t_max, cfg.ray_samples, sampling_mode::stratified, rng());
        std::vector<std::size_t> rays;
        if (cfg.rays_per_step > 0 && cfg.rays_per_step < N)
        {
            rays = draw_without_replacement(N, cfg.rays_per_step, rng);
            std::sort(rays.begin(), rays.end());
        }

        const auto lg = loss_and_gradient(state.params, set, cfg, batch, sampling, placement, rays, true);
        const auto &loss = lg.loss;
        const auto &grad = lg.grad;
        if (!std::isfinite(loss.total))
            throw training_diverged("non-finite loss", step);
        if (!grad.allFinite())
            throw training_diverged("non-finite gradient", step);

        // Adam
        auto &a = state.adam;
        a.t += 1;
        a.m = cfg.adam_beta1 * a.m + (1.0 - cfg.adam_beta1) * grad;
        a.v = cfg.adam_beta2 * a.v + (1.0 - cfg.adam_beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, double(a.t));
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, double(a.t));
        const double lr = cfg.learning_rate(step);
        state.params.flat.array() -= lr * (a.m.array() / c1) / ((a.v.array() / c2).sqrt() + cfg.adam_eps);
        if (!state.params.flat.allFinite())
            throw training_diverged("non-finite parameters", step);

        state.step += 1;
        return loss;
    }

    fit_result fit(train_state state, const training_set &set, const train_config &cfg, const step_callback &on_step,
                   query_placement placement)
    {
        cfg.validate();
        set.validate();
        fit_result out;
        while (state.step < cfg.steps)
        {
            const std::size_t s = state.step;
            out.history.push_back(train_step(state, set, cfg, placement));
            if (on_step)
                on_step(s, out.history.back());
            if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0)
                save_checkpoint(cfg.checkpoint_path, state);
        }
        out.state = std::move(state);
        return out;
    }

    fit_result fit(const training_set &set, const train_config &cfg, const field_architecture &arch, const step_callback &on_step)
    {
        return fit(make_train_state(arch), set, cfg, on_step);
    }

    void save_checkpoint(const std::string &path, const train_state &state)
    {
        container c;
        store_field(c, state.params);
        c.meta["kind"] = "train_checkpoint";
        c.meta["train.step"] = std::to_string(state.step);
        c.meta["adam.t"] = std::to_string(state.adam.t);
        const std::uint64_t n = state.params.size();
        c.add("adam_m", {n}, std::span<const double>(state.adam.m.data(), n));
        c.add("adam_v", {n}, std::span<const double>(state.adam.v.data(), n));
        c.save(path);
    }

    train_state load_checkpoint(const std::string &path, const field_architecture *expected)
    {
        auto c = container::load(path);
        if (c.meta_at("kind") != "train_checkpoint")
            throw io_error("'" + path + "' is not a training checkpoint");
        train_state s;
        s.params = restore_field(c, expected);
        s.step = std::size_t(c.meta_int("train.step"));
        s.adam.t = std::size_t(c.meta_int("adam.t"));
        const auto &m = c.get("adam_m", dtype::f64);
        const auto &v = c.get("adam_v", dtype::f64);
        if (m.f64.size() != s.params.size() || v.f64.size() != s.params.size())
            throw io_error("checkpoint optimizer state does not match the parameter count");
        s.adam.m = Eigen::Map<const Eigen::VectorXd>(m.f64.data(), Index(m.f64.size()));
        s.adam.v = Eigen::Map<const Eigen::VectorXd>(v.f64.data(), Index(v.f64.size()));
        return s;
    }

    void write_loss_history_csv(std::ostream &os, const std::vector<loss_breakdown> &history, std::size_t first_step)
    {
        os << "step,radio_fit,sparsity,env,total\n";
        for (std::size_t i = 0; i < history.size(); ++i)
        {
            const auto &h = history[i];
            os << first_step + i << ',' << format_double(h.radio_fit) << ',' << format_double(h.sparsity) << ','
               << format_double(h.env) << ',' << format_double(h.total) << '\n';
        }
    }
}
