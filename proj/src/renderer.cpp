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

#include "mmlscm/renderer.hpp"
#include "mmlscm/container.hpp"
#include "mmlscm/error.hpp"
#include "mmlscm/util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

namespace mmlscm
{
    namespace
    {
        using Eigen::Index;

        // Network inputs for one chunk of rays, columns ordered ray-major then segment
        struct chunk_inputs
        {
            Eigen::MatrixXd att_input;
            Eigen::MatrixXd basis;
        };

        chunk_inputs build_chunk(const field_params &params, const density_grid &grid, const std::vector<vec3> &dirs,
                                 std::size_t r0, std::size_t r1, const std::vector<double> &tq, const render_config &cfg)
        {
            const auto &a = params.arch;
            const Index S = Index(tq.size());
            const Index B = Index(r1 - r0) * S;
            Eigen::MatrixXd pos(3, B);
            Eigen::MatrixXd dens(1, B);
            Eigen::Matrix3Xd d3(3, B);
            for (std::size_t r = r0; r < r1; ++r)
                for (Index d = 0; d < S; ++d)
                {
                    const Index c = Index(r - r0) * S + d;
                    const vec3 p = tq[std::size_t(d)] * dirs[r];
                    pos.col(c) = cfg.normalizer.apply(p);
                    dens(0, c) = std::log1p(density_at(grid, p).value);
                    d3.col(c) = dirs[r];
                }
            chunk_inputs ci;
            ci.att_input.resize(Index(a.att_input()), B);
            ci.att_input.topRows(Index(a.pos_features())) = positional_encode(pos, a.position);
            ci.att_input.bottomRows(Index(a.density_features())) = positional_encode(dens, a.density);

            // SH basis depends on the ray only
            ci.basis.resize(Index(a.sh_count()), B);
            Eigen::VectorXd b(Index(a.sh_count()));
            for (std::size_t r = r0; r < r1; ++r)
            {
                sh_basis(dirs[r], a.sh_degree, b.data());
                for (Index d = 0; d < S; ++d)
                    ci.basis.col(Index(r - r0) * S + d) = b;
            }
            return ci;
        }

        // Gauss-Legendre, 8 points on [-1, 1]
        constexpr double gl_x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                                    0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
        constexpr double gl_w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                                    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

        // (1 - e^{-a}) / a and its derivative, accurate for all a >= 0
        double f_ratio(double a)
        {
            if (a < 1e-4)
                return 1.0 - a / 2.0 + a * a / 6.0 - a * a * a / 24.0;
            return -std::expm1(-a) / a;
        }

        double f_ratio_prime(double a)
        {
            if (a < 1e-3)
                return -0.5 + a / 3.0 - a * a / 8.0 + a * a * a / 30.0;
            return (std::exp(-a) * (1.0 + a) - 1.0) / (a * a);
        }
    }

    // ---------------------------------------------------------------- sampling

    ray_sampling make_sampling(double t_max, std::size_t D, sampling_mode mode, std::uint64_t seed)
    {
        if (D < 2)
            throw invalid_argument("make_sampling: need at least 2 knots");
        if (!(t_max > 0.0) || !std::isfinite(t_max))
            throw invalid_argument("make_sampling: t_max must be positive");

        ray_sampling s;
        s.t_max = t_max;
        s.ts.resize(D);
        const double step = t_max / double(D - 1);
        for (std::size_t i = 0; i < D; ++i)
            s.ts[i] = double(i) * step;
        s.ts.back() = t_max;

        if (mode == sampling_mode::stratified)
        {
            std::mt19937_64 rng(mix_seed(seed, 0x5A3D));
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            for (std::size_t i = 1; i + 1 < D; ++i)
            {
                double j = u(rng);
                // open cell, keeps knots strictly increasing
                j = std::clamp(j, -0.5 + 1e-9, 0.5 - 1e-9);
                s.ts[i] = (double(i) + j) * step;
            }
        }

        s.deltas.resize(D - 1);
        for (std::size_t i = 0; i + 1 < D; ++i)
            s.deltas[i] = s.ts[i + 1] - s.ts[i];
        return s;
    }

    std::vector<double> query_distances(const ray_sampling &s, query_placement placement)
    {
        std::vector<double> q(s.segments());
        for (std::size_t d = 0; d < q.size(); ++d)
            q[d] = placement == query_placement::midpoint ? s.ts[d] + 0.5 * s.deltas[d] : s.ts[d];
        return q;
    }

    // ---------------------------------------------------------------- per-segment depth term

    double depth_term_exact(double sigma, double t_d, double delta)
    {
        const double e = std::exp(-sigma * delta);
        const double P = -std::expm1(-sigma * delta);
        return -e * (t_d + delta) + t_d + P / sigma;
    }

    double depth_term_series(double sigma, double t_d, double delta)
    {
        const double a = sigma * delta;
        const double e = std::exp(-a);
        return -e * (t_d + delta) + t_d + delta * (1.0 - a / 2.0 + a * a / 6.0);
    }

    double depth_term(double sigma, double t_d, double delta, double sigma_eps)
    {
        if (sigma < sigma_eps)
            return depth_term_series(sigma, t_d, delta);
        // t_d P + delta (f(a) - e), rearranged to avoid cancellation at small a
        const double a = sigma * delta;
        return t_d * -std::expm1(-a) + delta * (f_ratio(a) - std::exp(-a));
    }

    double depth_term_dsigma(double sigma, double t_d, double delta, double sigma_eps)
    {
        const double a = sigma * delta;
        const double e = std::exp(-a);
        // d/dsigma [t_d (1 - e) + delta f(a) - e delta] = t_d delta e + delta^2 f'(a) + delta^2 e
        if (sigma < sigma_eps)
            return t_d * delta * e + delta * delta * (-0.5 + a / 3.0) + delta * delta * e;
        return t_d * delta * e + delta * delta * f_ratio_prime(a) + delta * delta * e;
    }

    // ---------------------------------------------------------------- compositing

    composite_result composite(std::span<const double> sigmas, std::span<const cplx> signals,
                               const ray_sampling &sampling, double sigma_eps)
    {
        const std::size_t S = sampling.segments();
        if (sigmas.size() != S || signals.size() != S)
            throw invalid_argument("composite: per-segment arrays must match the segment count");

        composite_result out;
        auto &t = out.terms;
        t.sigmas = Eigen::Map<const Eigen::VectorXd>(sigmas.data(), Index(S));
        t.signals.assign(signals.begin(), signals.end());
        t.transmittance.resize(Index(S + 1));
        t.opacity.resize(Index(S));

        double optical = 0.0;
        for (std::size_t d = 0; d < S; ++d)
        {
            if (!(sigmas[d] >= 0.0))
                throw invalid_argument("composite: sigma must be nonnegative");
            const double T = std::exp(-optical);
            const double a = sigmas[d] * sampling.deltas[d];
            const double P = -std::expm1(-a);
            t.transmittance[Index(d)] = T;
            t.opacity[Index(d)] = P;
            out.gain += T * P * signals[d];
            out.depth += T * depth_term(sigmas[d], sampling.ts[d], sampling.deltas[d], sigma_eps);
            optical += a;
        }
        t.transmittance[Index(S)] = std::exp(-optical);
        return out;
    }

    composite_gradient composite_backward(const render_terms &terms, const ray_sampling &sampling,
                                          double g_re, double g_im, double g_depth, double sigma_eps)
    {
        const std::size_t S = sampling.segments();
        if (std::size_t(terms.sigmas.size()) != S || terms.signals.size() != S ||
            std::size_t(terms.transmittance.size()) != S + 1 || std::size_t(terms.opacity.size()) != S)
            throw invalid_state("composite_backward: render terms are missing or inconsistent");

        composite_gradient g;
        g.d_sigma = Eigen::VectorXd::Zero(Index(S));
        g.d_re.resize(Index(S));
        g.d_im.resize(Index(S));

        // suffix[d] = sum_{d' > d} T_d' (dw_d' P_d' + g_depth u_d')
        double suffix = 0.0;
        for (std::size_t d = S; d-- > 0;)
        {
            const double T = terms.transmittance[Index(d)], P = terms.opacity[Index(d)];
            const double sigma = terms.sigmas[Index(d)], delta = sampling.deltas[d], t_d = sampling.ts[d];
            const cplx s = terms.signals[d];
            const double w = T * P;
            g.d_re[Index(d)] = w * g_re;
            g.d_im[Index(d)] = w * g_im;
            const double dw = g_re * s.real() + g_im * s.imag();
            const double u = depth_term(sigma, t_d, delta, sigma_eps);
            const double e = std::exp(-sigma * delta);
            g.d_sigma[Index(d)] = dw * T * delta * e + g_depth * T * depth_term_dsigma(sigma, t_d, delta, sigma_eps) - delta * suffix;
            suffix += T * (dw * P + g_depth * u);
        }
        return g;
    }

    // ---------------------------------------------------------------- network rendering

    ray_result render_ray(const field_params &params, const density_grid &grid, const vec3 &direction,
                          const vec3 &p_grid, const ray_sampling &sampling, const render_config &cfg)
    {
        if (std::abs(direction.norm() - 1.0) > 1e-9)
            throw invalid_argument("render_ray: direction must have unit norm");
        auto m = render_grids(params, grid, {direction}, {p_grid}, sampling, cfg, true);

        ray_result r;
        r.gain = m.per_grid[0].complex_gains[0];
        r.depth = m.per_grid[0].depths[0];
        r.terms = m.tape.rays[0];

        // recover the per-segment signals for the caller
        const auto tq = query_distances(sampling, cfg.placement);
        const auto &a = params.arch;
        std::vector<vec3> dirs{direction};
        auto ci = build_chunk(params, grid, dirs, 0, 1, tq, cfg);
        const Eigen::MatrixXd enc_voxel = ci.att_input.topRows(Index(a.pos_features()));
        auto att = attenuation_forward(params, ci.att_input);
        const Eigen::MatrixXd enc_grid = positional_encode(Eigen::MatrixXd(cfg.normalizer.apply(p_grid)), a.position);
        auto rad = radiance_forward(params, radiance_shared_pre(params, enc_voxel, att.feature()), enc_grid, ci.basis);
        r.terms.signals.resize(tq.size());
        for (std::size_t d = 0; d < tq.size(); ++d)
            r.terms.signals[d] = {rad.re[Index(d)], rad.im[Index(d)]};
        return r;
    }

    multi_render render_grids(const field_params &params, const density_grid &grid, const std::vector<vec3> &directions,
                              const std::vector<vec3> &grid_positions, const ray_sampling &sampling,
                              const render_config &cfg, bool retain_tape)
    {
        const auto &a = params.arch;
        const std::size_t R = directions.size(), L = grid_positions.size(), S = sampling.segments();
        const auto tq = query_distances(sampling, cfg.placement);

        multi_render out;
        out.per_grid.resize(L);
        for (auto &o : out.per_grid)
        {
            o.aps.resize(Index(R));
            o.complex_gains.resize(Index(R));
            o.depths.resize(Index(R));
        }
        std::vector<Eigen::MatrixXd> enc_grids(L);
        for (std::size_t l = 0; l < L; ++l)
            enc_grids[l] = positional_encode(Eigen::MatrixXd(cfg.normalizer.apply(grid_positions[l])), a.position);

        if (retain_tape)
        {
            out.tape.sampling = sampling;
            out.tape.directions = directions;
            out.tape.grids = grid_positions;
            out.tape.rays.resize(R);
            out.tape.gains.assign(L, Eigen::VectorXcd(Index(R)));
        }

        const std::size_t chunk = std::max<std::size_t>(1, cfg.chunk_rays);
        std::vector<cplx> zero_signal(S, cplx(0.0, 0.0));
        for (std::size_t r0 = 0; r0 < R; r0 += chunk)
        {
            const std::size_t r1 = std::min(R, r0 + chunk);
            auto ci = build_chunk(params, grid, directions, r0, r1, tq, cfg);
            const Eigen::MatrixXd enc_voxel = ci.att_input.topRows(Index(a.pos_features()));
            auto att = attenuation_forward(params, std::move(ci.att_input));
            const Eigen::MatrixXd shared = radiance_shared_pre(params, enc_voxel, att.feature());

            // weights and depth are grid independent
            Eigen::MatrixXd w(Index(S), Index(r1 - r0));
            for (std::size_t r = r0; r < r1; ++r)
            {
                const Index base = Index(r - r0) * Index(S);
                auto c = composite(std::span<const double>(att.sigma.data() + base, S), zero_signal, sampling, cfg.sigma_eps);
                w.col(Index(r - r0)) = c.terms.transmittance.head(Index(S)).cwiseProduct(c.terms.opacity);
                for (auto &o : out.per_grid)
                    o.depths[Index(r)] = c.depth;
                if (retain_tape)
                {
                    c.terms.signals.clear();
                    out.tape.rays[r] = std::move(c.terms);
                }
            }

            for (std::size_t l = 0; l < L; ++l)
            {
                auto rad = radiance_forward(params, shared, enc_grids[l], ci.basis);
                for (std::size_t r = r0; r < r1; ++r)
                {
                    const Index base = Index(r - r0) * Index(S);
                    const auto wr = w.col(Index(r - r0));
                    const cplx g(wr.dot(rad.re.segment(base, Index(S))), wr.dot(rad.im.segment(base, Index(S))));
                    out.per_grid[l].complex_gains[Index(r)] = g;
                    out.per_grid[l].aps[Index(r)] = std::norm(g);
                    if (retain_tape)
                        out.tape.gains[l][Index(r)] = g;
                }
            }
        }
        out.tape.valid = retain_tape;
        return out;
    }

    render_output render_grid(const field_params &params, const density_grid &grid, const angular_grid &angular,
                              const vec3 &p_grid, const ray_sampling &sampling, const render_config &cfg)
    {
        return std::move(render_grids(params, grid, angular.directions, {p_grid}, sampling, cfg, false).per_grid.front());
    }

    Eigen::VectorXd render_backward(const field_params &params, const density_grid &grid, const render_tape &tape,
                                    const std::vector<Eigen::VectorXd> &g_aps, const Eigen::VectorXd &g_depth,
                                    const render_config &cfg)
    {
        if (!tape.valid)
            throw invalid_state("render_backward: no retained forward pass");
        const auto &a = params.arch;
        const std::size_t R = tape.directions.size(), L = tape.grids.size(), S = tape.sampling.segments();
        if (tape.rays.size() != R || tape.gains.size() != L)
            throw invalid_state("render_backward: retained terms are incomplete");
        if (g_aps.size() != L || std::size_t(g_depth.size()) != R)
            throw invalid_argument("render_backward: upstream gradient shape mismatch");
        for (const auto &g : g_aps)
            if (std::size_t(g.size()) != R)
                throw invalid_argument("render_backward: upstream APS gradient length mismatch");

        const auto tq = query_distances(tape.sampling, cfg.placement);
        std::vector<Eigen::MatrixXd> enc_grids(L);
        for (std::size_t l = 0; l < L; ++l)
            enc_grids[l] = positional_encode(Eigen::MatrixXd(cfg.normalizer.apply(tape.grids[l])), a.position);

        Eigen::VectorXd grad = Eigen::VectorXd::Zero(Index(params.size()));
        const std::size_t chunk = std::max<std::size_t>(1, cfg.chunk_rays);

        for (std::size_t r0 = 0; r0 < R; r0 += chunk)
        {
            const std::size_t r1 = std::min(R, r0 + chunk);
            const Index B = Index(r1 - r0) * Index(S);
            auto ci = build_chunk(params, grid, tape.directions, r0, r1, tq, cfg);
            const Eigen::MatrixXd enc_voxel = ci.att_input.topRows(Index(a.pos_features()));
            auto att = attenuation_forward(params, std::move(ci.att_input));
            const Eigen::MatrixXd shared = radiance_shared_pre(params, enc_voxel, att.feature());

            Eigen::VectorXd d_sigma = Eigen::VectorXd::Zero(B);
            // dL/dw summed over grids, per sample
            Eigen::VectorXd d_w = Eigen::VectorXd::Zero(B);
            Eigen::MatrixXd d_shared;

            for (std::size_t l = 0; l < L; ++l)
            {
                bool any = false;
                for (std::size_t r = r0; r < r1 && !any; ++r)
                    any = g_aps[l][Index(r)] != 0.0;
                if (!any)
                    continue;

                auto rad = radiance_forward(params, shared, enc_grids[l], ci.basis);
                Eigen::VectorXd g_re(B), g_im(B);
                for (std::size_t r = r0; r < r1; ++r)
                {
                    const Index base = Index(r - r0) * Index(S);
                    const auto &terms = tape.rays[r];
                    const cplx gain = tape.gains[l][Index(r)];
                    const double gr = g_aps[l][Index(r)] * 2.0 * gain.real();
                    const double gi = g_aps[l][Index(r)] * 2.0 * gain.imag();
                    for (std::size_t d = 0; d < S; ++d)
                    {
                        const double w = terms.transmittance[Index(d)] * terms.opacity[Index(d)];
                        g_re[base + Index(d)] = w * gr;
                        g_im[base + Index(d)] = w * gi;
                        d_w[base + Index(d)] += gr * rad.re[base + Index(d)] + gi * rad.im[base + Index(d)];
                    }
                }
                radiance_backward(params, rad, enc_grids[l], g_re, g_im, grad, d_shared);
            }

            // Chain the accumulated weight and depth gradients into sigma
            for (std::size_t r = r0; r < r1; ++r)
            {
                const Index base = Index(r - r0) * Index(S);
                const auto &terms = tape.rays[r];
                const double gz = g_depth[Index(r)];
                double suffix = 0.0;
                for (std::size_t d = S; d-- > 0;)
                {
                    const double T = terms.transmittance[Index(d)], P = terms.opacity[Index(d)];
                    const double sigma = terms.sigmas[Index(d)], delta = tape.sampling.deltas[d], t_d = tape.sampling.ts[d];
                    const double dw = d_w[base + Index(d)];
                    const double e = std::exp(-sigma * delta);
                    d_sigma[base + Index(d)] = dw * T * delta * e +
                                               gz * T * depth_term_dsigma(sigma, t_d, delta, cfg.sigma_eps) - delta * suffix;
                    suffix += T * (dw * P + gz * depth_term(sigma, t_d, delta, cfg.sigma_eps));
                }
            }

            if (d_shared.size() > 0)
            {
                Eigen::MatrixXd d_feature = radiance_shared_backward(params, enc_voxel, att.feature(), d_shared, grad);
                attenuation_backward(params, att, d_sigma, &d_feature, grad);
            }
            else
                attenuation_backward(params, att, d_sigma, nullptr, grad);
        }
        return grad;
    }

    // ---------------------------------------------------------------- quadrature oracle

    oracle_result integrate_oracle(const std::function<double(double)> &sigma_fn, const std::function<cplx(double)> &signal_fn,
                                   double t_max, double tolerance)
    {
        if (!(t_max > 0.0) || !(tolerance > 0.0))
            throw invalid_argument("integrate_oracle: t_max and tolerance must be positive");

        auto evaluate = [&](std::size_t panels) {
            oracle_result res;
            const double h = t_max / double(panels);
            double optical = 0.0; // int_0^a sigma
            for (std::size_t p = 0; p < panels; ++p)
            {
                const double a = double(p) * h;
                for (int i = 0; i < 8; ++i)
                {
                    const double t = a + 0.5 * h * (gl_x[i] + 1.0);
                    // int_a^t sigma by a nested rule on [a, t]
                    double inner = 0.0;
                    const double hl = t - a;
                    for (int k = 0; k < 8; ++k)
                        inner += gl_w[k] * sigma_fn(a + 0.5 * hl * (gl_x[k] + 1.0));
                    inner *= 0.5 * hl;
                    const double s = sigma_fn(t);
                    const double nu = std::exp(-(optical + inner)) * s;
                    const double wt = 0.5 * h * gl_w[i];
                    res.gain += wt * nu * signal_fn(t);
                    res.depth += wt * nu * t;
                }
                double full = 0.0;
                for (int k = 0; k < 8; ++k)
                    full += gl_w[k] * sigma_fn(a + 0.5 * h * (gl_x[k] + 1.0));
                optical += 0.5 * h * full;
            }
            return res;
        };

        oracle_result prev = evaluate(1);
        for (std::size_t panels = 2; panels <= (1u << 16); panels *= 2)
        {
            oracle_result cur = evaluate(panels);
            const double dg = std::abs(cur.gain - prev.gain), dz = std::abs(cur.depth - prev.depth);
            if (dg <= tolerance * std::max(1.0, std::abs(cur.gain)) && dz <= tolerance * std::max(1.0, std::abs(cur.depth)))
                return cur;
            prev = cur;
        }
        throw convergence_error("integrate_oracle: tolerance not reached");
    }

    // ---------------------------------------------------------------- IO

    void save_render_output(const std::string &path, const render_output &out)
    {
        const std::size_t n = std::size_t(out.aps.size());
        std::vector<double> gains(2 * n);
        for (std::size_t i = 0; i < n; ++i)
        {
            gains[2 * i] = out.complex_gains[Index(i)].real();
            gains[2 * i + 1] = out.complex_gains[Index(i)].imag();
        }
        container c;
        c.meta["kind"] = "render_output";
        c.add("aps", {n}, std::span<const double>(out.aps.data(), n));
        c.add("complex_gains", {n, 2}, std::span<const double>(gains));
        c.add("depths", {n}, std::span<const double>(out.depths.data(), n));
        c.save(path);
    }

    render_output load_render_output(const std::string &path)
    {
        auto c = container::load(path);
        if (c.meta_at("kind") != "render_output")
            throw io_error("'" + path + "' is not a render output");
        const auto &aps = c.get("aps", dtype::f64);
        const auto &g = c.get("complex_gains", dtype::f64);
        const auto &z = c.get("depths", dtype::f64);
        const std::size_t n = aps.f64.size();
        if (g.f64.size() != 2 * n || z.f64.size() != n)
            throw io_error("render output arrays are inconsistent");
        render_output o;
        o.aps = Eigen::Map<const Eigen::VectorXd>(aps.f64.data(), Index(n));
        o.depths = Eigen::Map<const Eigen::VectorXd>(z.f64.data(), Index(n));
        o.complex_gains.resize(Index(n));
        for (std::size_t i = 0; i < n; ++i)
            o.complex_gains[Index(i)] = {g.f64[2 * i], g.f64[2 * i + 1]};
        return o;
    }

    void write_csv(std::ostream &os, const render_output &out, const angular_grid &angular)
    {
        constexpr double to_deg = 180.0 / std::numbers::pi;
        os << "index,theta_deg,phi_deg,aps,depth\n";
        for (Index n = 0; n < out.aps.size(); ++n)
            os << n << ',' << format_double(angular.tilt[std::size_t(n)] * to_deg) << ','
               << format_double(angular.azimuth[std::size_t(n)] * to_deg) << ',' << format_double(out.aps[n]) << ','
               << format_double(out.depths[n]) << '\n';
    }
}
