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

#ifndef mmlscm_renderer_H
#define mmlscm_renderer_H

#include "mmlscm/pointcloud.hpp"
#include "mmlscm/radiance_field.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

/*!MD
# Volume rendering along BS rays

A ray has `D` knots `t_0 = 0 < t_1 < ... < t_{D-1} = t_max` and therefore `D - 1` segments of
length `delta_d = t_{d+1} - t_d`. Per segment, with field density `sigma_d` and signal `S_d`:

```
T_d = exp(-sum_{d' < d} sigma_d' delta_d')      transmittance, T_0 = 1
P_d = 1 - exp(-sigma_d delta_d)                 opacity
r   = sum_d T_d P_d S_d                         complex gain, aps = |r|^2
z   = sum_d T_d (t_d + P_d / sigma_d - exp(-sigma_d delta_d) t_{d+1})
```

`T_{D-1}` is the residual transmittance of rays escaping past `t_max`; it does not enter `z`.
Below `sigma_eps` the ratio `P_d / sigma_d` is replaced by `delta (1 - a/2 + a^2/6)`, `a = sigma delta`.
MD!*/

namespace mmlscm
{
    enum class sampling_mode
    {
        uniform,
        stratified
    };

    struct ray_sampling
    {
        double t_max = 0.0;
        std::vector<double> ts;     // D knots
        std::vector<double> deltas; // D - 1 segment lengths

        std::size_t knots() const { return ts.size(); }
        std::size_t segments() const { return deltas.size(); }
    };

    // Uniform knots at spacing t_max / (D - 1); stratified jitters each interior knot inside its uniform cell
    ray_sampling make_sampling(double t_max, std::size_t D, sampling_mode mode = sampling_mode::uniform, std::uint64_t seed = 0);

    // Where along each segment the field is queried
    enum class query_placement
    {
        segment_start,
        midpoint
    };

    std::vector<double> query_distances(const ray_sampling &s, query_placement placement);

    inline constexpr double default_sigma_eps = 1e-8;

    // Per-segment depth contribution t_d + P/sigma - exp(-sigma delta) t_{d+1} and its sigma-derivative
    double depth_term(double sigma, double t_d, double delta, double sigma_eps = default_sigma_eps);
    double depth_term_exact(double sigma, double t_d, double delta);
    double depth_term_series(double sigma, double t_d, double delta);
    double depth_term_dsigma(double sigma, double t_d, double delta, double sigma_eps = default_sigma_eps);

    struct render_terms
    {
        Eigen::VectorXd sigmas;        // [D-1]
        std::vector<cplx> signals;     // [D-1]
        Eigen::VectorXd transmittance; // [D], last entry is the residual
        Eigen::VectorXd opacity;       // [D-1]
    };

    struct composite_result
    {
        cplx gain{0.0, 0.0};
        double depth = 0.0;
        render_terms terms;
    };

    // Discrete compositing of given per-segment sigma and signal values
    composite_result composite(std::span<const double> sigmas, std::span<const cplx> signals,
                               const ray_sampling &sampling, double sigma_eps = default_sigma_eps);

    struct composite_gradient
    {
        Eigen::VectorXd d_sigma;
        Eigen::VectorXd d_re;
        Eigen::VectorXd d_im;
    };

    // Given dL/dRe r, dL/dIm r and dL/dz, returns per-segment gradients
    composite_gradient composite_backward(const render_terms &terms, const ray_sampling &sampling,
                                          double g_re, double g_im, double g_depth,
                                          double sigma_eps = default_sigma_eps);

    struct render_config
    {
        position_normalizer normalizer;
        query_placement placement = query_placement::midpoint;
        double sigma_eps = default_sigma_eps;
        std::size_t chunk_rays = 32;
    };

    struct ray_result
    {
        cplx gain{0.0, 0.0};
        double depth = 0.0;
        render_terms terms;
    };

    // p_grid and the density grid are in the BS frame (meters); normalization happens here
    ray_result render_ray(const field_params &params, const density_grid &grid, const vec3 &direction,
                          const vec3 &p_grid, const ray_sampling &sampling, const render_config &cfg);

    struct render_output
    {
        Eigen::VectorXd aps;            // [N]
        Eigen::VectorXcd complex_gains; // [N]
        Eigen::VectorXd depths;         // [N]
    };

    // Retained state of a forward pass needed by render_backward
    struct render_tape
    {
        bool valid = false;
        ray_sampling sampling;
        std::vector<vec3> directions;
        std::vector<vec3> grids;
        std::vector<render_terms> rays; // signals left empty
        std::vector<Eigen::VectorXcd> gains; // per grid, per ray
    };

    struct multi_render
    {
        std::vector<render_output> per_grid;
        render_tape tape;
    };

    // Renders every direction for every grid position. The attenuation branch is evaluated once per sample
    // and shared by all grids. Output vectors follow the order of `directions`.
    multi_render render_grids(const field_params &params, const density_grid &grid, const std::vector<vec3> &directions,
                              const std::vector<vec3> &grid_positions, const ray_sampling &sampling,
                              const render_config &cfg, bool retain_tape = false);

    render_output render_grid(const field_params &params, const density_grid &grid, const angular_grid &angular,
                              const vec3 &p_grid, const ray_sampling &sampling, const render_config &cfg);

    // Flat parameter gradient of sum_l <g_aps[l], aps_l> + <g_depth, depths>. Requires a retained tape.
    Eigen::VectorXd render_backward(const field_params &params, const density_grid &grid, const render_tape &tape,
                                    const std::vector<Eigen::VectorXd> &g_aps, const Eigen::VectorXd &g_depth,
                                    const render_config &cfg);

    // Ground truth for the discrete formulas: r = int nu(t) S(t) dt, z = int nu(t) t dt,
    // nu(t) = exp(-int_0^t sigma) sigma(t), by panel-doubling Gauss-Legendre quadrature.
    struct oracle_result
    {
        cplx gain{0.0, 0.0};
        double depth = 0.0;
    };
    oracle_result integrate_oracle(const std::function<double(double)> &sigma_fn, const std::function<cplx(double)> &signal_fn,
                                   double t_max, double tolerance);

    void save_render_output(const std::string &path, const render_output &out);
    render_output load_render_output(const std::string &path);
    void write_csv(std::ostream &os, const render_output &out, const angular_grid &angular);
}

#endif
