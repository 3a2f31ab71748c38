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

#ifndef mmlscm_radiance_field_H
#define mmlscm_radiance_field_H

#include "mmlscm/array_model.hpp"
#include "mmlscm/container.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace mmlscm
{
    // Frequencies f_v = pi * base^(v-1), v = 1..order. base = pi gives f_v = pi^v.
    struct encoding_config
    {
        std::size_t order = 10;
        double base = std::numbers::pi;

        double frequency(std::size_t v) const; // v is 1-based
        std::size_t width(std::size_t n_inputs) const { return n_inputs * 2 * order; }
        bool operator==(const encoding_config &) const = default;
    };

    // Per input scalar x_c, emits [sin(f_1 x_c), cos(f_1 x_c), ..., sin(f_V x_c), cos(f_V x_c)];
    // blocks are concatenated in input order.
    Eigen::VectorXd positional_encode(std::span<const double> x, const encoding_config &cfg);

    // Column-wise batched form: x is [d, B], result is [d * 2V, B]
    Eigen::MatrixXd positional_encode(const Eigen::MatrixXd &x, const encoding_config &cfg);

    // Real spherical harmonics, orthonormal on the unit sphere, Condon-Shortley phase included.
    // Coefficient index l*l + l + m for m in [-l, l].
    constexpr std::size_t sh_coeff_count(int degree) { return std::size_t((degree + 1) * (degree + 1)); }
    void sh_basis(const vec3 &direction, int degree, double *out);
    double sh_eval(std::span<const double> coeffs, const vec3 &direction, int degree);

    // Maps BS-frame positions into [-1, 1] per axis before encoding
    struct position_normalizer
    {
        vec3 center = vec3::Zero();
        vec3 half_extent = vec3::Ones();

        vec3 apply(const vec3 &p) const { return (p - center).cwiseQuotient(half_extent); }
    };

    struct field_architecture
    {
        encoding_config position{10, std::numbers::pi};
        encoding_config density{4, std::numbers::pi};
        std::size_t att_width = 128;
        std::size_t att_layers = 4;
        std::size_t att_skip = 2; // hidden layer (0-based) that also receives the encoded input
        std::size_t rad_width = 128;
        std::size_t rad_layers = 3;
        int sh_degree = 2;
        double out_init_scale = 0.01; // extra factor on the output-head init, keeps the initial APS small
        std::uint64_t seed = 1;

        std::size_t pos_features() const { return position.width(3); }
        std::size_t density_features() const { return density.width(1); }
        std::size_t att_input() const { return pos_features() + density_features(); }
        std::size_t rad_input() const { return 2 * pos_features() + att_width; }
        std::size_t sh_count() const { return sh_coeff_count(sh_degree); }
        std::size_t out_dim() const { return sh_count() + 1; }

        void validate() const;
        bool operator==(const field_architecture &) const = default;
    };

    struct layer_view
    {
        std::size_t offset = 0; // weights, row-major [fan_out, fan_in], followed by fan_out biases
        std::size_t fan_in = 0;
        std::size_t fan_out = 0;

        std::size_t bias_offset() const { return offset + fan_in * fan_out; }
        std::size_t end() const { return bias_offset() + fan_out; }
    };

    using row_matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    // All learnable weights, stored flat. Layer order: attenuation hidden layers, sigma head,
    // radiance hidden layers, output head (SH coefficients then phase).
    class field_params
    {
    public:
        field_architecture arch;
        Eigen::VectorXd flat;
        std::vector<layer_view> layout;

        static std::vector<layer_view> make_layout(const field_architecture &arch);
        static std::size_t param_count(const field_architecture &arch);

        // Uniform He-style init, U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases, seeded by arch.seed;
        // the output head is additionally scaled by arch.out_init_scale
        static field_params init(const field_architecture &arch);
        static field_params zeros(const field_architecture &arch);

        std::size_t size() const { return std::size_t(flat.size()); }
        std::span<const double> flatten() const { return {flat.data(), size()}; }
        void unflatten(std::span<const double> values);

        std::size_t att_layer(std::size_t k) const { return k; }
        std::size_t sigma_head() const { return arch.att_layers; }
        std::size_t rad_layer(std::size_t k) const { return arch.att_layers + 1 + k; }
        std::size_t out_head() const { return arch.att_layers + 1 + arch.rad_layers; }

        // Flat index range [first, last) owned by the radiance branch
        std::size_t radiance_begin() const { return layout[rad_layer(0)].offset; }

        Eigen::Map<const row_matrix> weights(std::size_t layer) const;
        Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
    };

    // One query of the network
    struct field_output
    {
        double sigma = 0.0;
        cplx signal{0.0, 0.0};
        Eigen::VectorXd sh_coeffs;
        double phase = 0.0;
    };

    // Batch of field queries, one per column. Positions must already be normalized.
    struct field_batch
    {
        Eigen::Matrix3Xd p_voxel;
        Eigen::VectorXd density_feat; // log1p(count)
        Eigen::Matrix3Xd p_grid;
        Eigen::Matrix3Xd direction;

        std::size_t size() const { return std::size_t(p_voxel.cols()); }
    };

    field_output forward(const field_params &params, const vec3 &p_voxel, double density_feat,
                         const vec3 &p_grid, const vec3 &direction);
    std::vector<field_output> forward(const field_params &params, const field_batch &batch);

    struct field_upstream
    {
        Eigen::VectorXd g_sigma;
        Eigen::VectorXd g_re;
        Eigen::VectorXd g_im;
    };

    // Reverse-mode gradient of sum_b (g_sigma[b] sigma[b] + g_re[b] Re S[b] + g_im[b] Im S[b]), flat layout
    Eigen::VectorXd backward(const field_params &params, const field_batch &batch, const field_upstream &up);

    // --- Branch-level building blocks, used by the renderer to share work across grids ---

    struct attenuation_tape
    {
        Eigen::MatrixXd input;              // [att_input, B]
        std::vector<Eigen::MatrixXd> pre;   // per hidden layer
        std::vector<Eigen::MatrixXd> act;   // per hidden layer
        Eigen::RowVectorXd sigma_pre;
        Eigen::VectorXd sigma;

        const Eigen::MatrixXd &feature() const { return act.back(); }
    };

    attenuation_tape attenuation_forward(const field_params &params, Eigen::MatrixXd input);

    // Accumulates into grad. g_feature may be null.
    void attenuation_backward(const field_params &params, const attenuation_tape &tape, const Eigen::VectorXd &g_sigma,
                              const Eigen::MatrixXd *g_feature, Eigen::VectorXd &grad);

    // Grid-independent part of the first radiance layer: W_voxel * enc_voxel + W_feature * feature
    Eigen::MatrixXd radiance_shared_pre(const field_params &params, const Eigen::MatrixXd &enc_voxel, const Eigen::MatrixXd &feature);

    struct radiance_tape
    {
        std::vector<Eigen::MatrixXd> pre;
        std::vector<Eigen::MatrixXd> act;
        Eigen::MatrixXd out;   // [K + 1, B]
        Eigen::MatrixXd basis; // [K, B]
        Eigen::VectorXd amplitude;
        Eigen::VectorXd re;
        Eigen::VectorXd im;
    };

    // enc_grid is [pos_features, 1] (broadcast over the batch) or [pos_features, B]
    radiance_tape radiance_forward(const field_params &params, const Eigen::MatrixXd &shared_pre,
                                   const Eigen::MatrixXd &enc_grid, const Eigen::MatrixXd &basis);

    // SH basis for each direction column, [K, B]
    Eigen::MatrixXd sh_basis_batch(const Eigen::Matrix3Xd &directions, int degree);

    // Accumulates parameter gradients (all radiance layers except the shared columns of layer 0)
    // and adds d loss / d shared_pre into d_shared.
    void radiance_backward(const field_params &params, const radiance_tape &tape, const Eigen::MatrixXd &enc_grid,
                           const Eigen::VectorXd &g_re, const Eigen::VectorXd &g_im,
                           Eigen::VectorXd &grad, Eigen::MatrixXd &d_shared);

    // Gradient through radiance_shared_pre; returns d loss / d feature
    Eigen::MatrixXd radiance_shared_backward(const field_params &params, const Eigen::MatrixXd &enc_voxel,
                                             const Eigen::MatrixXd &feature, const Eigen::MatrixXd &d_shared,
                                             Eigen::VectorXd &grad);

    // Checkpoint payload: architecture metadata plus the "params" array
    void store_field(container &c, const field_params &params);
    // Throws io_error if the stored architecture differs from `expected` (when given)
    field_params restore_field(const container &c, const field_architecture *expected = nullptr);
    void save_field(const std::string &path, const field_params &params);
    field_params load_field(const std::string &path, const field_architecture *expected = nullptr);
}

#endif
