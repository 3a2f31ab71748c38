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

#include "mmlscm/radiance_field.hpp"
#include "mmlscm/error.hpp"
#include "mmlscm/util.hpp"

#include <cmath>
#include <random>

namespace mmlscm
{
    namespace
    {
        using Eigen::Index;

        double softplus(double z)
        {
            return z > 30.0 ? z : std::log1p(std::exp(z));
        }

        double logistic(double z)
        {
            if (z >= 0.0)
                return 1.0 / (1.0 + std::exp(-z));
            const double e = std::exp(z);
            return e / (1.0 + e);
        }

        Eigen::Map<row_matrix> weights_mut(const field_params &p, Eigen::VectorXd &flat, std::size_t layer)
        {
            const auto &l = p.layout[layer];
            return {flat.data() + l.offset, Index(l.fan_out), Index(l.fan_in)};
        }

        Eigen::Map<Eigen::VectorXd> bias_mut(const field_params &p, Eigen::VectorXd &flat, std::size_t layer)
        {
            const auto &l = p.layout[layer];
            return {flat.data() + l.bias_offset(), Index(l.fan_out)};
        }

        void relu_inplace(const Eigen::MatrixXd &pre, Eigen::MatrixXd &act)
        {
            act = pre.cwiseMax(0.0);
        }

        void check_batch(const field_params &params, const field_batch &b)
        {
            const auto n = Index(b.size());
            if (b.density_feat.size() != n || b.p_grid.cols() != n || b.direction.cols() != n)
                throw invalid_argument("field batch: inconsistent column counts");
            for (Index i = 0; i < n; ++i)
                if (std::abs(b.direction.col(i).norm() - 1.0) > 1e-9)
                    throw invalid_argument("field: query direction must have unit norm");
            if (params.size() != field_params::param_count(params.arch))
                throw invalid_argument("field: parameter vector does not match the architecture layout");
        }

        Eigen::MatrixXd attenuation_input(const field_params &params, const field_batch &b)
        {
            const auto &a = params.arch;
            Eigen::MatrixXd in(Index(a.att_input()), Index(b.size()));
            in.topRows(Index(a.pos_features())) = positional_encode(Eigen::MatrixXd(b.p_voxel), a.position);
            in.bottomRows(Index(a.density_features())) = positional_encode(Eigen::MatrixXd(b.density_feat.transpose()), a.density);
            return in;
        }
    }

    // ---------------------------------------------------------------- encoding

    double encoding_config::frequency(std::size_t v) const
    {
        return std::numbers::pi * std::pow(base, double(v) - 1.0);
    }

    Eigen::VectorXd positional_encode(std::span<const double> x, const encoding_config &cfg)
    {
        Eigen::VectorXd out(Index(cfg.width(x.size())));
        Index k = 0;
        for (double xc : x)
            for (std::size_t v = 1; v <= cfg.order; ++v)
            {
                const double a = cfg.frequency(v) * xc;
                out[k++] = std::sin(a);
                out[k++] = std::cos(a);
            }
        return out;
    }

    Eigen::MatrixXd positional_encode(const Eigen::MatrixXd &x, const encoding_config &cfg)
    {
        const Index d = x.rows(), per = Index(2 * cfg.order);
        Eigen::MatrixXd out(d * per, x.cols());
        for (Index c = 0; c < d; ++c)
            for (std::size_t v = 1; v <= cfg.order; ++v)
            {
                const double f = cfg.frequency(v);
                const Index r = c * per + 2 * Index(v - 1);
                out.row(r) = (f * x.row(c)).array().sin();
                out.row(r + 1) = (f * x.row(c)).array().cos();
            }
        return out;
    }

    // ---------------------------------------------------------------- spherical harmonics

    void sh_basis(const vec3 &u, int degree, double *out)
    {
        if (degree < 0)
            throw invalid_argument("sh_basis: degree must be >= 0");
        const double x = u.x(), y = u.y(), z = u.z();
        const double inv4pi = 1.0 / (4.0 * std::numbers::pi);

        // (x + iy)^m and the Legendre factor Q_l^m(z) = P_l^m(z) / sin^m(theta)
        double cm = 1.0, sm = 0.0;
        double qmm = 1.0; // Q_m^m = (-1)^m (2m-1)!!
        for (int m = 0; m <= degree; ++m)
        {
            if (m > 0)
            {
                const double c_next = cm * x - sm * y;
                sm = cm * y + sm * x;
                cm = c_next;
                qmm *= -double(2 * m - 1);
            }
            double q_lm2 = 0.0, q_lm1 = qmm;
            // factorial ratio (l-m)!/(l+m)! maintained incrementally in K
            for (int l = m; l <= degree; ++l)
            {
                double q;
                if (l == m)
                    q = qmm;
                else if (l == m + 1)
                    q = z * double(2 * m + 1) * qmm;
                else
                    q = (double(2 * l - 1) * z * q_lm1 - double(l + m - 1) * q_lm2) / double(l - m);
                if (l > m)
                {
                    q_lm2 = q_lm1;
                    q_lm1 = q;
                }

                double ratio = 1.0;
                for (int k = l - m + 1; k <= l + m; ++k)
                    ratio /= double(k);
                const double K = std::sqrt(double(2 * l + 1) * inv4pi * ratio);

                const std::size_t base = std::size_t(l * l + l);
                if (m == 0)
                    out[base] = K * q;
                else
                {
                    out[base + std::size_t(m)] = std::numbers::sqrt2 * K * cm * q;
                    out[base - std::size_t(m)] = std::numbers::sqrt2 * K * sm * q;
                }
            }
        }
    }

    double sh_eval(std::span<const double> coeffs, const vec3 &direction, int degree)
    {
        if (degree < 0 || coeffs.size() != sh_coeff_count(degree))
            throw invalid_argument("sh_eval: coefficient count must be (degree + 1)^2");
        std::vector<double> b(coeffs.size());
        sh_basis(direction, degree, b.data());
        double s = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i)
            s += coeffs[i] * b[i];
        return s;
    }

    Eigen::MatrixXd sh_basis_batch(const Eigen::Matrix3Xd &directions, int degree)
    {
        Eigen::MatrixXd out(Index(sh_coeff_count(degree)), directions.cols());
        for (Index i = 0; i < directions.cols(); ++i)
            sh_basis(directions.col(i), degree, out.col(i).data());
        return out;
    }

    // ---------------------------------------------------------------- parameters

    void field_architecture::validate() const
    {
        if (position.order < 1 || density.order < 1)
            throw invalid_argument("field_architecture: encoding orders must be >= 1");
        if (att_width < 1 || rad_width < 1 || att_layers < 1 || rad_layers < 1)
            throw invalid_argument("field_architecture: widths and depths must be >= 1");
        if (att_skip >= att_layers)
            throw invalid_argument("field_architecture: skip layer must be a hidden attenuation layer");
        if (sh_degree < 0)
            throw invalid_argument("field_architecture: SH degree must be >= 0");
    }

    std::vector<layer_view> field_params::make_layout(const field_architecture &a)
    {
        a.validate();
        std::vector<std::pair<std::size_t, std::size_t>> shapes;
        for (std::size_t k = 0; k < a.att_layers; ++k)
        {
            std::size_t fan_in = k == 0 ? a.att_input() : a.att_width;
            if (k == a.att_skip && k != 0)
                fan_in += a.att_input();
            shapes.emplace_back(fan_in, a.att_width);
        }
        shapes.emplace_back(a.att_width, 1);
        for (std::size_t k = 0; k < a.rad_layers; ++k)
            shapes.emplace_back(k == 0 ? a.rad_input() : a.rad_width, a.rad_width);
        shapes.emplace_back(a.rad_width, a.out_dim());

        std::vector<layer_view> out;
        std::size_t off = 0;
        for (auto [fi, fo] : shapes)
        {
            out.push_back({off, fi, fo});
            off += (fi + 1) * fo;
        }
        return out;
    }

    std::size_t field_params::param_count(const field_architecture &arch)
    {
        return make_layout(arch).back().end();
    }

    field_params field_params::zeros(const field_architecture &arch)
    {
        field_params p;
        p.arch = arch;
        p.layout = make_layout(arch);
        p.flat = Eigen::VectorXd::Zero(Index(p.layout.back().end()));
        return p;
    }

    field_params field_params::init(const field_architecture &arch)
    {
        field_params p = zeros(arch);
        std::mt19937_64 rng(arch.seed);
        for (std::size_t k = 0; k < p.layout.size(); ++k)
        {
            const auto &l = p.layout[k];
            const double bound = std::sqrt(6.0 / double(l.fan_in)) * (k == p.out_head() ? arch.out_init_scale : 1.0);
            std::uniform_real_distribution<double> u(-bound, bound);
            for (std::size_t i = 0; i < l.fan_in * l.fan_out; ++i)
                p.flat[Index(l.offset + i)] = u(rng);
        }
        return p;
    }

    void field_params::unflatten(std::span<const double> values)
    {
        if (values.size() != size())
            throw invalid_argument("field_params: flat size mismatch");
        flat = Eigen::Map<const Eigen::VectorXd>(values.data(), Index(values.size()));
    }

    Eigen::Map<const row_matrix> field_params::weights(std::size_t layer) const
    {
        const auto &l = layout[layer];
        return {flat.data() + l.offset, Index(l.fan_out), Index(l.fan_in)};
    }

    Eigen::Map<const Eigen::VectorXd> field_params::bias(std::size_t layer) const
    {
        const auto &l = layout[layer];
        return {flat.data() + l.bias_offset(), Index(l.fan_out)};
    }

    // ---------------------------------------------------------------- attenuation branch

    attenuation_tape attenuation_forward(const field_params &params, Eigen::MatrixXd input)
    {
        const auto &a = params.arch;
        attenuation_tape t;
        t.input = std::move(input);
        t.pre.resize(a.att_layers);
        t.act.resize(a.att_layers);
        for (std::size_t k = 0; k < a.att_layers; ++k)
        {
            const auto W = params.weights(params.att_layer(k));
            const auto b = params.bias(params.att_layer(k));
            if (k == 0)
                t.pre[k] = W * t.input;
            else if (k == a.att_skip)
                t.pre[k] = W.leftCols(Index(a.att_width)) * t.act[k - 1] + W.rightCols(Index(a.att_input())) * t.input;
            else
                t.pre[k] = W * t.act[k - 1];
            t.pre[k].colwise() += b;
            relu_inplace(t.pre[k], t.act[k]);
        }
        const auto ws = params.weights(params.sigma_head());
        t.sigma_pre = ws * t.act.back();
        t.sigma_pre.array() += params.bias(params.sigma_head())[0];
        t.sigma.resize(t.sigma_pre.size());
        for (Index i = 0; i < t.sigma_pre.size(); ++i)
            t.sigma[i] = softplus(t.sigma_pre[i]);
        return t;
    }

    void attenuation_backward(const field_params &params, const attenuation_tape &t, const Eigen::VectorXd &g_sigma,
                              const Eigen::MatrixXd *g_feature, Eigen::VectorXd &grad)
    {
        const auto &a = params.arch;
        const Index B = t.sigma.size();
        Eigen::RowVectorXd dz(B);
        for (Index i = 0; i < B; ++i)
            dz[i] = g_sigma[i] * logistic(t.sigma_pre[i]);

        weights_mut(params, grad, params.sigma_head()).noalias() += dz * t.act.back().transpose();
        bias_mut(params, grad, params.sigma_head())[0] += dz.sum();

        Eigen::MatrixXd dh = params.weights(params.sigma_head()).transpose() * dz;
        if (g_feature)
            dh += *g_feature;

        for (std::size_t k = a.att_layers; k-- > 0;)
        {
            Eigen::MatrixXd dpre = (t.pre[k].array() > 0.0).select(dh, 0.0);
            auto dW = weights_mut(params, grad, params.att_layer(k));
            bias_mut(params, grad, params.att_layer(k)).noalias() += dpre.rowwise().sum();
            const auto W = params.weights(params.att_layer(k));
            if (k == 0)
                dW.noalias() += dpre * t.input.transpose();
            else if (k == a.att_skip)
            {
                dW.leftCols(Index(a.att_width)).noalias() += dpre * t.act[k - 1].transpose();
                dW.rightCols(Index(a.att_input())).noalias() += dpre * t.input.transpose();
                dh.noalias() = W.leftCols(Index(a.att_width)).transpose() * dpre;
            }
            else
            {
                dW.noalias() += dpre * t.act[k - 1].transpose();
                dh.noalias() = W.transpose() * dpre;
            }
        }
    }

    // ---------------------------------------------------------------- radiance branch

    Eigen::MatrixXd radiance_shared_pre(const field_params &params, const Eigen::MatrixXd &enc_voxel, const Eigen::MatrixXd &feature)
    {
        const auto &a = params.arch;
        const auto W = params.weights(params.rad_layer(0));
        const Index P = Index(a.pos_features());
        Eigen::MatrixXd A = W.leftCols(P) * enc_voxel;
        A.noalias() += W.rightCols(Index(a.att_width)) * feature;
        return A;
    }

    radiance_tape radiance_forward(const field_params &params, const Eigen::MatrixXd &shared_pre,
                                   const Eigen::MatrixXd &enc_grid, const Eigen::MatrixXd &basis)
    {
        const auto &a = params.arch;
        const Index P = Index(a.pos_features()), B = shared_pre.cols(), K = Index(a.sh_count());
        radiance_tape t;
        t.pre.resize(a.rad_layers);
        t.act.resize(a.rad_layers);

        const auto W0 = params.weights(params.rad_layer(0));
        if (enc_grid.cols() == 1)
        {
            Eigen::VectorXd c = W0.middleCols(P, P) * enc_grid.col(0) + params.bias(params.rad_layer(0));
            t.pre[0] = shared_pre.colwise() + c;
        }
        else
        {
            t.pre[0] = shared_pre;
            t.pre[0].noalias() += W0.middleCols(P, P) * enc_grid;
            t.pre[0].colwise() += params.bias(params.rad_layer(0));
        }
        relu_inplace(t.pre[0], t.act[0]);

        for (std::size_t k = 1; k < a.rad_layers; ++k)
        {
            t.pre[k] = params.weights(params.rad_layer(k)) * t.act[k - 1];
            t.pre[k].colwise() += params.bias(params.rad_layer(k));
            relu_inplace(t.pre[k], t.act[k]);
        }
        t.out = params.weights(params.out_head()) * t.act.back();
        t.out.colwise() += params.bias(params.out_head());

        t.basis = basis;
        t.amplitude = (t.out.topRows(K).array() * basis.array()).colwise().sum().transpose();
        t.re.resize(B);
        t.im.resize(B);
        for (Index i = 0; i < B; ++i)
        {
            const double ph = t.out(K, i);
            t.re[i] = t.amplitude[i] * std::cos(ph);
            t.im[i] = t.amplitude[i] * std::sin(ph);
        }
        return t;
    }

    void radiance_backward(const field_params &params, const radiance_tape &t, const Eigen::MatrixXd &enc_grid,
                           const Eigen::VectorXd &g_re, const Eigen::VectorXd &g_im,
                           Eigen::VectorXd &grad, Eigen::MatrixXd &d_shared)
    {
        const auto &a = params.arch;
        const Index P = Index(a.pos_features()), B = t.out.cols(), K = Index(a.sh_count());

        Eigen::MatrixXd dout(K + 1, B);
        for (Index i = 0; i < B; ++i)
        {
            const double ph = t.out(K, i), c = std::cos(ph), s = std::sin(ph);
            const double ga = g_re[i] * c + g_im[i] * s;
            dout.col(i).head(K) = ga * t.basis.col(i);
            dout(K, i) = t.amplitude[i] * (g_im[i] * c - g_re[i] * s);
        }

        weights_mut(params, grad, params.out_head()).noalias() += dout * t.act.back().transpose();
        bias_mut(params, grad, params.out_head()).noalias() += dout.rowwise().sum();
        Eigen::MatrixXd dh = params.weights(params.out_head()).transpose() * dout;

        for (std::size_t k = a.rad_layers; k-- > 0;)
        {
            Eigen::MatrixXd dpre = (t.pre[k].array() > 0.0).select(dh, 0.0);
            bias_mut(params, grad, params.rad_layer(k)).noalias() += dpre.rowwise().sum();
            auto dW = weights_mut(params, grad, params.rad_layer(k));
            if (k > 0)
            {
                dW.noalias() += dpre * t.act[k - 1].transpose();
                dh.noalias() = params.weights(params.rad_layer(k)).transpose() * dpre;
            }
            else
            {
                if (enc_grid.cols() == 1)
                    dW.middleCols(P, P).noalias() += dpre.rowwise().sum() * enc_grid.col(0).transpose();
                else
                    dW.middleCols(P, P).noalias() += dpre * enc_grid.transpose();
                if (d_shared.size() == 0)
                    d_shared = dpre;
                else
                    d_shared += dpre;
            }
        }
    }

    Eigen::MatrixXd radiance_shared_backward(const field_params &params, const Eigen::MatrixXd &enc_voxel,
                                             const Eigen::MatrixXd &feature, const Eigen::MatrixXd &d_shared,
                                             Eigen::VectorXd &grad)
    {
        const auto &a = params.arch;
        const Index P = Index(a.pos_features()), F = Index(a.att_width);
        auto dW = weights_mut(params, grad, params.rad_layer(0));
        dW.leftCols(P).noalias() += d_shared * enc_voxel.transpose();
        dW.rightCols(F).noalias() += d_shared * feature.transpose();
        return params.weights(params.rad_layer(0)).rightCols(F).transpose() * d_shared;
    }

    // ---------------------------------------------------------------- full network

    std::vector<field_output> forward(const field_params &params, const field_batch &batch)
    {
        check_batch(params, batch);
        const auto &a = params.arch;
        const Index K = Index(a.sh_count());

        auto att = attenuation_forward(params, attenuation_input(params, batch));
        const Eigen::MatrixXd enc_voxel = att.input.topRows(Index(a.pos_features()));
        const Eigen::MatrixXd enc_grid = positional_encode(Eigen::MatrixXd(batch.p_grid), a.position);
        auto rad = radiance_forward(params, radiance_shared_pre(params, enc_voxel, att.feature()), enc_grid,
                                    sh_basis_batch(batch.direction, a.sh_degree));

        std::vector<field_output> out(batch.size());
        for (std::size_t i = 0; i < out.size(); ++i)
        {
            const Index c = Index(i);
            out[i].sigma = att.sigma[c];
            out[i].sh_coeffs = rad.out.col(c).head(K);
            out[i].phase = rad.out(K, c);
            out[i].signal = {rad.re[c], rad.im[c]};
        }
        return out;
    }

    field_output forward(const field_params &params, const vec3 &p_voxel, double density_feat,
                         const vec3 &p_grid, const vec3 &direction)
    {
        field_batch b;
        b.p_voxel = p_voxel;
        b.density_feat = Eigen::VectorXd::Constant(1, density_feat);
        b.p_grid = p_grid;
        b.direction = direction;
        return forward(params, b).front();
    }

    Eigen::VectorXd backward(const field_params &params, const field_batch &batch, const field_upstream &up)
    {
        check_batch(params, batch);
        const auto n = Index(batch.size());
        if (up.g_sigma.size() != n || up.g_re.size() != n || up.g_im.size() != n)
            throw invalid_argument("field backward: upstream gradient length must match the batch");
        const auto &a = params.arch;

        auto att = attenuation_forward(params, attenuation_input(params, batch));
        const Eigen::MatrixXd enc_voxel = att.input.topRows(Index(a.pos_features()));
        const Eigen::MatrixXd enc_grid = positional_encode(Eigen::MatrixXd(batch.p_grid), a.position);
        auto rad = radiance_forward(params, radiance_shared_pre(params, enc_voxel, att.feature()), enc_grid,
                                    sh_basis_batch(batch.direction, a.sh_degree));

        Eigen::VectorXd grad = Eigen::VectorXd::Zero(Index(params.size()));
        Eigen::MatrixXd d_shared;
        radiance_backward(params, rad, enc_grid, up.g_re, up.g_im, grad, d_shared);
        Eigen::MatrixXd d_feature = radiance_shared_backward(params, enc_voxel, att.feature(), d_shared, grad);
        attenuation_backward(params, att, up.g_sigma, &d_feature, grad);
        return grad;
    }

    // ---------------------------------------------------------------- checkpoints

    void store_field(container &c, const field_params &params)
    {
        const auto &a = params.arch;
        c.meta["field.pos_order"] = std::to_string(a.position.order);
        c.meta["field.pos_base"] = format_double(a.position.base);
        c.meta["field.density_order"] = std::to_string(a.density.order);
        c.meta["field.density_base"] = format_double(a.density.base);
        c.meta["field.att_width"] = std::to_string(a.att_width);
        c.meta["field.att_layers"] = std::to_string(a.att_layers);
        c.meta["field.att_skip"] = std::to_string(a.att_skip);
        c.meta["field.rad_width"] = std::to_string(a.rad_width);
        c.meta["field.rad_layers"] = std::to_string(a.rad_layers);
        c.meta["field.sh_degree"] = std::to_string(a.sh_degree);
        c.meta["field.out_init_scale"] = format_double(a.out_init_scale);
        c.meta["field.seed"] = std::to_string(a.seed);
        c.add("params", {params.size()}, params.flatten());
    }

    field_params restore_field(const container &c, const field_architecture *expected)
    {
        field_architecture a;
        a.position.order = std::size_t(c.meta_int("field.pos_order"));
        a.position.base = c.meta_double("field.pos_base");
        a.density.order = std::size_t(c.meta_int("field.density_order"));
        a.density.base = c.meta_double("field.density_base");
        a.att_width = std::size_t(c.meta_int("field.att_width"));
        a.att_layers = std::size_t(c.meta_int("field.att_layers"));
        a.att_skip = std::size_t(c.meta_int("field.att_skip"));
        a.rad_width = std::size_t(c.meta_int("field.rad_width"));
        a.rad_layers = std::size_t(c.meta_int("field.rad_layers"));
        a.sh_degree = int(c.meta_int("field.sh_degree"));
        a.out_init_scale = c.meta_double("field.out_init_scale");
        a.seed = std::uint64_t(c.meta_int("field.seed"));
        if (expected && !(*expected == a))
            throw io_error("checkpoint architecture does not match the requested architecture");

        field_params p = field_params::zeros(a);
        const auto &arr = c.get("params", dtype::f64);
        if (arr.f64.size() != p.size())
            throw io_error("checkpoint parameter count does not match its architecture");
        p.unflatten(arr.f64);
        return p;
    }

    void save_field(const std::string &path, const field_params &params)
    {
        container c;
        c.meta["kind"] = "field_checkpoint";
        store_field(c, params);
        c.save(path);
    }

    field_params load_field(const std::string &path, const field_architecture *expected)
    {
        auto c = container::load(path);
        return restore_field(c, expected);
    }
}
