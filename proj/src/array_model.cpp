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

#include "mmlscm/array_model.hpp"
#include "mmlscm/container.hpp"
#include "mmlscm/error.hpp"
#include "mmlscm/util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace mmlscm
{
    namespace
    {
        constexpr double deg = std::numbers::pi / 180.0;

        long long wrap(long long i, long long n)
        {
            long long r = i % n;
            return r < 0 ? r + n : r;
        }

        long long steps_of(double shift_deg, double step_deg, const char *axis)
        {
            double q = shift_deg / step_deg;
            double r = std::round(q);
            if (!std::isfinite(q) || std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(q)))
                throw invalid_argument(std::string("rotation: ") + axis + " shift is not a multiple of the grid step");
            return static_cast<long long>(r);
        }
    }

    void array_config::validate() const
    {
        if (n_x < 1 || n_y < 1)
            throw invalid_argument("array_config: antenna counts must be >= 1");
        if (!(d_x > 0.0) || !(d_y > 0.0) || !(wavelength > 0.0))
            throw invalid_argument("array_config: spacings and wavelength must be > 0");
    }

    vec3 direction_from_angles(double theta, double phi)
    {
        const double st = std::sin(theta);
        return {std::cos(phi) * st, std::sin(phi) * st, std::cos(theta)};
    }

    angular_grid build_angular_grid(std::size_t n_tilt, std::size_t n_azimuth)
    {
        if (n_tilt < 1 || n_azimuth < 1)
            throw invalid_argument("build_angular_grid: counts must be >= 1");

        angular_grid g;
        g.n_tilt = n_tilt;
        g.n_azimuth = n_azimuth;
        g.tilt_step_deg = 90.0 / double(n_tilt);
        g.azimuth_step_deg = 360.0 / double(n_azimuth);

        const std::size_t n = n_tilt * n_azimuth;
        g.tilt.reserve(n);
        g.azimuth.reserve(n);
        g.directions.reserve(n);
        for (std::size_t i = 0; i < n_tilt; ++i)
            for (std::size_t j = 0; j < n_azimuth; ++j)
            {
                const double theta = double(i) * g.tilt_step_deg * deg;
                const double phi = double(j) * g.azimuth_step_deg * deg;
                g.tilt.push_back(theta);
                g.azimuth.push_back(phi);
                g.directions.push_back(direction_from_angles(theta, phi));
            }
        return g;
    }

    bool angular_grid::nearest_cell(const vec3 &direction, std::size_t &n) const
    {
        const double norm = direction.norm();
        if (!(norm > 0.0))
            return false;
        const vec3 u = direction / norm;
        if (u.z() <= 0.0)
            return false;

        const double theta = std::acos(std::clamp(u.z(), -1.0, 1.0));
        double phi = std::atan2(u.y(), u.x());
        if (phi < 0.0)
            phi += 2.0 * std::numbers::pi;

        long long i = std::llround(theta / (tilt_step_deg * deg));
        long long j = std::llround(phi / (azimuth_step_deg * deg));
        i = std::clamp<long long>(i, 0, (long long)n_tilt - 1);
        j = wrap(j, (long long)n_azimuth);
        n = index(std::size_t(i), std::size_t(j));
        return true;
    }

    cvec steering_vector(const array_config &cfg, double theta, double phi)
    {
        const double two_pi = 2.0 * std::numbers::pi;
        const double ux = cfg.d_x * std::cos(theta) * std::sin(phi);
        const double uy = cfg.d_y * std::sin(theta);

        cvec s(cfg.n_t());
        for (std::size_t i = 0; i < cfg.n_x; ++i)
        {
            const cplx sx = std::polar(1.0, -two_pi * double(i) * ux);
            for (std::size_t k = 0; k < cfg.n_y; ++k)
                s[Eigen::Index(i * cfg.n_y + k)] = sx * std::polar(1.0, -two_pi * double(k) * uy);
        }
        return s;
    }

    codebook build_dft_codebook(const array_config &cfg, std::size_t n_beams)
    {
        cfg.validate();
        const std::size_t nt = cfg.n_t();
        if (n_beams < 1 || n_beams > nt)
            throw invalid_argument("build_dft_codebook: need 1 <= M <= N_T");

        const std::size_t stride = nt / n_beams;
        const double scale = 1.0 / std::sqrt(double(nt));
        const double two_pi = 2.0 * std::numbers::pi;

        codebook cb;
        cb.kind = codebook::kind_t::dft_subset;
        cb.beams.resize(Eigen::Index(nt), Eigen::Index(n_beams));
        for (std::size_t m = 0; m < n_beams; ++m)
        {
            const std::size_t col = m * stride;
            const std::size_t kx = col / cfg.n_y, ky = col % cfg.n_y;
            for (std::size_t i = 0; i < cfg.n_x; ++i)
                for (std::size_t k = 0; k < cfg.n_y; ++k)
                {
                    const double ph = two_pi * (double(i * kx) / double(cfg.n_x) + double(k * ky) / double(cfg.n_y));
                    cb.beams(Eigen::Index(i * cfg.n_y + k), Eigen::Index(m)) = std::polar(scale, -ph);
                }
        }
        return cb;
    }

    measurement_matrix build_measurement_matrix(const array_config &cfg, const angular_grid &grid, const codebook &cb)
    {
        cfg.validate();
        if (std::size_t(cb.beams.rows()) != cfg.n_t())
            throw invalid_argument("build_measurement_matrix: codebook rows must equal N_T");

        measurement_matrix out;
        out.phi.resize(cb.beams.cols(), Eigen::Index(grid.size()));
        for (std::size_t n = 0; n < grid.size(); ++n)
        {
            const cvec s = steering_vector(cfg, grid.tilt[n], grid.azimuth[n]);
            for (Eigen::Index m = 0; m < cb.beams.cols(); ++m)
                out.phi(m, Eigen::Index(n)) = std::norm(cb.beams.col(m).dot(s)); // dot() conjugates the left operand
        }
        return out;
    }

    measurement_matrix shift_measurement_matrix(const measurement_matrix &phi, const angular_grid &grid, grid_shift shift)
    {
        if (phi.cols() != grid.size())
            throw invalid_argument("rotate_measurement_matrix: column count must equal grid size");

        measurement_matrix out;
        out.phi.resize(phi.phi.rows(), phi.phi.cols());
        const auto nt = (long long)grid.n_tilt, na = (long long)grid.n_azimuth;
        for (long long i = 0; i < nt; ++i)
            for (long long j = 0; j < na; ++j)
            {
                const auto src = grid.index(std::size_t(wrap(i + shift.tilt_steps, nt)), std::size_t(wrap(j + shift.azimuth_steps, na)));
                out.phi.col(Eigen::Index(grid.index(std::size_t(i), std::size_t(j)))) = phi.phi.col(Eigen::Index(src));
            }
        out.rotation = {phi.rotation.tilt_steps + shift.tilt_steps, phi.rotation.azimuth_steps + shift.azimuth_steps};
        return out;
    }

    measurement_matrix rotate_measurement_matrix(const measurement_matrix &phi, const angular_grid &grid,
                                                 double d_tilt_deg, double d_azimuth_deg)
    {
        grid_shift s{steps_of(d_tilt_deg, grid.tilt_step_deg, "tilt"), steps_of(d_azimuth_deg, grid.azimuth_step_deg, "azimuth")};
        return shift_measurement_matrix(phi, grid, s);
    }

    const char *to_string(matrix_tag tag)
    {
        return tag == matrix_tag::base ? "base" : "rotated";
    }

    matrix_tag matrix_tag_from_string(const std::string &s)
    {
        if (s == "base")
            return matrix_tag::base;
        if (s == "rotated")
            return matrix_tag::rotated;
        throw invalid_argument("unknown matrix tag '" + s + "'");
    }

    rsrp_record expected_rsrp(const measurement_matrix &phi, const Eigen::VectorXd &x, std::size_t grid_id, matrix_tag tag)
    {
        if (std::size_t(x.size()) != phi.cols())
            throw invalid_argument("expected_rsrp: APS length must equal matrix columns");
        if ((x.array() < 0.0).any())
            throw invalid_argument("expected_rsrp: APS entries must be nonnegative");
        return {grid_id, phi.phi * x, tag};
    }

    void save_measurement_matrix(const std::string &path, const measurement_matrix &phi)
    {
        container c;
        c.meta["kind"] = "measurement_matrix";
        c.meta["shift_tilt_steps"] = std::to_string(phi.rotation.tilt_steps);
        c.meta["shift_azimuth_steps"] = std::to_string(phi.rotation.azimuth_steps);
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = phi.phi;
        c.add("phi", {std::uint64_t(rm.rows()), std::uint64_t(rm.cols())}, std::span<const double>(rm.data(), std::size_t(rm.size())));
        c.save(path);
    }

    measurement_matrix load_measurement_matrix(const std::string &path)
    {
        auto c = container::load(path);
        if (c.meta_at("kind") != "measurement_matrix")
            throw io_error("'" + path + "' is not a measurement matrix");
        const auto &a = c.get("phi", dtype::f64);
        if (a.dims.size() != 2)
            throw io_error("measurement matrix must be rank 2");
        measurement_matrix m;
        m.phi = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            a.f64.data(), Eigen::Index(a.dims[0]), Eigen::Index(a.dims[1]));
        m.rotation = {c.meta_int("shift_tilt_steps"), c.meta_int("shift_azimuth_steps")};
        return m;
    }

    void save_rsrp_records(const std::string &path, const std::vector<rsrp_record> &records)
    {
        const std::size_t m = records.empty() ? 0 : std::size_t(records.front().y.size());
        std::vector<double> y;
        std::vector<std::uint32_t> ids, tags;
        y.reserve(records.size() * m);
        for (const auto &r : records)
        {
            if (std::size_t(r.y.size()) != m)
                throw invalid_argument("save_rsrp_records: records differ in length");
            y.insert(y.end(), r.y.data(), r.y.data() + r.y.size());
            ids.push_back(std::uint32_t(r.grid_id));
            tags.push_back(r.tag == matrix_tag::base ? 0u : 1u);
        }
        container c;
        c.meta["kind"] = "rsrp_records";
        c.add("y", {records.size(), m}, std::span<const double>(y));
        c.add("grid_id", {records.size()}, std::span<const std::uint32_t>(ids));
        c.add("matrix_tag", {records.size()}, std::span<const std::uint32_t>(tags));
        c.save(path);
    }

    std::vector<rsrp_record> load_rsrp_records(const std::string &path)
    {
        auto c = container::load(path);
        if (c.meta_at("kind") != "rsrp_records")
            throw io_error("'" + path + "' is not an RSRP record set");
        const auto &y = c.get("y", dtype::f64);
        const auto &ids = c.get("grid_id", dtype::u32);
        const auto &tags = c.get("matrix_tag", dtype::u32);
        if (y.dims.size() != 2 || ids.u32.size() != y.dims[0] || tags.u32.size() != y.dims[0])
            throw io_error("RSRP record arrays are inconsistent");
        const auto m = Eigen::Index(y.dims[1]);
        std::vector<rsrp_record> out(y.dims[0]);
        for (std::size_t i = 0; i < out.size(); ++i)
        {
            out[i].grid_id = ids.u32[i];
            out[i].tag = tags.u32[i] ? matrix_tag::rotated : matrix_tag::base;
            out[i].y = Eigen::Map<const Eigen::VectorXd>(y.f64.data() + i * std::size_t(m), m);
        }
        return out;
    }

    void write_csv(std::ostream &os, const measurement_matrix &phi)
    {
        for (Eigen::Index m = 0; m < phi.phi.rows(); ++m)
        {
            for (Eigen::Index n = 0; n < phi.phi.cols(); ++n)
                os << (n ? "," : "") << format_double(phi.phi(m, n));
            os << '\n';
        }
    }

    void write_csv(std::ostream &os, const std::vector<rsrp_record> &records)
    {
        os << "grid_id,matrix_tag";
        if (!records.empty())
            for (Eigen::Index m = 0; m < records.front().y.size(); ++m)
                os << ",y" << m;
        os << '\n';
        for (const auto &r : records)
        {
            os << r.grid_id << ',' << to_string(r.tag);
            for (Eigen::Index m = 0; m < r.y.size(); ++m)
                os << ',' << format_double(r.y[m]);
            os << '\n';
        }
    }
}
