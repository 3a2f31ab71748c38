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

#ifndef mmlscm_array_model_H
#define mmlscm_array_model_H

#include <Eigen/Core>

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace mmlscm
{
    using cplx = std::complex<double>;
    using vec3 = Eigen::Vector3d;

    // Uniform planar array at the base station. Element spacings are in wavelengths.
    struct array_config
    {
        std::size_t n_x = 4;
        std::size_t n_y = 4;
        double d_x = 0.5;
        double d_y = 0.5;
        double wavelength = 0.3276; // 915 MHz
        double tx_power = 1.0;

        std::size_t n_t() const { return n_x * n_y; }
        void validate() const;
    };

    // Front-hemisphere angle grid. Index n = i_tilt * n_azimuth + i_azimuth,
    // with theta_i = i * tilt_step and phi_j = j * azimuth_step (cell-left convention).
    struct angular_grid
    {
        std::size_t n_tilt = 0;
        std::size_t n_azimuth = 0;
        double tilt_step_deg = 0.0;
        double azimuth_step_deg = 0.0;
        std::vector<double> tilt;    // [N] radians
        std::vector<double> azimuth; // [N] radians
        std::vector<vec3> directions;

        std::size_t size() const { return n_tilt * n_azimuth; }
        std::size_t index(std::size_t i_tilt, std::size_t i_azimuth) const { return i_tilt * n_azimuth + i_azimuth; }

        // Nearest cell to a unit direction (azimuth wraps); returns false if the direction
        // points out of the front hemisphere (cos(theta) <= 0)
        bool nearest_cell(const vec3 &direction, std::size_t &n) const;
    };

    angular_grid build_angular_grid(std::size_t n_tilt = 18, std::size_t n_azimuth = 90);

    // omega = [cos(phi) sin(theta), sin(phi) sin(theta), cos(theta)]
    vec3 direction_from_angles(double theta, double phi);

    using cvec = Eigen::VectorXcd;

    // s(theta, phi) = s_x(theta, phi) kron s_y(theta)
    cvec steering_vector(const array_config &cfg, double theta, double phi);

    struct codebook
    {
        enum class kind_t
        {
            dft_subset,
            custom
        };
        Eigen::MatrixXcd beams; // [N_T, M], one beam per column
        kind_t kind = kind_t::custom;

        std::size_t n_beams() const { return static_cast<std::size_t>(beams.cols()); }
    };

    // Columns of the 2D DFT matrix enumerated row-major in (k_x, k_y), every (N_T / M)-th column from 0
    codebook build_dft_codebook(const array_config &cfg, std::size_t n_beams = 8);

    struct grid_shift
    {
        long long tilt_steps = 0;
        long long azimuth_steps = 0;
        bool operator==(const grid_shift &) const = default;
    };

    struct measurement_matrix
    {
        Eigen::MatrixXd phi; // [M, N], dense, entries >= 0
        grid_shift rotation;

        std::size_t rows() const { return static_cast<std::size_t>(phi.rows()); }
        std::size_t cols() const { return static_cast<std::size_t>(phi.cols()); }
    };

    // phi[m, n] = |w_m^H s(theta_n, phi_n)|^2
    measurement_matrix build_measurement_matrix(const array_config &cfg, const angular_grid &grid, const codebook &cb);

    // Column n of the result is the column of angle (theta_n + d_tilt, phi_n + d_azimuth), wrapping per axis.
    // Both shifts must be integer multiples of the grid steps.
    measurement_matrix rotate_measurement_matrix(const measurement_matrix &phi, const angular_grid &grid,
                                                 double d_tilt_deg, double d_azimuth_deg);

    // Integer-step variant of the above
    measurement_matrix shift_measurement_matrix(const measurement_matrix &phi, const angular_grid &grid, grid_shift shift);

    enum class matrix_tag
    {
        base,
        rotated
    };

    const char *to_string(matrix_tag tag);
    matrix_tag matrix_tag_from_string(const std::string &s);

    struct rsrp_record
    {
        std::size_t grid_id = 0;
        Eigen::VectorXd y;
        matrix_tag tag = matrix_tag::base;
    };

    // y = phi * x; throws on negative APS entries or size mismatch
    rsrp_record expected_rsrp(const measurement_matrix &phi, const Eigen::VectorXd &x,
                              std::size_t grid_id = 0, matrix_tag tag = matrix_tag::base);

    // MMLC serialization. Records written together must share length M.
    void save_measurement_matrix(const std::string &path, const measurement_matrix &phi);
    measurement_matrix load_measurement_matrix(const std::string &path);
    void save_rsrp_records(const std::string &path, const std::vector<rsrp_record> &records);
    std::vector<rsrp_record> load_rsrp_records(const std::string &path);

    void write_csv(std::ostream &os, const measurement_matrix &phi);
    void write_csv(std::ostream &os, const std::vector<rsrp_record> &records);
}

#endif
