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
#include "mmlscm/error.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>

using namespace mmlscm;

namespace
{
    constexpr double deg = std::numbers::pi / 180.0;

    // Independent evaluation of the steering vector entry for antenna (i, k)
    cplx steering_entry(const array_config &c, std::size_t i, std::size_t k, double theta, double phi)
    {
        const double kx = 2.0 * std::numbers::pi * double(i) * c.d_x * std::cos(theta) * std::sin(phi);
        const double ky = 2.0 * std::numbers::pi * double(k) * c.d_y * std::sin(theta);
        return std::exp(cplx(0.0, -(kx + ky)));
    }

    measurement_matrix default_phi(const angular_grid &g)
    {
        array_config c;
        return build_measurement_matrix(c, g, build_dft_codebook(c, 8));
    }
}

TEST_CASE("angular grid: default dimensions and steps")
{
    const auto g = build_angular_grid();
    CHECK(g.size() == 1620);
    CHECK(g.tilt_step_deg == doctest::Approx(5.0));
    CHECK(g.azimuth_step_deg == doctest::Approx(4.0));
    REQUIRE(g.directions.size() == 1620);

    // row-major tilt then azimuth
    CHECK(g.tilt[g.index(3, 7)] == doctest::Approx(15.0 * deg));
    CHECK(g.azimuth[g.index(3, 7)] == doctest::Approx(28.0 * deg));
    CHECK(g.index(3, 7) == 3 * 90 + 7);

    for (const auto &w : g.directions)
        CHECK(std::abs(w.norm() - 1.0) < 1e-12);
}

TEST_CASE("angular grid: axis directions")
{
    const auto z = direction_from_angles(0.0, 0.0);
    CHECK((z - vec3(0, 0, 1)).norm() < 1e-15);
    const auto y = direction_from_angles(90.0 * deg, 90.0 * deg);
    CHECK((y - vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("angular grid: zero counts rejected")
{
    CHECK_THROWS_AS(build_angular_grid(0, 90), mmlscm::invalid_argument);
    CHECK_THROWS_AS(build_angular_grid(18, 0), mmlscm::invalid_argument);
}

TEST_CASE("angular grid: nearest cell")
{
    const auto g = build_angular_grid();
    std::size_t n = 0;
    for (std::size_t i : {0u, 5u, 17u})
        for (std::size_t j : {0u, 1u, 45u, 89u})
        {
            REQUIRE(g.nearest_cell(g.directions[g.index(i, j)], n));
            if (i == 0)
                CHECK(n / 90 == 0); // azimuth is degenerate at the pole
            else
                CHECK(n == g.index(i, j));
        }
    CHECK_FALSE(g.nearest_cell(vec3(0, 0, -1), n));
    CHECK_FALSE(g.nearest_cell(vec3(1, 0, 0), n));
}

TEST_CASE("steering vector: boresight is all ones")
{
    array_config c;
    const auto s = steering_vector(c, 0.0, 0.0);
    REQUIRE(s.size() == 16);
    for (Eigen::Index i = 0; i < s.size(); ++i)
        CHECK(std::abs(s[i] - cplx(1.0, 0.0)) < 1e-15);
}

TEST_CASE("steering vector: two-element endfire")
{
    array_config c;
    c.n_x = 2;
    c.n_y = 1;
    const auto s = steering_vector(c, 0.0, 90.0 * deg);
    REQUIRE(s.size() == 2);
    CHECK(std::abs(s[0] - cplx(1.0, 0.0)) < 1e-12);
    CHECK(std::abs(s[1] - cplx(-1.0, 0.0)) < 1e-12);
}

TEST_CASE("steering vector: Kronecker index and unit modulus")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
    std::uniform_int_distribution<int> count(1, 6);
    for (int trial = 0; trial < 200; ++trial)
    {
        array_config c;
        c.n_x = std::size_t(count(rng));
        c.n_y = std::size_t(count(rng));
        c.d_x = 0.3 + 0.1 * (trial % 5);
        const double th = ang(rng), ph = ang(rng);
        const auto s = steering_vector(c, th, ph);
        for (std::size_t i = 0; i < c.n_x; ++i)
            for (std::size_t k = 0; k < c.n_y; ++k)
            {
                const auto v = s[Eigen::Index(i * c.n_y + k)];
                CHECK(std::abs(v - steering_entry(c, i, k, th, ph)) < 1e-12);
                CHECK(std::abs(std::abs(v) - 1.0) < 1e-12);
            }
    }
}

TEST_CASE("codebook: DFT subset columns")
{
    array_config c;
    const auto cb = build_dft_codebook(c, 8);
    CHECK(cb.kind == codebook::kind_t::dft_subset);
    REQUIRE(cb.n_beams() == 8);
    for (Eigen::Index m = 0; m < 8; ++m)
    {
        const std::size_t col = std::size_t(m) * 2, kx = col / 4, ky = col % 4;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t k = 0; k < 4; ++k)
            {
                const auto w = cb.beams(Eigen::Index(i * 4 + k), m);
                CHECK(std::abs(std::abs(w) - 0.25) < 1e-15);
                const auto ref = std::exp(cplx(0.0, -2.0 * std::numbers::pi * double(i * kx + k * ky) / 4.0)) * 0.25;
                CHECK(std::abs(w - ref) < 1e-14);
            }
    }
    CHECK_THROWS_AS(build_dft_codebook(c, 17), mmlscm::invalid_argument);
    CHECK_THROWS_AS(build_dft_codebook(c, 0), mmlscm::invalid_argument);
}

TEST_CASE("measurement matrix: matched beam gives N_T")
{
    array_config c;
    const auto g = build_angular_grid();
    const std::size_t n = g.index(7, 31);
    codebook cb;
    cb.beams = steering_vector(c, g.tilt[n], g.azimuth[n]) / std::sqrt(16.0);
    const auto phi = build_measurement_matrix(c, g, cb);
    CHECK(phi.rows() == 1);
    CHECK(phi.cols() == 1620);
    CHECK(phi.phi(0, Eigen::Index(n)) == doctest::Approx(16.0).epsilon(1e-12));
    CHECK(phi.phi.maxCoeff() <= 16.0 + 1e-9);
}

TEST_CASE("measurement matrix: zero beam and global phase")
{
    array_config c;
    const auto g = build_angular_grid(6, 12);
    auto cb = build_dft_codebook(c, 4);
    cb.beams.col(2).setZero();
    const auto phi = build_measurement_matrix(c, g, cb);
    CHECK(phi.phi.row(2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(phi.phi.minCoeff() >= 0.0);

    auto turned = cb;
    turned.beams.col(1) *= std::polar(1.0, 1.234);
    const auto phi2 = build_measurement_matrix(c, g, turned);
    CHECK((phi2.phi - phi.phi).cwiseAbs().maxCoeff() < 1e-12);

    codebook bad;
    bad.beams = Eigen::MatrixXcd::Ones(9, 2);
    CHECK_THROWS_AS(build_measurement_matrix(c, g, bad), mmlscm::invalid_argument);
}

TEST_CASE("measurement matrix: nonnegative for random codebooks")
{
    array_config c;
    const auto g = build_angular_grid(9, 30);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial)
    {
        codebook cb;
        cb.beams.resize(16, 3);
        for (Eigen::Index i = 0; i < cb.beams.size(); ++i)
            cb.beams.data()[i] = cplx(nd(rng), nd(rng));
        CHECK(build_measurement_matrix(c, g, cb).phi.minCoeff() >= 0.0);
    }
}

TEST_CASE("rotation: one step per axis on the default grid")
{
    const auto g = build_angular_grid();
    const auto phi = default_phi(g);
    const auto r = rotate_measurement_matrix(phi, g, 5.0, 4.0);
    CHECK(r.rotation == grid_shift{1, 1});
    for (std::size_t i = 0; i < 18; ++i)
        for (std::size_t j = 0; j < 90; ++j)
            CHECK(r.phi.col(Eigen::Index(g.index(i, j))) == phi.phi.col(Eigen::Index(g.index((i + 1) % 18, (j + 1) % 90))));
}

TEST_CASE("rotation: identity, inverse and cyclic")
{
    const auto g = build_angular_grid();
    const auto phi = default_phi(g);
    CHECK(rotate_measurement_matrix(phi, g, 0.0, 0.0).phi == phi.phi);

    const auto back = rotate_measurement_matrix(rotate_measurement_matrix(phi, g, 5.0, 4.0), g, -5.0, -4.0);
    CHECK(back.phi == phi.phi);
    CHECK(back.rotation == grid_shift{0, 0});

    auto m = phi;
    for (int k = 0; k < 90; ++k)
        m = rotate_measurement_matrix(m, g, 0.0, 4.0);
    CHECK(m.phi == phi.phi);

    CHECK_THROWS_AS(rotate_measurement_matrix(phi, g, 2.5, 0.0), mmlscm::invalid_argument);
    CHECK_THROWS_AS(rotate_measurement_matrix(phi, g, 0.0, 3.0), mmlscm::invalid_argument);
}

TEST_CASE("expected rsrp: linearity and errors")
{
    const auto g = build_angular_grid();
    const auto phi = default_phi(g);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(1620);
    CHECK(expected_rsrp(phi, x).y.isZero(0.0));

    x[100] = 1.0;
    CHECK(expected_rsrp(phi, x).y == phi.phi.col(100));

    x[100] = 0.7;
    x[300] = 2.5;
    const auto y = expected_rsrp(phi, x, 4, matrix_tag::rotated);
    CHECK(y.grid_id == 4);
    CHECK(y.tag == matrix_tag::rotated);
    CHECK((y.y - (0.7 * phi.phi.col(100) + 2.5 * phi.phi.col(300))).norm() < 1e-12);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial)
    {
        Eigen::VectorXd a(1620), b(1620);
        for (Eigen::Index i = 0; i < 1620; ++i)
        {
            a[i] = u(rng);
            b[i] = u(rng);
        }
        const double al = u(rng), be = u(rng);
        const Eigen::VectorXd lhs = expected_rsrp(phi, al * a + be * b).y;
        const Eigen::VectorXd rhs = al * expected_rsrp(phi, a).y + be * expected_rsrp(phi, b).y;
        CHECK((lhs - rhs).norm() <= 1e-10 * rhs.norm());
    }

    x[5] = -1e-3;
    CHECK_THROWS_AS(expected_rsrp(phi, x), mmlscm::invalid_argument);
    CHECK_THROWS_AS(expected_rsrp(phi, Eigen::VectorXd::Zero(10)), mmlscm::invalid_argument);
}

TEST_CASE("serialization: matrices and records round trip")
{
    const auto g = build_angular_grid();
    const auto phi = rotate_measurement_matrix(default_phi(g), g, 5.0, 4.0);
    const auto dir = std::filesystem::temp_directory_path() / "mmlscm_test_array";
    std::filesystem::create_directories(dir);

    save_measurement_matrix((dir / "phi.bin").string(), phi);
    const auto back = load_measurement_matrix((dir / "phi.bin").string());
    CHECK(back.phi == phi.phi);
    CHECK(back.rotation == phi.rotation);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(1620);
    x[10] = 1.5;
    std::vector<rsrp_record> recs{expected_rsrp(phi, x, 3, matrix_tag::rotated), expected_rsrp(phi, 2 * x, 9)};
    save_rsrp_records((dir / "y.bin").string(), recs);
    const auto rb = load_rsrp_records((dir / "y.bin").string());
    REQUIRE(rb.size() == 2);
    CHECK(rb[0].grid_id == 3);
    CHECK(rb[0].tag == matrix_tag::rotated);
    CHECK(rb[1].y == recs[1].y);

    std::ostringstream os;
    write_csv(os, recs);
    CHECK(os.str().find('\n') != std::string::npos);
    std::filesystem::remove_all(dir);
}
