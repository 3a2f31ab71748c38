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

#include "mmlscm/error.hpp"
#include "mmlscm/pointcloud.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace mmlscm;

namespace
{
    point_cloud centered(std::vector<vec3> pts)
    {
        point_cloud c;
        c.points = std::move(pts);
        c.frame = frame_tag::bs_centered;
        return c;
    }

    voxel_spec unit_spec(std::size_t n = 4)
    {
        voxel_spec s;
        s.mins = vec3::Zero();
        s.resolution = vec3::Constant(1.0);
        s.dims = {n, n, n};
        return s;
    }

    density_grid empty_grid(const voxel_spec &s)
    {
        density_grid g;
        g.spec = s;
        g.rho.assign(s.n_voxels(), 0);
        return g;
    }

    std::vector<double> linspace(double a, double b, std::size_t n)
    {
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i)
            t[i] = a + (b - a) * double(i) / double(n - 1);
        return t;
    }
}

TEST_CASE("load: csv rows")
{
    std::istringstream is("0,0,0\n1,2,3");
    const auto c = load_point_cloud(is, cloud_format::xyz_csv);
    REQUIRE(c.size() == 2);
    CHECK(c.frame == frame_tag::world);
    CHECK(c.points[1] == vec3(1, 2, 3));

    std::istringstream empty("");
    CHECK(load_point_cloud(empty, cloud_format::xyz_csv).size() == 0);
}

TEST_CASE("load: malformed rows report their number")
{
    std::istringstream is("1,2,NaN\n");
    try
    {
        load_point_cloud(is, cloud_format::xyz_csv);
        FAIL("expected parse_error");
    }
    catch (const parse_error &e)
    {
        CHECK(e.line == 1);
    }

    std::istringstream short_row("0,0,0\n1,2\n");
    try
    {
        load_point_cloud(short_row, cloud_format::xyz_csv);
        FAIL("expected parse_error");
    }
    catch (const parse_error &e)
    {
        CHECK(e.line == 2);
    }
    CHECK_THROWS_AS(cloud_format_from_string("las"), mmlscm::invalid_argument);
}

TEST_CASE("load: ascii ply")
{
    std::istringstream is("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
                          "end_header\n1 2 3\n4 5 6\n");
    const auto c = load_point_cloud(is, cloud_format::ascii_ply);
    REQUIRE(c.size() == 2);
    CHECK(c.points[1] == vec3(4, 5, 6));

    std::istringstream truncated("ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
                                 "property float z\nend_header\n1 2 3\n");
    CHECK_THROWS_AS(load_point_cloud(truncated, cloud_format::ascii_ply), parse_error);
}

TEST_CASE("load: csv write round trip")
{
    point_cloud c;
    c.points = {vec3(0.1, -2.5, 3.0), vec3(1.0 / 3.0, 7.0, -0.0)};
    std::stringstream ss;
    write_xyz_csv(ss, c);
    const auto back = load_point_cloud(ss, cloud_format::xyz_csv);
    REQUIRE(back.size() == 2);
    CHECK(back.points[0] == c.points[0]);
    CHECK(back.points[1] == c.points[1]);
}

TEST_CASE("translate to the BS frame")
{
    point_cloud c;
    c.points = {vec3(5, 5, 5), vec3(1.25, -3.5, 0.125)};
    const vec3 bs(5, 5, 5);
    const auto t = translate_to_bs(c, bs);
    CHECK(t.frame == frame_tag::bs_centered);
    CHECK(t.points[0] == vec3::Zero());
    CHECK_THROWS_AS(translate_to_bs(t, bs), invalid_state);

    const auto same = translate_to_bs(c, vec3::Zero());
    CHECK(same.points[1] == c.points[1]);

    // translating back by -p_bs is bitwise exact for these binary fractions
    point_cloud w = t;
    w.frame = frame_tag::world;
    const auto back = translate_to_bs(w, -bs);
    for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(back.points[i] == c.points[i]);
}

TEST_CASE("voxelize: floor rule, clamping and conservation")
{
    const auto s = unit_spec();
    auto g = voxelize(centered({vec3::Zero()}), s);
    CHECK(g.rho[s.flat(0, 0, 0)] == 1);
    CHECK(g.total() == 1);

    g = voxelize(centered({vec3(2.0, 1.0, 3.0)}), s);
    CHECK(g.rho[s.flat(2, 1, 3)] == 1);

    g = voxelize(centered({vec3(4.0, 4.0, 4.0)}), s);
    CHECK(g.rho[s.flat(3, 3, 3)] == 1);

    CHECK_THROWS_AS(voxelize(centered({vec3(4.1, 0, 0)}), s), out_of_bounds);
    point_cloud world;
    world.points = {vec3::Zero()};
    CHECK_THROWS_AS(voxelize(world, s), invalid_state);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    std::vector<vec3> pts;
    for (int i = 0; i < 1000; ++i)
        pts.emplace_back(u(rng), u(rng), u(rng));
    const auto a = voxelize(centered(pts), s);
    CHECK(a.total() == 1000);
    std::uint64_t sum = 0;
    for (auto v : a.rho)
        sum += v;
    CHECK(sum == 1000);

    std::shuffle(pts.begin(), pts.end(), rng);
    CHECK(voxelize(centered(pts), s).rho == a.rho);
}

TEST_CASE("density_at: lookup matches the index formula")
{
    voxel_spec s;
    s.mins = vec3(-2.0, -1.0, 0.5);
    s.resolution = vec3(0.5, 0.25, 1.0);
    s.dims = {8, 12, 5};
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> ux(-2.0, 2.0), uy(-1.0, 2.0), uz(0.5, 5.5);
    std::vector<vec3> pts;
    for (int i = 0; i < 3000; ++i)
        pts.emplace_back(ux(rng), uy(rng), uz(rng));
    const auto g = voxelize(centered(pts), s);

    for (int i = 0; i < 10000; ++i)
    {
        const vec3 p(ux(rng), uy(rng), uz(rng));
        const auto ix = std::size_t(std::floor((p.x() + 2.0) / 0.5));
        const auto iy = std::size_t(std::floor((p.y() + 1.0) / 0.25));
        const auto iz = std::size_t(std::floor((p.z() - 0.5) / 1.0));
        const auto q = density_at(g, p);
        CHECK(q.in_domain);
        CHECK(q.value == double(g.rho[s.flat(std::min<std::size_t>(ix, 7), std::min<std::size_t>(iy, 11), std::min<std::size_t>(iz, 4))]));
    }

    const auto out = density_at(g, vec3(10, 0, 1));
    CHECK_FALSE(out.in_domain);
    CHECK(out.value == 0.0);
}

TEST_CASE("density_at: single occupied voxel")
{
    const auto s = unit_spec();
    const auto g = voxelize(centered({vec3(1.5, 2.5, 0.5)}), s);
    CHECK(density_at(g, vec3(1.5, 2.5, 0.5)).value == 1.0);
    CHECK(density_at(g, vec3(1.1, 2.9, 0.2)).value == 1.0);
    CHECK(density_at(g, vec3(0.5, 0.5, 0.5)).value == 0.0);
}

TEST_CASE("first obstacle depth")
{
    const auto s = unit_spec(8);
    auto g = empty_grid(s);
    const vec3 dir(1, 0, 0);
    const auto ts = linspace(0.5, 7.5, 8);
    CHECK_FALSE(first_obstacle_depth(g, dir, ts).has_value());

    g.rho[s.flat(4, 0, 0)] = 3;
    CHECK(*first_obstacle_depth(g, dir, ts) == ts[4]);
    CHECK(*first_obstacle_index(g, dir, ts) == 4);

    g.rho[s.flat(6, 0, 0)] = 1;
    CHECK(*first_obstacle_depth(g, dir, ts) == ts[4]);
    g.rho[s.flat(2, 0, 0)] = 1;
    CHECK(*first_obstacle_depth(g, dir, ts) == ts[2]);

    CHECK_THROWS_AS(first_obstacle_depth(g, dir, std::vector<double>{}), mmlscm::invalid_argument);
}

TEST_CASE("first obstacle depth: brute-force scan and monotone under densification")
{
    const auto s = unit_spec(8);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto ts = linspace(0.05, 13.8, 64);
    for (int trial = 0; trial < 200; ++trial)
    {
        auto g = empty_grid(s);
        for (auto &v : g.rho)
            v = u(rng) < 0.05 ? 1 : 0;
        const vec3 dir = vec3(u(rng), u(rng), u(rng)).normalized();
        const auto got = first_obstacle_depth(g, dir, ts);

        std::optional<double> ref;
        for (double t : ts)
            if (density_at(g, t * dir).value > 0.0)
            {
                ref = t;
                break;
            }
        CHECK(got == ref);

        for (auto &v : g.rho)
            if (u(rng) < 0.05)
                v = 1;
        const auto denser = first_obstacle_depth(g, dir, ts);
        if (got)
        {
            REQUIRE(denser.has_value());
            CHECK(*denser <= *got);
        }
    }
}

TEST_CASE("first obstacle depth: exact traversal diagnostic")
{
    const auto s = unit_spec(8);
    auto g = empty_grid(s);
    g.rho[s.flat(3, 0, 0)] = 1;
    const auto d = first_obstacle_depth_dda(g, vec3(1, 0, 0), 8.0);
    REQUIRE(d.has_value());
    CHECK(*d == doctest::Approx(3.0));
    CHECK_FALSE(first_obstacle_depth_dda(g, vec3(0, 1, 0), 8.0).has_value());
}

TEST_CASE("density grid serialization")
{
    const auto s = unit_spec(3);
    const auto g = voxelize(centered({vec3(0.5, 0.5, 0.5), vec3(2.5, 1.5, 0.5), vec3(2.6, 1.4, 0.1)}), s);
    const auto path = (std::filesystem::temp_directory_path() / "mmlscm_test_density.bin").string();
    save_density_grid(path, g);
    const auto back = load_density_grid(path);
    CHECK(back.rho == g.rho);
    CHECK(back.spec.dims == g.spec.dims);
    CHECK(back.spec.mins == g.spec.mins);
    CHECK(back.spec.resolution == g.spec.resolution);
    std::filesystem::remove(path);
}
