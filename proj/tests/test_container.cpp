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

#include "mmlscm/container.hpp"
#include "mmlscm/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mmlscm;

TEST_CASE("container: round trip")
{
    container c;
    c.meta["b"] = "2.5";
    c.meta["a"] = "-3";
    const std::vector<double> f{1.0, -0.5, 1e-300, 3.25, 0.0, 7.0};
    const std::vector<std::uint32_t> u{1, 2, 4000000000u};
    c.add("values", {2, 3}, f);
    c.add("counts", {3}, u);

    std::stringstream ss;
    c.write(ss);
    const auto bytes = ss.str();
    CHECK(bytes.substr(0, 4) == "MMLC");
    CHECK(std::uint8_t(bytes[4]) == container::version);
    CHECK(std::vector<std::uint8_t>(bytes.begin(), bytes.end()) == c.bytes());

    const auto back = container::read(ss);
    CHECK(back.meta == c.meta);
    CHECK(back.meta_double("b") == 2.5);
    CHECK(back.meta_int("a") == -3);
    const auto &v = back.get("values", dtype::f64);
    CHECK(v.dims == std::vector<std::uint64_t>{2, 3});
    CHECK(v.f64 == f);
    CHECK(v.n_elem() == 6);
    CHECK(back.get("counts", dtype::u32).u32 == u);
    CHECK(back.has("counts"));
    CHECK_FALSE(back.has("nothing"));
    CHECK_THROWS_AS(back.get("counts", dtype::f64), io_error);
    CHECK_THROWS_AS(back.get("nothing", dtype::f64), io_error);
    CHECK_THROWS(back.meta_at("zzz"));
}

TEST_CASE("container: metadata order does not change bytes")
{
    container a, b;
    a.meta["x"] = "1";
    a.meta["y"] = "2";
    b.meta["y"] = "2";
    b.meta["x"] = "1";
    CHECK(a.bytes() == b.bytes());
}

TEST_CASE("container: malformed input")
{
    std::istringstream bad_magic("XXXX\x01");
    CHECK_THROWS_AS(container::read(bad_magic), io_error);

    container c;
    c.add("v", {4}, std::vector<double>{1, 2, 3, 4});
    auto bytes = c.bytes();
    std::string truncated(bytes.begin(), bytes.end() - 5);
    std::istringstream t(truncated);
    CHECK_THROWS_AS(container::read(t), io_error);

    std::string wrong_version(bytes.begin(), bytes.end());
    wrong_version[4] = 9;
    std::istringstream w(wrong_version);
    CHECK_THROWS_AS(container::read(w), io_error);

    CHECK_THROWS(c.add("bad", {3}, std::vector<double>{1, 2}));
}

TEST_CASE("container: files and hashes")
{
    const auto dir = std::filesystem::temp_directory_path();
    const auto p1 = (dir / "mmlscm_test_c1.bin").string(), p2 = (dir / "mmlscm_test_c2.bin").string();
    container c;
    c.add("v", {2}, std::vector<double>{1.5, 2.5});
    c.save(p1);
    c.save(p2);
    CHECK(container::load(p1).get("v", dtype::f64).f64 == std::vector<double>{1.5, 2.5});
    CHECK(file_hash(p1) == file_hash(p2));
    CHECK(file_hash(p1).size() == 16);
    {
        std::ofstream os(p2, std::ios::binary | std::ios::app);
        os << 'x';
    }
    CHECK(file_hash(p1) != file_hash(p2));

    // FNV-1a of the empty input
    {
        std::ofstream os(p2, std::ios::binary | std::ios::trunc);
    }
    CHECK(file_hash(p2) == "cbf29ce484222325");
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
    CHECK_THROWS_AS(container::load(p1), io_error);
}
