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

#ifndef mmlscm_container_H
#define mmlscm_container_H

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

/*!MD
# MMLC binary container

All binary artifacts (measurement matrices, RSRP sets, density grids, render outputs, checkpoints)
share one little-endian layout:

Offset | Field
-------|--------------------------------------------------------------
0      | magic `"MMLC"` (4 bytes)
4      | version byte (currently 1)
5      | u32 metadata length `L`
9      | metadata, `L` bytes of `key=value\n` lines, keys sorted
9+L    | u32 array count
...    | per array: u8 dtype (1 = f64, 2 = u32), u8 rank, u16 name length, name bytes,
       | `rank` x u64 dims, row-major payload
MD!*/

namespace mmlscm
{
    enum class dtype : std::uint8_t
    {
        f64 = 1,
        u32 = 2
    };

    struct array_entry
    {
        std::string name;
        dtype type = dtype::f64;
        std::vector<std::uint64_t> dims;
        std::vector<double> f64;
        std::vector<std::uint32_t> u32;

        std::uint64_t n_elem() const;
    };

    class container
    {
    public:
        static constexpr std::uint8_t version = 1;

        std::map<std::string, std::string> meta;
        std::vector<array_entry> arrays;

        void add(const std::string &name, std::vector<std::uint64_t> dims, std::span<const double> data);
        void add(const std::string &name, std::vector<std::uint64_t> dims, std::span<const std::uint32_t> data);

        // Throws io_error if missing or of a different dtype
        const array_entry &get(const std::string &name, dtype type) const;
        bool has(const std::string &name) const;

        const std::string &meta_at(const std::string &key) const;
        double meta_double(const std::string &key) const;
        long long meta_int(const std::string &key) const;

        void write(std::ostream &os) const;
        static container read(std::istream &is);

        void save(const std::string &path) const;
        static container load(const std::string &path);

        std::vector<std::uint8_t> bytes() const;
    };

    // FNV-1a 64-bit over a file's bytes, formatted as 16 hex digits
    std::string file_hash(const std::string &path);
}

#endif
