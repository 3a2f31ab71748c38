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

#ifndef mmlscm_error_H
#define mmlscm_error_H

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mmlscm
{
    // Precondition on an argument violated (sizes, ranges, malformed values)
    struct invalid_argument : std::invalid_argument
    {
        using std::invalid_argument::invalid_argument;
    };

    // Operation called on an object in the wrong state
    struct invalid_state : std::logic_error
    {
        using std::logic_error::logic_error;
    };

    // Text input could not be parsed; line is 1-based, 0 if unknown
    struct parse_error : std::runtime_error
    {
        std::size_t line = 0;
        parse_error(const std::string &msg, std::size_t line_no)
            : std::runtime_error(line_no ? msg + " (row " + std::to_string(line_no) + ")" : msg), line(line_no) {}
    };

    struct out_of_bounds : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    // Iterative procedure hit its iteration cap or tolerance could not be met
    struct convergence_error : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct numerical_failure : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct training_diverged : std::runtime_error
    {
        std::size_t step = 0;
        training_diverged(const std::string &msg, std::size_t step_index)
            : std::runtime_error(msg + " at step " + std::to_string(step_index)), step(step_index) {}
    };

    struct generation_failure : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct io_error : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };
}

#endif
