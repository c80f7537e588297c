// Copyright 2026 The tubescan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Survey scenarios shared by the tests and the acceptance runner.

#ifndef TUBESCAN_TESTS_SCENARIOS_HPP
#define TUBESCAN_TESTS_SCENARIOS_HPP

#include "tubescan/simgen.hpp"

namespace scenarios {

using namespace tubescan;

// Quality floor separating same-object links (72 px apart) from chance links.
inline constexpr double kSurveyQMin = 0.005;

/// 35 m x 122 m field flown in five 7 m swaths that tile it without overlap,
/// so every object is seen in exactly one pass.
inline SurveyScenario tiled(std::uint64_t seed) {
    SurveyScenario s = SurveyScenario::reference_survey(seed);
    s.camera.width_px = 700;
    s.flight.swath_spacing_m = 7.0;
    s.flight.passes = 5;
    return s;
}

/// Two overlapping passes (overlap band x in [8.6, 11.4]) with persistent
/// false-alarm sites inside the band and objects outside it.
inline SurveyScenario two_pass(std::uint64_t seed) {
    SurveyScenario s = SurveyScenario::reference_survey(seed);
    s.field = {20.0, 30.0};
    s.flight.passes = 2;
    s.random_objects = 0;
    s.objects = {{"BLU26", {13.0, 15.0}}, {"ROCKEYE", {3.0, 5.0}}, {"BLU97", {16.0, 25.0}}};
    s.noise.false_alarm_sites = {{10.0, 8.0}, {9.5, 22.0}};
    return s;
}

}  // namespace scenarios

#endif  // TUBESCAN_TESTS_SCENARIOS_HPP
