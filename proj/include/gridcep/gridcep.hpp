/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include "gridcep/actions.hpp"
#include "gridcep/bgp.hpp"
#include "gridcep/command.hpp"
#include "gridcep/detection.hpp"
#include "gridcep/engine.hpp"
#include "gridcep/error.hpp"
#include "gridcep/event.hpp"
#include "gridcep/experiment.hpp"
#include "gridcep/format.hpp"
#include "gridcep/ontology.hpp"
#include "gridcep/parser.hpp"
#include "gridcep/pattern_ast.hpp"
#include "gridcep/service.hpp"
#include "gridcep/sim.hpp"
#include "gridcep/validate.hpp"
#include "gridcep/value.hpp"
#include "gridcep/window.hpp"
