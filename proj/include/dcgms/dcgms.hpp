#pragma once

/** @file dcgms.hpp
    @brief Umbrella header: fine FEM and uncoupled/coupled GMsFEM for dual-continuum transport.
*/

#include "errors.hpp"
#include "grid.hpp"
#include "coeffs.hpp"
#include "assembly.hpp"
#include "fine_solver.hpp"
#include "parallel.hpp"
#include "msbasis.hpp"
#include "coarse_solver.hpp"
#include "metrics.hpp"
#include "io.hpp"
#include "experiment.hpp"
