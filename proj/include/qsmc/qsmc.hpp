#pragma once

#include "qsmc/sliding_surface.hpp"
#include "qsmc/reaching_envelope.hpp"
#include "qsmc/controllers.hpp"
#include "qsmc/expr.hpp"
#include "qsmc/plant.hpp"
#include "qsmc/simulation.hpp"
#include "qsmc/trajectory_io.hpp"
#include "qsmc/experiment.hpp"
