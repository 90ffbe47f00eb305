#pragma once

#include "tumorcp/errors.hpp"
#include "tumorcp/grid.hpp"
#include "tumorcp/spectral.hpp"
#include "tumorcp/kernel.hpp"
#include "tumorcp/physics.hpp"
#include "tumorcp/solvers.hpp"
#include "tumorcp/forward.hpp"
#include "tumorcp/cost.hpp"
#include "tumorcp/adjoint.hpp"
#include "tumorcp/control.hpp"
#include "tumorcp/config.hpp"
#include "tumorcp/experiments.hpp"
