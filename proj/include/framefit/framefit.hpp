#pragma once

#include "framefit/calculus.hpp"
#include "framefit/diagnostics.hpp"
#include "framefit/frame_core.hpp"
#include "framefit/newton.hpp"
#include "framefit/polynomial_family.hpp"
#include "framefit/radar.hpp"
#include "framefit/rng.hpp"
#include "framefit/types.hpp"
#include "framefit/variational.hpp"
