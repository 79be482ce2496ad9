// Umbrella header.
#pragma once

#include "aexp/camera.hpp"
#include "aexp/config.hpp"
#include "aexp/controller.hpp"
#include "aexp/image.hpp"
#include "aexp/metric.hpp"
#include "aexp/noise_eval.hpp"
#include "aexp/pnm.hpp"
#include "aexp/random.hpp"
#include "aexp/surface.hpp"
#include "aexp/sweep.hpp"
#include "aexp/text.hpp"
