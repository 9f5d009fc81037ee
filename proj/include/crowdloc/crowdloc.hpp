/*
 * Copyright (C) 2026 crowdloc contributors
 * SPDX-License-Identifier: Apache-2.0
 */

//! Umbrella header.

#pragma once

#include "crowdloc/calib.hpp"
#include "crowdloc/detect.hpp"
#include "crowdloc/error.hpp"
#include "crowdloc/eval.hpp"
#include "crowdloc/geometry.hpp"
#include "crowdloc/hungarian.hpp"
#include "crowdloc/io.hpp"
#include "crowdloc/metrics.hpp"
#include "crowdloc/optim.hpp"
#include "crowdloc/parallel.hpp"
#include "crowdloc/pipeline.hpp"
#include "crowdloc/rng.hpp"
#include "crowdloc/skeleton.hpp"
#include "crowdloc/synth.hpp"
#include "crowdloc/tiling.hpp"
#include "crowdloc/upright.hpp"
