// Umbrella header.
#pragma once

#include "dualcomp/bench.hpp"
#include "dualcomp/common.hpp"
#include "dualcomp/config.hpp"
#include "dualcomp/fusion.hpp"
#include "dualcomp/grid.hpp"
#include "dualcomp/igsr.hpp"
#include "dualcomp/io.hpp"
#include "dualcomp/labels.hpp"
#include "dualcomp/pipeline.hpp"
#include "dualcomp/router.hpp"
#include "dualcomp/scene.hpp"
#include "dualcomp/scsa.hpp"
