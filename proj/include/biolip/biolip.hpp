#pragma once

#include "biolip/analysis.hpp"
#include "biolip/bench.hpp"
#include "biolip/binary_io.hpp"
#include "biolip/checkpoint.hpp"
#include "biolip/dataset.hpp"
#include "biolip/error.hpp"
#include "biolip/evaluation.hpp"
#include "biolip/kinematics.hpp"
#include "biolip/layers.hpp"
#include "biolip/network.hpp"
#include "biolip/perturbation.hpp"
#include "biolip/region_map.hpp"
#include "biolip/report.hpp"
#include "biolip/rng.hpp"
#include "biolip/synthetic.hpp"
#include "biolip/training.hpp"
#include "biolip/trajectory.hpp"
