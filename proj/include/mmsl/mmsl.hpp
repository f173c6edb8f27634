#pragma once

// Umbrella header for the mixed-modal scaling-law toolkit.

#include "mmsl/analysis.hpp"
#include "mmsl/errors.hpp"
#include "mmsl/fitting.hpp"
#include "mmsl/io.hpp"
#include "mmsl/laws.hpp"
#include "mmsl/lbfgs.hpp"
#include "mmsl/phenomena.hpp"
#include "mmsl/random.hpp"
#include "mmsl/records.hpp"
#include "mmsl/synth.hpp"
