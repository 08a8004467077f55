#pragma once

#include "confidence.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "experiment.hpp"
#include "neighbors.hpp"
#include "problem.hpp"
#include "registry.hpp"
#include "rng.hpp"
