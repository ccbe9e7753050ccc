#pragma once

#include "cvgad/bundle_io.hpp"
#include "cvgad/config.hpp"
#include "cvgad/errors.hpp"
#include "cvgad/gradients.hpp"
#include "cvgad/graph.hpp"
#include "cvgad/injection.hpp"
#include "cvgad/model.hpp"
#include "cvgad/purification.hpp"
#include "cvgad/rng.hpp"
#include "cvgad/sampler.hpp"
#include "cvgad/scoring.hpp"
#include "cvgad/threading.hpp"
