#pragma once

#include "chaospred/embedding.hpp"
#include "chaospred/ensemble.hpp"
#include "chaospred/error.hpp"
#include "chaospred/geometry.hpp"
#include "chaospred/io.hpp"
#include "chaospred/matrix.hpp"
#include "chaospred/neighbors.hpp"
#include "chaospred/predictors.hpp"
#include "chaospred/random.hpp"
#include "chaospred/systems.hpp"
