#pragma once

#include "y00/attack.hpp"
#include "y00/bits.hpp"
#include "y00/config.hpp"
#include "y00/errors.hpp"
#include "y00/experiments.hpp"
#include "y00/keystream.hpp"
#include "y00/mapping.hpp"
#include "y00/physical.hpp"
#include "y00/rng.hpp"
