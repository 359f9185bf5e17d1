#pragma once

#include "charlab/errors.hpp"
#include "charlab/numeric.hpp"
#include "charlab/parallel.hpp"
#include "charlab/primes.hpp"
#include "charlab/character.hpp"
#include "charlab/pretentious.hpp"
#include "charlab/charsum.hpp"
#include "charlab/lfunc.hpp"
#include "charlab/construct.hpp"
