#pragma once

#include "idealflow/calibrate.hpp"
#include "idealflow/error.hpp"
#include "idealflow/format.hpp"
#include "idealflow/graph.hpp"
#include "idealflow/io.hpp"
#include "idealflow/markov.hpp"
#include "idealflow/nullspace.hpp"
#include "idealflow/version.hpp"
#include "idealflow/walk.hpp"
#include "idealflow/whatif.hpp"
