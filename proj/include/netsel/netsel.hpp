#pragma once

#include "community.hpp"
#include "data.hpp"
#include "edgeset.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "graph.hpp"
#include "learn.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "selection.hpp"
#include "similarity.hpp"
#include "sparse.hpp"
#include "synth.hpp"
#include "tasks.hpp"
