#pragma once

#include "mjsred/bounds.hpp"
#include "mjsred/clustering.hpp"
#include "mjsred/error.hpp"
#include "mjsred/experiments.hpp"
#include "mjsred/features.hpp"
#include "mjsred/io.hpp"
#include "mjsred/linalg.hpp"
#include "mjsred/lqr.hpp"
#include "mjsred/model.hpp"
#include "mjsred/parallel.hpp"
#include "mjsred/perturbation.hpp"
#include "mjsred/simulate.hpp"
#include "mjsred/stability.hpp"
#include "mjsred/synth.hpp"
#include "mjsred/transport.hpp"
