#pragma once

#include "nngpw/activation.hpp"
#include "nngpw/assignment.hpp"
#include "nngpw/bound.hpp"
#include "nngpw/config.hpp"
#include "nngpw/csv.hpp"
#include "nngpw/errors.hpp"
#include "nngpw/experiment.hpp"
#include "nngpw/kernel.hpp"
#include "nngpw/network.hpp"
#include "nngpw/plot.hpp"
#include "nngpw/psd.hpp"
#include "nngpw/quadrature.hpp"
#include "nngpw/rng.hpp"
#include "nngpw/samples.hpp"
#include "nngpw/transport.hpp"
#include "nngpw/verify.hpp"
