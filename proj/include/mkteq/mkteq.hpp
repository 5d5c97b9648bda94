#pragma once

#include "mkteq/closed_form.hpp"
#include "mkteq/dynamics.hpp"
#include "mkteq/errors.hpp"
#include "mkteq/exact_games.hpp"
#include "mkteq/experiment.hpp"
#include "mkteq/market.hpp"
#include "mkteq/repr_io.hpp"
#include "mkteq/rng.hpp"
#include "mkteq/svg.hpp"
#include "mkteq/synth.hpp"
