#pragma once

#include "reltrack/config.hpp"
#include "reltrack/control.hpp"
#include "reltrack/dynamics.hpp"
#include "reltrack/estimator.hpp"
#include "reltrack/log_io.hpp"
#include "reltrack/observability.hpp"
#include "reltrack/random.hpp"
#include "reltrack/sensing.hpp"
#include "reltrack/simulation.hpp"
#include "reltrack/so3.hpp"
