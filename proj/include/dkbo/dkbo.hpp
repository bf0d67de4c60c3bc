#pragma once

#include "acquisition.hpp"
#include "bo.hpp"
#include "experiment.hpp"
#include "gp.hpp"
#include "io.hpp"
#include "lbfgs.hpp"
#include "net.hpp"
#include "phantom.hpp"
#include "pose.hpp"
#include "quality.hpp"
#include "random.hpp"
