#pragma once

#include "icpkit/alignment.hpp"
#include "icpkit/bayes.hpp"
#include "icpkit/correspondence.hpp"
#include "icpkit/errors.hpp"
#include "icpkit/geometry.hpp"
#include "icpkit/icp.hpp"
#include "icpkit/io.hpp"
#include "icpkit/kdtree.hpp"
#include "icpkit/random.hpp"
#include "icpkit/report.hpp"
#include "icpkit/slam.hpp"
#include "icpkit/version.hpp"
