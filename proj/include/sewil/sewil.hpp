#pragma once

#include "sewil/bounds.hpp"
#include "sewil/common.hpp"
#include "sewil/dataset.hpp"
#include "sewil/forest.hpp"
#include "sewil/genetic.hpp"
#include "sewil/matrix.hpp"
#include "sewil/parallel.hpp"
#include "sewil/pipeline.hpp"
#include "sewil/selflearn.hpp"
#include "sewil/stats.hpp"
#include "sewil/votes.hpp"
