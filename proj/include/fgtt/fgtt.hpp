#pragma once

#include "fgtt/bayesopt.hpp"
#include "fgtt/booster.hpp"
#include "fgtt/csv.hpp"
#include "fgtt/cv.hpp"
#include "fgtt/dataset.hpp"
#include "fgtt/encode.hpp"
#include "fgtt/errors.hpp"
#include "fgtt/forest.hpp"
#include "fgtt/gp.hpp"
#include "fgtt/heatmap.hpp"
#include "fgtt/importance.hpp"
#include "fgtt/loss.hpp"
#include "fgtt/manifest.hpp"
#include "fgtt/metrics.hpp"
#include "fgtt/model.hpp"
#include "fgtt/optimizer.hpp"
#include "fgtt/partition.hpp"
#include "fgtt/rng.hpp"
#include "fgtt/schema.hpp"
#include "fgtt/split.hpp"
#include "fgtt/synthetic.hpp"
#include "fgtt/tensor.hpp"
#include "fgtt/train.hpp"
#include "fgtt/tree.hpp"
#include "fgtt/version.hpp"
