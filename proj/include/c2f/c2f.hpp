#pragma once

#include "c2f/error.hpp"
#include "c2f/tensor.hpp"
#include "c2f/numeric.hpp"
#include "c2f/tensor_io.hpp"
#include "c2f/heatmap.hpp"
#include "c2f/vision_sampler.hpp"
#include "c2f/text_sampler.hpp"
#include "c2f/losses.hpp"
#include "c2f/training.hpp"
#include "c2f/synthetic.hpp"
#include "c2f/heuristic.hpp"
#include "c2f/report.hpp"
#include "c2f/gradcheck.hpp"
