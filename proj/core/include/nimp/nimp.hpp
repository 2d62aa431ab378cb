#pragma once

#include "nimp/ablation.hpp"
#include "nimp/checkpoint.hpp"
#include "nimp/datasets.hpp"
#include "nimp/error.hpp"
#include "nimp/experiment.hpp"
#include "nimp/infotheory.hpp"
#include "nimp/nn.hpp"
#include "nimp/quantize.hpp"
#include "nimp/random.hpp"
#include "nimp/train.hpp"
#include "nimp/types.hpp"
