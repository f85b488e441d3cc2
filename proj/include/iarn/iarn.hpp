#pragma once

#include "iarn/data.hpp"
#include "iarn/error.hpp"
#include "iarn/grad_check.hpp"
#include "iarn/layers.hpp"
#include "iarn/metrics.hpp"
#include "iarn/model.hpp"
#include "iarn/model_io.hpp"
#include "iarn/tensor.hpp"
#include "iarn/training.hpp"
#include "iarn/pipeline.hpp"
#include "iarn/network_check.hpp"
