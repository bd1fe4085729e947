#pragma once

#include "celm/dataset.hpp"
#include "celm/error.hpp"
#include "celm/evaluation.hpp"
#include "celm/hidden_layer.hpp"
#include "celm/linalg.hpp"
#include "celm/model.hpp"
#include "celm/rng.hpp"
