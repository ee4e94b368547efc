#pragma once
// Umbrella include for the whole library.

#include "kglm/adapter.hpp"
#include "kglm/checkpoint.hpp"
#include "kglm/config.hpp"
#include "kglm/dataset.hpp"
#include "kglm/decoder.hpp"
#include "kglm/encoder.hpp"
#include "kglm/error.hpp"
#include "kglm/eval.hpp"
#include "kglm/gradcheck.hpp"
#include "kglm/gradchecks_builtin.hpp"
#include "kglm/kg.hpp"
#include "kglm/levi.hpp"
#include "kglm/metrics.hpp"
#include "kglm/optim.hpp"
#include "kglm/remote.hpp"
#include "kglm/retrieval.hpp"
#include "kglm/rng.hpp"
#include "kglm/tensor.hpp"
#include "kglm/text.hpp"
#include "kglm/trainer.hpp"
