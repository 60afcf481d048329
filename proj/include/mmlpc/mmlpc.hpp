#pragma once

#include "mmlpc/attention.hpp"
#include "mmlpc/error.hpp"
#include "mmlpc/features.hpp"
#include "mmlpc/filterbank.hpp"
#include "mmlpc/mulaw.hpp"
#include "mmlpc/neuralops.hpp"
#include "mmlpc/perf.hpp"
#include "mmlpc/rng.hpp"
#include "mmlpc/synthetic.hpp"
#include "mmlpc/vocoder.hpp"
#include "mmlpc/wav.hpp"
#include "mmlpc/weights_io.hpp"
