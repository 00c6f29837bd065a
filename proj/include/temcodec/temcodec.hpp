#pragma once

#include "temcodec/decoder.hpp"
#include "temcodec/encoder.hpp"
#include "temcodec/error.hpp"
#include "temcodec/linalg.hpp"
#include "temcodec/metrics.hpp"
#include "temcodec/selftest.hpp"
#include "temcodec/signal.hpp"
#include "temcodec/sweep.hpp"
