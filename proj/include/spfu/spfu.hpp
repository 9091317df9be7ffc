#pragma once

#include "spfu/analysis.hpp"
#include "spfu/attention.hpp"
#include "spfu/config.hpp"
#include "spfu/fft.hpp"
#include "spfu/fusion.hpp"
#include "spfu/harness.hpp"
#include "spfu/masks.hpp"
#include "spfu/noise_init.hpp"
#include "spfu/parallel.hpp"
#include "spfu/rng.hpp"
#include "spfu/selftest.hpp"
#include "spfu/tensor.hpp"
#include "spfu/tensor_io.hpp"
