#pragma once

#include "bal/bench.hpp"
#include "bal/common.hpp"
#include "bal/data.hpp"
#include "bal/decoder.hpp"
#include "bal/geometry.hpp"
#include "bal/loop.hpp"
#include "bal/metrics.hpp"
#include "bal/model.hpp"
#include "bal/oracle.hpp"
#include "bal/png.hpp"
#include "bal/random.hpp"
#include "bal/strategies.hpp"
