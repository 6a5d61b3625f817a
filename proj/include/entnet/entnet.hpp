#pragma once

#include "entnet/analysis.hpp"
#include "entnet/config.hpp"
#include "entnet/errors.hpp"
#include "entnet/ldpc.hpp"
#include "entnet/network.hpp"
#include "entnet/qkd.hpp"
#include "entnet/quantum.hpp"
#include "entnet/secure_sum.hpp"
#include "entnet/stats.hpp"
#include "entnet/transport.hpp"
#include "entnet/util.hpp"
