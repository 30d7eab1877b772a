#pragma once

#include "qcs/checks.hpp"
#include "qcs/dmb.hpp"
#include "qcs/error.hpp"
#include "qcs/likelihood.hpp"
#include "qcs/metrics.hpp"
#include "qcs/normal.hpp"
#include "qcs/quantizer.hpp"
#include "qcs/refine.hpp"
#include "qcs/sensing.hpp"
#include "qcs/spectral.hpp"
#include "qcs/unfold.hpp"
