#pragma once

#include "pcf/confield.hpp"
#include "pcf/core.hpp"
#include "pcf/forward.hpp"
#include "pcf/io.hpp"
#include "pcf/matcore.hpp"
#include "pcf/render.hpp"
#include "pcf/simharness.hpp"
#include "pcf/spectra.hpp"
