#pragma once

#include "everett/ledger.hpp"
#include "everett/locality.hpp"
#include "everett/measurement.hpp"
#include "everett/state.hpp"
