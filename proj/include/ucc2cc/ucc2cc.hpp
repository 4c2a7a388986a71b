#pragma once

#include "errors.hpp"
#include "opalg.hpp"
#include "symcoef.hpp"
#include "identities.hpp"
#include "fockoracle.hpp"
#include "reorder.hpp"
#include "elimination.hpp"
#include "cli.hpp"
