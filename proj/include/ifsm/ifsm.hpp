#pragma once

#include "ifsm/config.hpp"
#include "ifsm/diagnostics.hpp"
#include "ifsm/dynamics.hpp"
#include "ifsm/error.hpp"
#include "ifsm/grid.hpp"
#include "ifsm/harness.hpp"
#include "ifsm/hermite.hpp"
#include "ifsm/model.hpp"
#include "ifsm/operators.hpp"
#include "ifsm/selection.hpp"
#include "ifsm/steady.hpp"
#include "ifsm/system.hpp"
#include "ifsm/table.hpp"
