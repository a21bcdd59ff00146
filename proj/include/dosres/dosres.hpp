#pragma once

#include "dosres/errors.hpp"
#include "dosres/matrix_core.hpp"
#include "dosres/plant.hpp"
#include "dosres/dos_model.hpp"
#include "dosres/trigger_logic.hpp"
#include "dosres/guarantee_analysis.hpp"
#include "dosres/sim_engine.hpp"
#include "dosres/scenario.hpp"
