#pragma once

#include "formsim/awpf.hpp"
#include "formsim/csv.hpp"
#include "formsim/dynamics.hpp"
#include "formsim/formation.hpp"
#include "formsim/fusion.hpp"
#include "formsim/isac.hpp"
#include "formsim/nsb.hpp"
#include "formsim/numerics.hpp"
#include "formsim/reporting.hpp"
#include "formsim/runner.hpp"
#include "formsim/scenario.hpp"
#include "formsim/vfeo.hpp"
