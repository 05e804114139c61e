#pragma once

#include "projctl/constrained_dynamics.hpp"
#include "projctl/constraint_geometry.hpp"
#include "projctl/control_laws.hpp"
#include "projctl/models.hpp"
#include "projctl/planar_chain.hpp"
#include "projctl/report.hpp"
#include "projctl/robot_model.hpp"
#include "projctl/scenario.hpp"
#include "projctl/simulator.hpp"
#include "projctl/task_space.hpp"
#include "projctl/torque_qcqp.hpp"
#include "projctl/types.hpp"
