#pragma once

#include "verihtn/bundle.hpp"
#include "verihtn/domain.hpp"
#include "verihtn/experiment.hpp"
#include "verihtn/llm_client.hpp"
#include "verihtn/loader.hpp"
#include "verihtn/oracle.hpp"
#include "verihtn/plan_io.hpp"
#include "verihtn/planner.hpp"
#include "verihtn/trace.hpp"
#include "verihtn/validator.hpp"
