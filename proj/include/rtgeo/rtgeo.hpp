#pragma once

#include <rtgeo/error.hpp>
#include <rtgeo/chart.hpp>
#include <rtgeo/fields.hpp>
#include <rtgeo/calculus.hpp>
#include <rtgeo/norms.hpp>
#include <rtgeo/poisson.hpp>
#include <rtgeo/mollify.hpp>
#include <rtgeo/curve.hpp>
#include <rtgeo/transform.hpp>
#include <rtgeo/curvature.hpp>
#include <rtgeo/rt_solver.hpp>
#include <rtgeo/geodesics.hpp>
#include <rtgeo/pipeline.hpp>
#include <rtgeo/scenario.hpp>
#include <rtgeo/field_io.hpp>
#include <rtgeo/config.hpp>
#include <rtgeo/studies.hpp>
#include <rtgeo/experiment.hpp>
