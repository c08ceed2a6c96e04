#pragma once

#include <chainlab/chain_model.hpp>
#include <chainlab/correctors.hpp>
#include <chainlab/cutoffs.hpp>
#include <chainlab/decay.hpp>
#include <chainlab/effective_dynamics.hpp>
#include <chainlab/fit.hpp>
#include <chainlab/free_oscillator.hpp>
#include <chainlab/io.hpp>
#include <chainlab/lyapunov.hpp>
#include <chainlab/orbit.hpp>
#include <chainlab/random.hpp>
#include <chainlab/sde_integrator.hpp>
#include <chainlab/spectral_probe.hpp>
#include <chainlab/theta_profile.hpp>
