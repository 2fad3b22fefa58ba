#pragma once

#include <tkam/angular_spectra.hpp>
#include <tkam/bessel.hpp>
#include <tkam/config.hpp>
#include <tkam/farfield.hpp>
#include <tkam/field_synthesis.hpp>
#include <tkam/local_response.hpp>
#include <tkam/pipeline.hpp>
#include <tkam/time_domain.hpp>
#include <tkam/units.hpp>
#include <tkam/version.hpp>
