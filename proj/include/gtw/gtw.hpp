#pragma once

#include "gtw/config.hpp"
#include "gtw/constraints.hpp"
#include "gtw/errors.hpp"
#include "gtw/expression.hpp"
#include "gtw/field.hpp"
#include "gtw/fv.hpp"
#include "gtw/gradient.hpp"
#include "gtw/interpolation.hpp"
#include "gtw/io.hpp"
#include "gtw/moc.hpp"
#include "gtw/models/barotropic.hpp"
#include "gtw/models/scalar.hpp"
#include "gtw/ode.hpp"
#include "gtw/reduction.hpp"
#include "gtw/system.hpp"

namespace gtw {

inline constexpr const char* version = "1.0.0";

}  // namespace gtw
