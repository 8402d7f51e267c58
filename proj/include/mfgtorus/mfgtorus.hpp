#pragma once

#include "mfgtorus/error.hpp"
#include "mfgtorus/circle.hpp"
#include "mfgtorus/hamiltonian.hpp"
#include "mfgtorus/lax_oleinik.hpp"
#include "mfgtorus/characteristics.hpp"
#include "mfgtorus/measures.hpp"
#include "mfgtorus/coupling.hpp"
#include "mfgtorus/mfg.hpp"
#include "mfgtorus/example_verifier.hpp"
