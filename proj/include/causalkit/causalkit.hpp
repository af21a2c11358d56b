#pragma once

#include "causalkit/embedding.hpp"
#include "causalkit/error.hpp"
#include "causalkit/geweke.hpp"
#include "causalkit/hsncic.hpp"
#include "causalkit/infotheory.hpp"
#include "causalkit/kernels.hpp"
#include "causalkit/krr.hpp"
#include "causalkit/modelselect.hpp"
#include "causalkit/panel.hpp"
#include "causalkit/parallel.hpp"
#include "causalkit/significance.hpp"
#include "causalkit/synthetic.hpp"
