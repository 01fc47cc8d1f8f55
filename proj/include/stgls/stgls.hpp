#pragma once

#include "stgls/common.hpp"
#include "stgls/mesh.hpp"
#include "stgls/basis.hpp"
#include "stgls/nodes.hpp"
#include "stgls/problem.hpp"
#include "stgls/sparse.hpp"
#include "stgls/linsolve.hpp"
#include "stgls/dofs.hpp"
#include "stgls/assembly.hpp"
#include "stgls/estimate.hpp"
#include "stgls/adapt.hpp"
#include "stgls/seqref.hpp"
#include "stgls/study.hpp"
#include "stgls/io.hpp"
