#pragma once

#include "dtensor/bench.hpp"
#include "dtensor/bsgs.hpp"
#include "dtensor/container.hpp"
#include "dtensor/csf.hpp"
#include "dtensor/error.hpp"
#include "dtensor/ftsf.hpp"
#include "dtensor/layouts.hpp"
#include "dtensor/sparse.hpp"
#include "dtensor/store/object_store.hpp"
#include "dtensor/store/schemas.hpp"
#include "dtensor/store/segment.hpp"
#include "dtensor/store/table.hpp"
#include "dtensor/tensor.hpp"
