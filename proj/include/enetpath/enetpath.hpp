#pragma once

#include "enetpath/cox.hpp"
#include "enetpath/csv.hpp"
#include "enetpath/eval.hpp"
#include "enetpath/family.hpp"
#include "enetpath/matrix.hpp"
#include "enetpath/model_io.hpp"
#include "enetpath/path.hpp"
#include "enetpath/penalty.hpp"
#include "enetpath/pwls.hpp"
#include "enetpath/relaxed.hpp"
