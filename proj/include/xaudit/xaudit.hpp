#pragma once

#include "xaudit/audit.hpp"
#include "xaudit/calibration.hpp"
#include "xaudit/checkpoint.hpp"
#include "xaudit/dataset.hpp"
#include "xaudit/detectors.hpp"
#include "xaudit/explain.hpp"
#include "xaudit/model.hpp"
#include "xaudit/pgm.hpp"
#include "xaudit/remedy.hpp"
#include "xaudit/rle.hpp"
#include "xaudit/synthgen.hpp"
#include "xaudit/train.hpp"
