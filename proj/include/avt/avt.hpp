// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "avt/audioseg.hpp"
#include "avt/audit.hpp"
#include "avt/checkpoint.hpp"
#include "avt/common.hpp"
#include "avt/complexity.hpp"
#include "avt/config.hpp"
#include "avt/data.hpp"
#include "avt/encoders.hpp"
#include "avt/fusion.hpp"
#include "avt/gradcheck.hpp"
#include "avt/losses.hpp"
#include "avt/masking.hpp"
#include "avt/model.hpp"
#include "avt/ops.hpp"
#include "avt/optimizer.hpp"
#include "avt/tensor.hpp"
#include "avt/train.hpp"
