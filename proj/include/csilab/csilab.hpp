// Copyright 2026 The csilab Authors
// SPDX-License-Identifier: Apache-2.0

// Everything except the HTTP providers (csilab/remote.hpp).

#pragma once

#include "csilab/calibration.hpp"
#include "csilab/config.hpp"
#include "csilab/corpus.hpp"
#include "csilab/csi.hpp"
#include "csilab/detection.hpp"
#include "csilab/diffusion.hpp"
#include "csilab/embedding.hpp"
#include "csilab/errors.hpp"
#include "csilab/eval.hpp"
#include "csilab/frechet.hpp"
#include "csilab/keys.hpp"
#include "csilab/latent.hpp"
#include "csilab/ledger.hpp"
#include "csilab/providers.hpp"
#include "csilab/text.hpp"
#include "csilab/unit_vector.hpp"
#include "csilab/world.hpp"
