#pragma once

// Umbrella include for the gradient-editing adversarial toolkit.

#include "geadv/attacks.hpp"
#include "geadv/attribution.hpp"
#include "geadv/config.hpp"
#include "geadv/eval.hpp"
#include "geadv/freq.hpp"
#include "geadv/gan.hpp"
#include "geadv/nn/layers.hpp"
#include "geadv/nn/model.hpp"
#include "geadv/nn/train.hpp"
#include "geadv/oracles.hpp"
#include "geadv/pipeline.hpp"
#include "geadv/plot.hpp"
#include "geadv/zoo.hpp"
