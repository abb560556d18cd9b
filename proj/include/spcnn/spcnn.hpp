#pragma once

#include "spcnn/checkpoint.hpp"
#include "spcnn/config.hpp"
#include "spcnn/dataset.hpp"
#include "spcnn/errors.hpp"
#include "spcnn/eval.hpp"
#include "spcnn/gradcheck.hpp"
#include "spcnn/image.hpp"
#include "spcnn/kernels.hpp"
#include "spcnn/net.hpp"
#include "spcnn/net_gradcheck.hpp"
#include "spcnn/optimizer.hpp"
#include "spcnn/ppm.hpp"
#include "spcnn/pyramid.hpp"
#include "spcnn/rng.hpp"
#include "spcnn/synth.hpp"
#include "spcnn/tensor.hpp"
#include "spcnn/trainer.hpp"
