#pragma once

#include "defectsim/annotation.hpp"
#include "defectsim/dataset.hpp"
#include "defectsim/defect.hpp"
#include "defectsim/error.hpp"
#include "defectsim/hash.hpp"
#include "defectsim/image_io.hpp"
#include "defectsim/imaging.hpp"
#include "defectsim/mesh.hpp"
#include "defectsim/noise.hpp"
#include "defectsim/parallel.hpp"
#include "defectsim/photometric_stereo.hpp"
#include "defectsim/render.hpp"
#include "defectsim/scene_io.hpp"
#include "defectsim/texture_synthesis.hpp"
