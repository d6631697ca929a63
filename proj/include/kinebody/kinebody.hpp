#pragma once

#include "kinebody/assets.hpp"
#include "kinebody/body_model.hpp"
#include "kinebody/face_model.hpp"
#include "kinebody/geometry.hpp"
#include "kinebody/ik.hpp"
#include "kinebody/io.hpp"
#include "kinebody/kba.hpp"
#include "kinebody/maps.hpp"
#include "kinebody/mesh.hpp"
#include "kinebody/pipeline.hpp"
#include "kinebody/rng.hpp"
#include "kinebody/rotation.hpp"
#include "kinebody/types.hpp"
