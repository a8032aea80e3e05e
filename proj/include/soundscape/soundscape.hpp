#pragma once

#include "soundscape/audio_io.hpp"
#include "soundscape/features.hpp"
#include "soundscape/embedding.hpp"
#include "soundscape/clustering.hpp"
#include "soundscape/spatial.hpp"
#include "soundscape/synthetic.hpp"
#include "soundscape/scene.hpp"
#include "soundscape/trajectory.hpp"
#include "soundscape/artifacts.hpp"
#include "soundscape/pipeline.hpp"
