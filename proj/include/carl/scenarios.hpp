#pragma once

#include <string>
#include <vector>

#include "carl/twin.hpp"

namespace carl::twin {

/// Two co-located cells (1900/2100 MHz); every UE starts on the 1900 MHz cell, which is overloaded.
ScenarioConfig hotspot_scenario();

/// Hotspot variant on 2300/2600 MHz with bursty, diurnally modulated demand.
ScenarioConfig shifted_hotspot_scenario();

/// Three base stations, twelve cells on three frequencies.
ScenarioConfig twelve_cell_scenario();

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
ScenarioConfig preset_scenario(const std::string& name);

}  // namespace carl::twin
