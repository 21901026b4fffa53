#pragma once

#include <string>

#include "gsyn/cdbn.hpp"

namespace gsyn {

inline constexpr int kModelFormatVersion = 1;

void save_dbn(const DbnModel& model, const std::string& path);
DbnModel load_dbn(const std::string& path);

void save_cdbn(const CdbnModel& model, const std::string& path);
CdbnModel load_cdbn(const std::string& path);

// Returns "gsyn-dbn" or "gsyn-cdbn" without loading the full model.
std::string model_format(const std::string& path);

}  // namespace gsyn
