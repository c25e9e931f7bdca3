#pragma once

#include <string>

#include "faceseal/evaluation.hpp"

namespace faceseal {

// Minimal static figures (PNG), no plotting dependency: ROC curve and a
// horizontal BRA bar chart per transform.

void render_roc_plot(const RocResult& roc, const std::string& path);
void render_bra_bars(const EvalReport& report, const std::string& path);

}  // namespace faceseal
