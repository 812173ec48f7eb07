#pragma once

#include <string>

#include "cfts/search.hpp"
#include "cfts/series.hpp"

namespace cfts {

struct OverlayLabels {
  std::string original_prediction;
  std::string target;
};

/// Stacked-row SVG: each variable's original trace in black, and for every
/// substituted variable the counterfactual values in red drawn beneath it
/// (restricted to the substitution window, if any). The vertical scale is
/// shared by all rows: global min/max over both series with 5% padding.
/// Output bytes are a pure function of the inputs.
std::string render_overlay(const MultivariateSeries& original, const MultivariateSeries& counterfactual,
                           const SubstitutionSet& subs, const OverlayLabels& labels);

}  // namespace cfts
