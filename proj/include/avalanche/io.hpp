#pragma once

#include <string>

#include <json.hpp>

#include "avalanche/allowed.hpp"
#include "avalanche/analysis.hpp"
#include "avalanche/dynamics.hpp"
#include "avalanche/engine.hpp"
#include "avalanche/lattice.hpp"

namespace avalanche::io {

using json = nlohmann::json;

// Lattice specs serialize as {d, radius | sites, gamma}; unknown keys are
// rejected.
json spec_to_json(const LatticeSpec& spec);
Lattice spec_from_json(const json& j);

json height_config_to_json(const HeightConfig& c);
HeightConfig height_config_from_json(const json& j);

json discrete_config_to_json(const DiscreteConfig& c);
DiscreteConfig discrete_config_from_json(const json& j);

json tree_to_json(const SpanningTree& t);
SpanningTree tree_from_json(const json& j, const Lattice& spec);

json decay_fit_to_json(const DecayFit& f);
json stationarity_to_json(const StationarityReport& r);
json gamma_limit_to_json(const GammaLimitReport& r);

/// CSV cell quoting per the comma/LF dialect.
std::string csv_quote(const std::string& s);
std::string format_double(double v);

/// Toppling matrix as CSV, row-major, header of site coordinates.
std::string matrix_to_csv(const TopplingMatrix& m);
/// Green table / kernel as (x, y, value) rows.
std::string green_to_csv(const GreenTable& g);
/// Avalanche records: origin, steps, avalanche size, dissipated, max count.
std::string records_to_csv(const LatticeSpec& spec, std::span<const AvalancheRecord> recs);

/// FNV-1a hash of a canonical JSON dump, for output self-description.
std::string config_hash(const json& j);

void write_file(const std::string& path, const std::string& content);

}  // namespace avalanche::io
