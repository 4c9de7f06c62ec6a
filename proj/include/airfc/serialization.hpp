#pragma once

#include "airfc/channel_model.hpp"
#include "airfc/system.hpp"

#include <json.hpp>

#include <filesystem>

namespace airfc {

// Matrices are stored as {"rows": r, "cols": c, "data": [[re, im], ...]} with `data`
// in row-major order. Doubles are written with round-trip precision.

nlohmann::json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const nlohmann::json& j);

/// `.chset.json`: {"format": "airfc-chset", "version": 1, "seed", "carrier_frequency_hz",
/// "n_t", "n_r", "relays_per_group", "direct": matrix|null, "hops": [matrix...]}
nlohmann::json channel_set_to_json(const ChannelSet& ch);
ChannelSet channel_set_from_json(const nlohmann::json& j);

/// `.wmat.json`: {"format": "airfc-wmat", "version": 1, "W": matrix, "b": matrix (N x 1)}
struct WeightFile {
    CMatrix w;
    CVector b;
};
nlohmann::json weights_to_json(const WeightFile& wf);
WeightFile weights_from_json(const nlohmann::json& j);

/// Solution parameters: {"F1": matrix, "F2": matrix, "gains": [matrix (K_l x 1)...]}
nlohmann::json params_to_json(const AirFcParams& p);
AirFcParams params_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace airfc
