#include "airfc/serialization.hpp"

#include "airfc/errors.hpp"

#include <fstream>

namespace airfc {

using nlohmann::json;

json matrix_to_json(const CMatrix& m) {
    json data = json::array();
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) data.push_back({m(i, j).real(), m(i, j).imag()});
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

CMatrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Index>(data.size()) != rows * cols)
        throw shape_error("matrix entry count does not match rows x cols");
    CMatrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index k = 0; k < cols; ++k) {
            const auto& e = data[static_cast<std::size_t>(i * cols + k)];
            if (!e.is_array() || e.size() != 2) throw std::invalid_argument("matrix entries must be [real, imag] pairs");
            m(i, k) = {e[0].get<double>(), e[1].get<double>()};
        }
    return m;
}

json channel_set_to_json(const ChannelSet& ch) {
    json hops = json::array();
    for (const auto& h : ch.hops) hops.push_back(matrix_to_json(h));
    return {{"format", "airfc-chset"},
            {"version", 1},
            {"seed", ch.realization_seed},
            {"carrier_frequency_hz", ch.carrier_frequency_hz},
            {"n_t", ch.n_t()},
            {"n_r", ch.n_r()},
            {"relays_per_group", ch.relays_per_group()},
            {"direct", ch.direct ? matrix_to_json(*ch.direct) : json(nullptr)},
            {"hops", std::move(hops)}};
}

ChannelSet channel_set_from_json(const json& j) {
    if (j.value("format", "") != "airfc-chset") throw std::invalid_argument("not an airfc-chset document");
    ChannelSet ch;
    ch.realization_seed = j.at("seed").get<std::uint64_t>();
    ch.carrier_frequency_hz = j.at("carrier_frequency_hz").get<double>();
    for (const auto& h : j.at("hops")) ch.hops.push_back(matrix_from_json(h));
    if (!j.at("direct").is_null()) ch.direct = matrix_from_json(j.at("direct"));
    ch.validate();
    if (j.contains("n_t") && j["n_t"].get<Index>() != ch.n_t()) throw shape_error("chset n_t disagrees with hops");
    if (j.contains("n_r") && j["n_r"].get<Index>() != ch.n_r()) throw shape_error("chset n_r disagrees with hops");
    return ch;
}

json weights_to_json(const WeightFile& wf) {
    return {{"format", "airfc-wmat"}, {"version", 1}, {"W", matrix_to_json(wf.w)}, {"b", matrix_to_json(wf.b)}};
}

WeightFile weights_from_json(const json& j) {
    if (j.value("format", "") != "airfc-wmat") throw std::invalid_argument("not an airfc-wmat document");
    WeightFile wf;
    wf.w = matrix_from_json(j.at("W"));
    if (wf.w.rows() != wf.w.cols()) throw shape_error("weight matrix must be square");
    if (j.contains("b")) {
        const CMatrix b = matrix_from_json(j.at("b"));
        if (b.cols() != 1 || b.rows() != wf.w.rows()) throw shape_error("bias must be an N x 1 matrix");
        wf.b = b.col(0);
    } else {
        wf.b = CVector::Zero(wf.w.rows());
    }
    if (!wf.w.allFinite() || !wf.b.allFinite()) throw std::invalid_argument("weight file contains non-finite entries");
    return wf;
}

json params_to_json(const AirFcParams& p) {
    json gains = json::array();
    for (const auto& a : p.gains) gains.push_back(matrix_to_json(a));
    return {{"F1", matrix_to_json(p.f1)}, {"F2", matrix_to_json(p.f2)}, {"gains", std::move(gains)}};
}

AirFcParams params_from_json(const json& j) {
    AirFcParams p;
    p.f1 = matrix_from_json(j.at("F1"));
    p.f2 = matrix_from_json(j.at("F2"));
    for (const auto& g : j.at("gains")) p.gains.push_back(matrix_from_json(g).col(0));
    return p;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return json::parse(in);
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace airfc
