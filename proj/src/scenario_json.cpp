#include "stochcbf/scenario_json.hpp"

#include <fstream>

namespace stochcbf {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

ordered_json matrix_to_json(const Mat& m) {
    ordered_json rows = ordered_json::array();
    for (long i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

ordered_json vector_to_json(const Vec& v) {
    ordered_json arr = ordered_json::array();
    for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Mat matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ContractViolation("scenario json: bad matrix");
    const long rows = static_cast<long>(j.size());
    const long cols = static_cast<long>(j.at(0).size());
    Mat m(rows, cols);
    for (long i = 0; i < rows; ++i) {
        const auto& row = j.at(i);
        if (static_cast<long>(row.size()) != cols)
            throw ContractViolation("scenario json: ragged matrix");
        for (long c = 0; c < cols; ++c) m(i, c) = row.at(c).get<double>();
    }
    return m;
}

Vec vector_from_json(const json& j) {
    Vec v(static_cast<long>(j.size()));
    for (long i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
    return v;
}

ordered_json condition_to_json(const CbfCondition& c) {
    ordered_json out;
    out["type"] = family_name(c);
    if (const auto* lin = std::get_if<LinearZeroing>(&c.family)) {
        out["alpha"] = lin->alpha;
    } else if (const auto* cm = std::get_if<CMartingale>(&c.family)) {
        out["beta"] = cm->beta;
    } else if (const auto* p = std::get_if<PolynomialSquared>(&c.family)) {
        out["beta"] = p->beta;
        out["bound"] = p->bound;
    } else {
        out["beta"] = std::get<ExpQuadratic>(c.family).beta;
    }
    out["barrier_index"] = c.barrier_index;
    return out;
}

CbfCondition condition_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    const int idx = j.value("barrier_index", 0);
    if (type == "linear_zeroing") return make_linear_zeroing(j.at("alpha").get<double>(), idx);
    if (type == "c_martingale") return make_c_martingale(j.at("beta").get<double>(), idx);
    if (type == "polynomial_squared")
        return make_polynomial_squared(j.at("beta").get<double>(), j.at("bound").get<double>(),
                                       idx);
    if (type == "exp_quadratic") return make_exp_quadratic(j.at("beta").get<double>(), idx);
    throw ContractViolation("scenario json: unknown condition type " + type);
}

}  // namespace

ordered_json scenario_to_json(const Scenario& s) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["name"] = s.name;
    j["description"] = s.description;
    j["dynamics"] = {{"type", s.dynamics.type}, {"dt", s.dynamics.dt}};
    j["noise_cov"] = matrix_to_json(s.system.noise_cov());
    ordered_json barriers = ordered_json::array();
    for (const auto& b : s.safe_set.barriers()) {
        ordered_json jb;
        jb["A"] = matrix_to_json(b.quad());
        jb["b"] = vector_to_json(b.lin());
        jb["c"] = b.constant();
        jb["scale"] = b.scale();
        if (b.upper_bound()) jb["upper_bound"] = *b.upper_bound();
        barriers.push_back(std::move(jb));
    }
    j["barriers"] = std::move(barriers);
    ordered_json conds = ordered_json::array();
    for (const auto& c : s.conditions) conds.push_back(condition_to_json(c));
    j["conditions"] = std::move(conds);
    j["horizon"] = s.horizon;
    j["initial_state"] = vector_to_json(s.initial_state);
    ordered_json pol;
    pol["type"] = s.nominal_policy.type;
    if (s.nominal_policy.type == "goal_seeking") pol["goal"] = vector_to_json(s.nominal_policy.goal);
    j["nominal_policy"] = std::move(pol);
    j["dt"] = s.dt;
    return j;
}

Scenario scenario_from_json(const json& j) {
    const int version = j.value("schema_version", 1);
    if (version != kSchemaVersion)
        throw ContractViolation("scenario json: unsupported schema_version");
    DynamicsSpec dyn{j.at("dynamics").at("type").get<std::string>(),
                     j.at("dynamics").at("dt").get<double>()};
    Mat noise_cov = matrix_from_json(j.at("noise_cov"));
    std::vector<QuadraticBarrier> barriers;
    for (const auto& jb : j.at("barriers")) {
        std::optional<double> ub;
        if (jb.contains("upper_bound")) ub = jb.at("upper_bound").get<double>();
        barriers.emplace_back(matrix_from_json(jb.at("A")), vector_from_json(jb.at("b")),
                              jb.at("c").get<double>(), jb.value("scale", 1.0), ub);
    }
    std::vector<CbfCondition> conditions;
    for (const auto& jc : j.at("conditions")) conditions.push_back(condition_from_json(jc));
    NominalPolicy policy;
    policy.type = j.at("nominal_policy").at("type").get<std::string>();
    if (j.at("nominal_policy").contains("goal"))
        policy.goal = vector_from_json(j.at("nominal_policy").at("goal"));
    return make_scenario(j.value("name", ""), j.value("description", ""), std::move(dyn),
                         std::move(noise_cov), SafeSet(std::move(barriers)),
                         std::move(conditions), j.at("horizon").get<int>(),
                         vector_from_json(j.at("initial_state")), std::move(policy));
}

void save_scenario(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ContractViolation("cannot open for writing: " + path);
    out << scenario_to_json(s).dump(2) << '\n';
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractViolation("cannot open scenario file: " + path);
    json j;
    in >> j;
    return scenario_from_json(j);
}

}  // namespace stochcbf
