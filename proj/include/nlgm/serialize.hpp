#pragma once

// JSON mappings for every value type that appears in a report or spec file.

#include "json.hpp"
#include "nlgm/factor.hpp"
#include "nlgm/reliability.hpp"
#include "nlgm/simulation.hpp"
#include "nlgm/stats.hpp"
#include "nlgm/validity.hpp"

namespace nlgm {

using Json = nlohmann::json;

Json to_json_matrix(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json to_json_vector(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

ReliabilityMethod reliability_method_from_string(const std::string& s);
CriterionMode criterion_mode_from_string(const std::string& s);
Rotation rotation_from_string(const std::string& s);
CttStructure ctt_structure_from_string(const std::string& s);
SplitScheme::Kind split_kind_from_string(const std::string& s);

void to_json(Json& j, const Interval& v);
void from_json(const Json& j, Interval& v);
void to_json(Json& j, const BootstrapCI& v);
void from_json(const Json& j, BootstrapCI& v);
void to_json(Json& j, const SplitScheme& v);
void from_json(const Json& j, SplitScheme& v);
void to_json(Json& j, const ReliabilityEstimate& v);
void from_json(const Json& j, ReliabilityEstimate& v);
void to_json(Json& j, const SplitHalfResult& v);
void from_json(const Json& j, SplitHalfResult& v);
void to_json(Json& j, const CriterionValidityReport& v);
void from_json(const Json& j, CriterionValidityReport& v);
void to_json(Json& j, const MtmmTable& v);
void from_json(const Json& j, MtmmTable& v);
void to_json(Json& j, const MtmmViolation& v);
void from_json(const Json& j, MtmmViolation& v);
void to_json(Json& j, const MtmmSummary& v);
void from_json(const Json& j, MtmmSummary& v);
void to_json(Json& j, const FactorModel& v);
void from_json(const Json& j, FactorModel& v);
void to_json(Json& j, const CfaFit& v);
void from_json(const Json& j, CfaFit& v);
void to_json(Json& j, const FactorScores& v);
void from_json(const Json& j, FactorScores& v);

// Spec files. Seeds are mandatory.
void to_json(Json& j, const CttSpec& v);
void from_json(const Json& j, CttSpec& v);
void to_json(Json& j, const FactorSimSpec& v);
void from_json(const Json& j, FactorSimSpec& v);

}  // namespace nlgm
