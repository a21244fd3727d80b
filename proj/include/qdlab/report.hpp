#pragma once

#include <string>

#include <json.hpp>

#include "qdlab/balayage.hpp"
#include "qdlab/criteria.hpp"
#include "qdlab/degree.hpp"
#include "qdlab/schwarz.hpp"
#include "qdlab/sphbal.hpp"

namespace qdlab {

using Json = nlohmann::json;

// Stable 64-bit digest of a JSON value: FNV-1a over the sorted-key dump.
std::uint64_t fnv1a64(const std::string& bytes);
std::string config_hash(const Json& config);

Json to_json(const ResidualReport& r);
Json to_json(const PotentialSolution& sol);  // diagnostics only, no field data
Json to_json(const DomainGraph& graph);      // summary only
Json to_json(const CriterionVerdict& v);
Json to_json(const CriteriaReport& r);
Json to_json(const FieldStats& s);
Json to_json(const CrResidual& r);
Json to_json(const TangencyReport& r);
Json to_json(const GammaTrace& t);
Json to_json(const HessianReport& r);
Json to_json(const TubeMass& t);
Json to_json(const PreimageResult& r);
Json to_json(const DegreeResult& r);
Json to_json(const SchwarzFunctionChecks& c);
Json to_json(const NearestPointReport& r);
Json to_json(const SphereDensity& d);  // grid and mass summary, no samples
Json to_json(const HemisphereConvexity& c);

// Report files. JSON bodies gain a "config_hash" member; CSV files carry the
// hash in a leading "# config_hash=..." comment.
void write_json_report(const std::string& path, Json body, const std::string& hash);
Json read_json_file(const std::string& path);
std::string read_report_hash(const std::string& path);  // JSON or CSV

void write_csv_criteria(const std::string& path, const CriteriaReport& r,
                        const std::string& hash);
void write_csv_gamma(const std::string& path, const GammaTrace& t, const std::string& hash);
void write_csv_sphere(const std::string& path, const SphereDensity& d, const std::string& hash);
void write_csv_mesh(const std::string& path, const BoundaryMesh& mesh, const std::string& hash);

}  // namespace qdlab
