#pragma once

#include "latmed/autoencoder.hpp"
#include "latmed/backfit.hpp"
#include "latmed/dataset.hpp"
#include "latmed/models.hpp"
#include "latmed/simulation.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace latmed {

using Json = nlohmann::json;

// CSV with header T,M1..Mk,Y,X1..Xp and an optional trailing U column
// holding truth.u_true. Values are written with 17 significant digits so a
// write/read cycle is exact.
void write_csv(std::ostream& out, const MediationDataset& dataset, bool include_u = true);
void write_csv(const std::string& path, const MediationDataset& dataset, bool include_u = true);
MediationDataset read_csv(std::istream& in);
MediationDataset read_csv(const std::string& path);

void write_matrix_csv(const std::string& path, const Matrix& m, const std::string& prefix);

Json to_json(const Vector& v);
Json to_json(const Matrix& m);
Vector vector_from_json(const Json& j, const std::string& key);
Matrix matrix_from_json(const Json& j, const std::string& key);

Json to_json(const SimulationTruth& truth);
Json to_json(const LinearSimConfig& config);
Json to_json(const BackfitConfig& config);
Json to_json(const AutoencoderConfig& config);
Json to_json(const OutputModels& models);
Json to_json(const AutoencoderWeights& weights);
Json to_json(const FitResult& fit);
Json to_json(const EffectEstimates& effects);

/// Simulation config: "generator" (linear | lowrank | fullrank, default
/// linear), "n" (required), "k", "p", "profile" (default | table1), "seed"
/// and any LinearSimConfig field as an override. Errors name the key.
struct SimulationRequest {
    Generator generator = Generator::Linear;
    LinearSimConfig config;
};
SimulationRequest simulation_from_json(const Json& j);

/// Every field optional; unknown keys are rejected.
BackfitConfig backfit_from_json(const Json& j, BackfitConfig base = {});
AutoencoderConfig autoencoder_from_json(const Json& j, AutoencoderConfig base = {});

OutputModels models_from_json(const Json& j);
AutoencoderWeights autoencoder_weights_from_json(const Json& j);
FitResult fit_from_json(const Json& j);

Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& j);

}  // namespace latmed
