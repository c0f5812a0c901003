#pragma once

#include <json.hpp>
#include <string>

#include "koop/dataset.hpp"
#include "koop/edmd.hpp"
#include "koop/networks.hpp"
#include "koop/trainer.hpp"

namespace koop {

inline constexpr const char* kToolVersion = "0.1.0";

// --- dataset ---------------------------------------------------------------
// Binary layout (little-endian throughout):
//   8-byte magic "KOOPDS01", u64 version, u64 state_dim, u64 trajectory
//   count, u64 seed, u64 descriptor length + JSON descriptor bytes, then per
//   trajectory: u64 snapshot count followed by state_dim * count doubles
//   (snapshot-major).
void save_dataset(const TimeSeriesDataset& ds, const std::string& path);
TimeSeriesDataset load_dataset(const std::string& path);

// Plain-text export: trajectory,step,x0..x{d-1} with 17 significant digits.
void export_dataset_csv(const TimeSeriesDataset& ds, const std::string& path);

// --- network checkpoints -----------------------------------------------------
struct Checkpoint {
  NetworkArch arch;
  Vector parameters;  // flat, declaration order
  std::uint64_t seed = 0;
};
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
std::unique_ptr<DictionaryNetwork> network_from_checkpoint(const Checkpoint& ckpt);

nlohmann::json arch_to_json(const NetworkArch& arch);
NetworkArch arch_from_json(const nlohmann::json& j);

// --- Koopman model -----------------------------------------------------------
// Stores the full spectral data plus the embedded dictionary so predictions
// reload without retraining.
void save_model(const KoopmanModel& model, std::uint64_t seed, const nlohmann::json& system,
                const std::string& path);
struct LoadedModel {
  KoopmanModel model;
  std::uint64_t seed = 0;
  nlohmann::json system;
};
LoadedModel load_model(const std::string& path);

// --- manifests and reports ---------------------------------------------------
struct ManifestArtifact {
  std::string name, path, hash;
};
nlohmann::json make_manifest(const nlohmann::json& config, const nlohmann::json& seeds,
                             const std::vector<ManifestArtifact>& artifacts);

void write_json(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json(const std::string& path);

void write_text(const std::string& text, const std::string& path);

// Training loss trace: epoch,loss,loss_pre_update rows.
void write_trace_csv(const TrainReport& report, const std::string& path);

// --- small utilities ----------------------------------------------------------
std::string format_g17(double x);            // shortest %.17g form
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string fnv1a64_hex(const std::string& bytes);
std::string hash_file(const std::string& path);  // fnv1a64 of the raw bytes
std::string iso8601_utc_now();

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json cmatrix_to_json(const ComplexMatrix& m);
ComplexMatrix cmatrix_from_json(const nlohmann::json& j);

}  // namespace koop
