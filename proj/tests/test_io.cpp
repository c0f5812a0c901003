#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "koop/io.hpp"
#include "koop/systems.hpp"

using namespace koop;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("koop_io_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

TimeSeriesDataset sample_dataset(std::uint64_t seed) {
  DuffingParams p;
  DuffingDatasetParams dp;
  dp.n_trajectories = 6;
  dp.steps = 5;
  return generate_duffing_dataset(p, dp, seed);
}

}  // namespace

TEST_CASE("dataset round-trips bitwise through the binary format") {
  TempDir tmp;
  const TimeSeriesDataset ds = sample_dataset(42);
  const std::string path = tmp.file("ds.bin");
  save_dataset(ds, path);
  const TimeSeriesDataset loaded = load_dataset(path);

  CHECK(loaded.state_dim == ds.state_dim);
  CHECK(loaded.seed == ds.seed);
  CHECK(loaded.system == ds.system);
  REQUIRE(loaded.trajectories.size() == ds.trajectories.size());
  for (std::size_t t = 0; t < ds.trajectories.size(); ++t)
    CHECK(loaded.trajectories[t] == ds.trajectories[t]);
}

TEST_CASE("saving the same dataset twice produces byte-identical files") {
  TempDir tmp;
  const TimeSeriesDataset ds = sample_dataset(7);
  save_dataset(ds, tmp.file("a.bin"));
  save_dataset(ds, tmp.file("b.bin"));
  CHECK(slurp(tmp.file("a.bin")) == slurp(tmp.file("b.bin")));
}

TEST_CASE("corrupted or truncated dataset files are rejected") {
  TempDir tmp;
  const TimeSeriesDataset ds = sample_dataset(3);
  const std::string path = tmp.file("ds.bin");
  save_dataset(ds, path);

  std::string bytes = slurp(path);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::ofstream(tmp.file("bad_magic.bin"), std::ios::binary) << bad_magic;
  CHECK_THROWS_AS(load_dataset(tmp.file("bad_magic.bin")), InvalidInput);

  std::ofstream(tmp.file("truncated.bin"), std::ios::binary)
      << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(load_dataset(tmp.file("truncated.bin")), InvalidInput);

  CHECK_THROWS_AS(load_dataset(tmp.file("missing.bin")), InvalidInput);
}

TEST_CASE("dataset csv export uses 17 significant digits") {
  TempDir tmp;
  const TimeSeriesDataset ds = sample_dataset(11);
  const std::string path = tmp.file("ds.csv");
  export_dataset_csv(ds, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "trajectory,step,x0,x1");

  std::string line;
  std::getline(in, line);
  // First row is trajectory 0, step 0; parse back the two coordinates.
  const std::size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
  const std::size_t c3 = line.find(',', c2 + 1);
  const double x0 = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
  const double x1 = std::stod(line.substr(c3 + 1));
  CHECK(x0 == ds.trajectories[0](0, 0));
  CHECK(x1 == ds.trajectories[0](1, 0));

  Index rows = 1;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == ds.snapshot_count());
}

TEST_CASE("checkpoints round-trip and rebuild an identical network") {
  TempDir tmp;
  NetworkArch arch;
  arch.kind = NetworkKind::node;
  arch.input_dim = 2;
  arch.output_dim = 5;
  arch.width = 7;
  arch.field_width = 4;
  auto net = make_network(arch, 99);

  Checkpoint ckpt{arch, net->parameters(), 99};
  const std::string path = tmp.file("ckpt.json");
  save_checkpoint(ckpt, path);
  const Checkpoint loaded = load_checkpoint(path);

  CHECK(loaded.seed == 99);
  CHECK(loaded.arch.kind == arch.kind);
  CHECK(loaded.arch.width == arch.width);
  CHECK(loaded.arch.field_width == arch.field_width);
  CHECK(loaded.parameters == net->parameters());

  auto rebuilt = network_from_checkpoint(loaded);
  const Matrix X = Matrix::Random(2, 4);
  CHECK((rebuilt->forward(X) - net->forward(X)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint with a mismatched parameter count is rejected on load") {
  TempDir tmp;
  NetworkArch arch;
  arch.kind = NetworkKind::mlp;
  arch.input_dim = 2;
  arch.output_dim = 3;
  arch.width = 4;
  arch.depth = 2;
  Checkpoint ckpt{arch, Vector::Zero(5), 1};  // wrong size on purpose
  const std::string path = tmp.file("bad.json");
  save_checkpoint(ckpt, path);
  CHECK_THROWS_AS(load_checkpoint(path), InvalidInput);
}

TEST_CASE("models round-trip with spectra, dictionary, and system descriptor") {
  TempDir tmp;
  const TimeSeriesDataset ds = sample_dataset(21);
  TrainConfig cfg;
  cfg.dictionary_size = 8;
  cfg.max_epochs = 10;
  cfg.epsilon = 1e-9;
  cfg.seed = 5;
  cfg.arch.kind = NetworkKind::mlp;
  cfg.arch.width = 10;
  cfg.arch.depth = 2;
  const TrainOutput out = train(cfg, ds);

  const std::string path = tmp.file("model.json");
  save_model(out.model, cfg.seed, ds.system, path);
  const LoadedModel loaded = load_model(path);

  CHECK(loaded.seed == 5);
  CHECK(loaded.system == ds.system);
  CHECK(loaded.model.K == out.model.K);
  CHECK(loaded.model.B == out.model.B);
  CHECK(loaded.model.eigenvalues == out.model.eigenvalues);
  CHECK(loaded.model.right == out.model.right);
  CHECK(loaded.model.left == out.model.left);
  CHECK(loaded.model.modes == out.model.modes);
  REQUIRE(loaded.model.dictionary != nullptr);
  CHECK(loaded.model.dictionary->size() == out.model.dictionary->size());

  Vector x0(2);
  x0 << 0.4, -0.2;
  const Matrix a = predict(out.model, x0, 5);
  const Matrix b = predict(loaded.model, x0, 5);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model files with a projections-only dictionary load too") {
  TempDir tmp;
  TimeSeriesDataset ds;
  ds.state_dim = 1;
  Matrix traj(1, 6);
  traj(0, 0) = 1.0;
  for (Index s = 1; s < 6; ++s) traj(0, s) = 0.5 * traj(0, s - 1);
  ds.trajectories.push_back(traj);
  auto dict = std::make_shared<const Dictionary>(Dictionary::projections_only(1, true));
  const GramPair gp = compute_gram(*dict, ds);
  const KoopmanModel model = decompose(compute_K(gp.G, gp.A, 0.0), dict->observable_matrix(), dict);

  const std::string path = tmp.file("plain.json");
  save_model(model, 0, nlohmann::json{{"name", "halving"}}, path);
  const LoadedModel loaded = load_model(path);
  REQUIRE(loaded.model.dictionary != nullptr);
  CHECK(!loaded.model.dictionary->has_network());
  Vector x0(1);
  x0 << 2.0;
  CHECK(predict(loaded.model, x0, 2)(0, 2) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("json helpers round-trip and reject malformed files") {
  TempDir tmp;
  const nlohmann::json j{{"a", 1}, {"b", {1, 2, 3}}, {"c", "text"}};
  const std::string path = tmp.file("x.json");
  write_json(j, path);
  CHECK(read_json(path) == j);

  std::ofstream(tmp.file("broken.json")) << "{ not json";
  CHECK_THROWS_AS(read_json(tmp.file("broken.json")), InvalidInput);
  CHECK_THROWS_AS(read_json(tmp.file("absent.json")), InvalidInput);
}

TEST_CASE("matrix json round-trips are exact") {
  Matrix m(2, 3);
  m << 1.0 / 3.0, -1e-300, 0.1, 2.0, 3.5e200, -7.25;
  CHECK(matrix_from_json(matrix_to_json(m)) == m);

  ComplexMatrix c(2, 2);
  c << Complex(0.1, -0.2), Complex(1e-5, 2e3), Complex(-1.0 / 7.0, 0.0), Complex(0, 1);
  CHECK(cmatrix_from_json(cmatrix_to_json(c)) == c);
}

TEST_CASE("format_g17 round-trips doubles exactly") {
  for (double x : {1.0 / 3.0, -0.1, 1e-300, 6.9e-3, 0.0, 123456.789012345678}) {
    CHECK(std::stod(format_g17(x)) == x);
  }
}

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(fnv1a64(nullptr, 0) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ULL);
  CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("manifests list artifacts with hashes and a stable config hash") {
  TempDir tmp;
  std::ofstream(tmp.file("artifact.txt")) << "payload";
  const std::string hash = hash_file(tmp.file("artifact.txt"));

  const nlohmann::json config{{"alpha", 1.0}, {"steps", 10}};
  const nlohmann::json seeds{{"dataset", 42}};
  const nlohmann::json m1 =
      make_manifest(config, seeds, {{"data", tmp.file("artifact.txt"), hash}});
  const nlohmann::json m2 =
      make_manifest(config, seeds, {{"data", tmp.file("artifact.txt"), hash}});

  CHECK(m1.at("config_hash") == m2.at("config_hash"));
  CHECK(m1.at("config") == config);
  CHECK(m1.at("seeds") == seeds);
  CHECK(m1.at("tool_version") == kToolVersion);
  CHECK(m1.at("artifacts").at("data").at("fnv1a64") == hash);
  CHECK(m1.contains("created"));

  const nlohmann::json other = make_manifest({{"alpha", 2.0}}, seeds, {});
  CHECK(other.at("config_hash") != m1.at("config_hash"));
}

TEST_CASE("loss trace csv has one row per epoch with lossless values") {
  TempDir tmp;
  TrainReport report;
  report.loss = {10.5, 3.25, 1.0 / 3.0};
  report.loss_pre_update = {std::numeric_limits<double>::quiet_NaN(), 8.125, 2.5};
  const std::string path = tmp.file("trace.csv");
  write_trace_csv(report, path);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,loss,loss_pre_update");
  std::getline(in, line);
  CHECK(line == "1,10.5,nan");
  std::getline(in, line);
  CHECK(line == "2,3.25,8.125");
  std::getline(in, line);
  CHECK(line.substr(0, 2) == "3,");
  const double parsed = std::stod(line.substr(2, line.find(',', 2) - 2));
  CHECK(parsed == 1.0 / 3.0);
}
