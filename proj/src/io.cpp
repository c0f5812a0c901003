#include "koop/io.hpp"

#include <bit>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace koop {

namespace {

constexpr char kDatasetMagic[8] = {'K', 'O', 'O', 'P', 'D', 'S', '0', '1'};

void require_little_endian() {
  if constexpr (std::endian::native != std::endian::little)
    throw NumericalError("file formats are little-endian; big-endian hosts are unsupported");
}

void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
  ensure_parent_dir(path);
  std::ofstream out(path, mode);
  if (!out) throw InvalidInput("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw InvalidInput("cannot open for reading: " + path);
  return in;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw InvalidInput("truncated dataset file: " + path);
  return v;
}

}  // namespace

void save_dataset(const TimeSeriesDataset& ds, const std::string& path) {
  require_little_endian();
  ds.validate();
  std::ofstream out = open_out(path, std::ios::binary);

  out.write(kDatasetMagic, sizeof kDatasetMagic);
  put_u64(out, 1);  // format version
  put_u64(out, static_cast<std::uint64_t>(ds.state_dim));
  put_u64(out, static_cast<std::uint64_t>(ds.trajectories.size()));
  put_u64(out, ds.seed);

  const std::string desc = ds.system.dump();
  put_u64(out, desc.size());
  out.write(desc.data(), static_cast<std::streamsize>(desc.size()));

  for (const Matrix& t : ds.trajectories) {
    put_u64(out, static_cast<std::uint64_t>(t.cols()));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.size())));
  }
  if (!out) throw InvalidInput("write failed: " + path);
}

TimeSeriesDataset load_dataset(const std::string& path) {
  require_little_endian();
  std::ifstream in = open_in(path, std::ios::binary);

  char magic[8] = {};
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kDatasetMagic, sizeof magic) != 0)
    throw InvalidInput("not a dataset file (bad magic): " + path);
  const std::uint64_t version = get_u64(in, path);
  if (version != 1)
    throw InvalidInput("unsupported dataset format version " + std::to_string(version) + ": " +
                       path);

  TimeSeriesDataset ds;
  ds.state_dim = static_cast<Index>(get_u64(in, path));
  const std::uint64_t n_traj = get_u64(in, path);
  ds.seed = get_u64(in, path);

  const std::uint64_t desc_len = get_u64(in, path);
  std::string desc(desc_len, '\0');
  if (!in.read(desc.data(), static_cast<std::streamsize>(desc_len)))
    throw InvalidInput("truncated dataset file: " + path);
  ds.system = desc.empty() ? nlohmann::json::object() : nlohmann::json::parse(desc);

  ds.trajectories.resize(n_traj);
  for (std::uint64_t t = 0; t < n_traj; ++t) {
    const std::uint64_t len = get_u64(in, path);
    Matrix traj(ds.state_dim, static_cast<Index>(len));
    if (!in.read(reinterpret_cast<char*>(traj.data()),
                 static_cast<std::streamsize>(sizeof(double) *
                                              static_cast<std::size_t>(traj.size()))))
      throw InvalidInput("truncated dataset file: " + path);
    ds.trajectories[t] = std::move(traj);
  }
  ds.validate();
  return ds;
}

void export_dataset_csv(const TimeSeriesDataset& ds, const std::string& path) {
  std::ofstream out = open_out(path, std::ios::out);
  out << "trajectory,step";
  for (Index i = 0; i < ds.state_dim; ++i) out << ",x" << i;
  out << "\n";
  for (std::size_t t = 0; t < ds.trajectories.size(); ++t) {
    const Matrix& traj = ds.trajectories[t];
    for (Index s = 0; s < traj.cols(); ++s) {
      out << t << "," << s;
      for (Index i = 0; i < ds.state_dim; ++i) out << "," << format_g17(traj(i, s));
      out << "\n";
    }
  }
  if (!out) throw InvalidInput("write failed: " + path);
}

// ---------------------------------------------------------------------------

nlohmann::json arch_to_json(const NetworkArch& arch) {
  return {{"kind", arch.kind == NetworkKind::mlp ? "mlp" : "node"},
          {"input_dim", arch.input_dim},
          {"output_dim", arch.output_dim},
          {"width", arch.width},
          {"depth", arch.depth},
          {"field_width", arch.field_width},
          {"init", arch.init == InitScheme::inverse ? "inverse" : "literal"},
          {"field_init_std", arch.field_init_std},
          {"time_span", {arch.time_span[0], arch.time_span[1]}}};
}

NetworkArch arch_from_json(const nlohmann::json& j) {
  NetworkArch arch;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "mlp")
    arch.kind = NetworkKind::mlp;
  else if (kind == "node")
    arch.kind = NetworkKind::node;
  else
    throw InvalidInput("unknown network kind: " + kind);
  arch.input_dim = j.at("input_dim").get<Index>();
  arch.output_dim = j.at("output_dim").get<Index>();
  arch.width = j.at("width").get<Index>();
  arch.depth = j.at("depth").get<Index>();
  arch.field_width = j.at("field_width").get<Index>();
  const std::string init = j.at("init").get<std::string>();
  if (init == "inverse")
    arch.init = InitScheme::inverse;
  else if (init == "literal")
    arch.init = InitScheme::literal;
  else
    throw InvalidInput("unknown init scheme: " + init);
  arch.field_init_std = j.at("field_init_std").get<double>();
  arch.time_span[0] = j.at("time_span").at(0).get<double>();
  arch.time_span[1] = j.at("time_span").at(1).get<double>();
  return arch;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json j{{"format", "koop-checkpoint"},
                   {"version", 1},
                   {"seed", ckpt.seed},
                   {"arch", arch_to_json(ckpt.arch)},
                   {"parameters", std::vector<double>(ckpt.parameters.data(),
                                                      ckpt.parameters.data() +
                                                          ckpt.parameters.size())}};
  write_json(j, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  const nlohmann::json j = read_json(path);
  if (j.value("format", "") != "koop-checkpoint")
    throw InvalidInput("not a checkpoint file: " + path);
  if (j.value("version", 0) != 1)
    throw InvalidInput("unsupported checkpoint version in " + path);

  Checkpoint ckpt;
  ckpt.seed = j.at("seed").get<std::uint64_t>();
  ckpt.arch = arch_from_json(j.at("arch"));
  const auto params = j.at("parameters").get<std::vector<double>>();
  ckpt.parameters = Eigen::Map<const Vector>(params.data(), static_cast<Index>(params.size()));
  if (ckpt.parameters.size() != count_parameters(ckpt.arch))
    throw InvalidInput("checkpoint parameter count does not match its architecture: " + path);
  return ckpt;
}

std::unique_ptr<DictionaryNetwork> network_from_checkpoint(const Checkpoint& ckpt) {
  std::unique_ptr<DictionaryNetwork> net = make_network(ckpt.arch, ckpt.seed);
  net->set_parameters(ckpt.parameters);
  return net;
}

// ---------------------------------------------------------------------------

void save_model(const KoopmanModel& model, std::uint64_t seed, const nlohmann::json& system,
                const std::string& path) {
  if (!model.dictionary) throw InvalidInput("save_model: model has no dictionary");
  const Dictionary& dict = *model.dictionary;

  nlohmann::json jdict{{"state_dim", dict.state_dim()},
                       {"include_constant", dict.include_constant()}};
  if (dict.has_network()) {
    const DictionaryNetwork& net = dict.network();
    jdict["network"] = {{"arch", arch_to_json(net.arch())},
                        {"parameters",
                         std::vector<double>(net.parameters().data(),
                                             net.parameters().data() +
                                                 net.parameters().size())}};
  } else {
    jdict["network"] = nullptr;
  }

  nlohmann::json j{{"format", "koop-model"},
                   {"version", 1},
                   {"seed", seed},
                   {"system", system},
                   {"dictionary", jdict},
                   {"K", matrix_to_json(model.K)},
                   {"B", matrix_to_json(model.B)},
                   {"eigenvalues", cmatrix_to_json(model.eigenvalues)},
                   {"right", cmatrix_to_json(model.right)},
                   {"left", cmatrix_to_json(model.left)},
                   {"modes", cmatrix_to_json(model.modes)}};
  write_json(j, path);
}

LoadedModel load_model(const std::string& path) {
  const nlohmann::json j = read_json(path);
  if (j.value("format", "") != "koop-model")
    throw InvalidInput("not a model file: " + path);
  if (j.value("version", 0) != 1) throw InvalidInput("unsupported model version in " + path);

  const nlohmann::json& jdict = j.at("dictionary");
  std::unique_ptr<DictionaryNetwork> net;
  if (!jdict.at("network").is_null()) {
    const nlohmann::json& jnet = jdict.at("network");
    net = make_network(arch_from_json(jnet.at("arch")), 0);
    const auto params = jnet.at("parameters").get<std::vector<double>>();
    net->set_parameters(
        Eigen::Map<const Vector>(params.data(), static_cast<Index>(params.size())));
  }
  auto dict = std::make_shared<Dictionary>(jdict.at("state_dim").get<Index>(), std::move(net),
                                           jdict.at("include_constant").get<bool>());

  LoadedModel out;
  out.seed = j.at("seed").get<std::uint64_t>();
  out.system = j.at("system");
  out.model.K = matrix_from_json(j.at("K"));
  out.model.B = matrix_from_json(j.at("B"));
  const ComplexMatrix mu = cmatrix_from_json(j.at("eigenvalues"));
  out.model.eigenvalues = mu.col(0);
  out.model.right = cmatrix_from_json(j.at("right"));
  out.model.left = cmatrix_from_json(j.at("left"));
  out.model.modes = cmatrix_from_json(j.at("modes"));
  out.model.dictionary = dict;

  if (out.model.K.rows() != dict->size())
    throw InvalidInput("model file is inconsistent with its dictionary size: " + path);
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json make_manifest(const nlohmann::json& config, const nlohmann::json& seeds,
                             const std::vector<ManifestArtifact>& artifacts) {
  nlohmann::json arts = nlohmann::json::object();
  for (const ManifestArtifact& a : artifacts)
    arts[a.name] = {{"path", a.path}, {"fnv1a64", a.hash}};
  return {{"format", "koop-manifest"},
          {"version", 1},
          {"tool_version", kToolVersion},
          {"created", iso8601_utc_now()},
          {"config", config},
          {"config_hash", fnv1a64_hex(config.dump())},
          {"seeds", seeds},
          {"artifacts", arts}};
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out = open_out(path, std::ios::out);
  out << j.dump(2) << "\n";
  if (!out) throw InvalidInput("write failed: " + path);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in = open_in(path, std::ios::in);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("malformed JSON in " + path + ": " + e.what());
  }
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream out = open_out(path, std::ios::out);
  out << text;
  if (!out) throw InvalidInput("write failed: " + path);
}

void write_trace_csv(const TrainReport& report, const std::string& path) {
  std::ostringstream out;
  out << "epoch,loss,loss_pre_update\n";
  for (std::size_t e = 0; e < report.loss.size(); ++e)
    out << e + 1 << "," << format_g17(report.loss[e]) << ","
        << format_g17(report.loss_pre_update[e]) << "\n";
  write_text(out.str(), path);
}

// ---------------------------------------------------------------------------

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

std::string hash_file(const std::string& path) {
  std::ifstream in = open_in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64_hex(ss.str());
}

std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw InvalidInput("matrix JSON must be a non-empty array");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(j.at(static_cast<std::size_t>(i)).size()) != cols)
      throw InvalidInput("matrix JSON rows have inconsistent lengths");
    for (Index c = 0; c < cols; ++c)
      m(i, c) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

nlohmann::json cmatrix_to_json(const ComplexMatrix& m) {
  return {{"re", matrix_to_json(m.real())}, {"im", matrix_to_json(m.imag())}};
}

ComplexMatrix cmatrix_from_json(const nlohmann::json& j) {
  const Matrix re = matrix_from_json(j.at("re"));
  const Matrix im = matrix_from_json(j.at("im"));
  if (re.rows() != im.rows() || re.cols() != im.cols())
    throw InvalidInput("complex matrix JSON has mismatched real/imaginary shapes");
  ComplexMatrix m(re.rows(), re.cols());
  m.real() = re;
  m.imag() = im;
  return m;
}

}  // namespace koop
