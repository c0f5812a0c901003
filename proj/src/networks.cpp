#include "koop/networks.hpp"

#include <cmath>
#include <sstream>

#include "koop/parallel.hpp"
#include "koop/rng.hpp"

namespace koop {

namespace {

struct Segment {
  enum Kind { weight, bias, field } kind;
  Index offset, rows, cols;
};

std::vector<Segment> layout_of(const NetworkArch& a) {
  std::vector<Segment> segs;
  Index off = 0;
  auto push = [&](Segment::Kind k, Index r, Index c) {
    segs.push_back({k, off, r, c});
    off += r * c;
  };
  if (a.kind == NetworkKind::mlp) {
    push(Segment::weight, a.width, a.input_dim);  // W_in
    push(Segment::bias, a.width, 1);              // b_in
    for (Index t = 0; t + 1 < a.depth; ++t) {
      push(Segment::weight, a.width, a.width);
      push(Segment::bias, a.width, 1);
    }
    push(Segment::weight, a.output_dim, a.width);  // W_out
    push(Segment::bias, a.output_dim, 1);          // b_out
  } else {
    push(Segment::weight, a.width, a.input_dim);       // W_in
    push(Segment::bias, a.width, 1);                   // b_in
    push(Segment::field, a.field_width, a.width);      // W1
    push(Segment::field, a.field_width, a.field_width);// W2
    push(Segment::field, a.width, a.field_width);      // W3
    push(Segment::weight, a.output_dim, a.width);      // W_out
    push(Segment::bias, a.output_dim, 1);              // b_out
  }
  return segs;
}

void validate_arch(const NetworkArch& a) {
  if (a.input_dim < 1 || a.output_dim < 1 || a.width < 1)
    throw InvalidInput("network architecture: dimensions must be at least 1");
  if (a.kind == NetworkKind::mlp && a.depth < 1)
    throw InvalidInput("network architecture: mlp depth must be at least 1");
  if (a.kind == NetworkKind::node && a.field_width < 1)
    throw InvalidInput("network architecture: node field width must be at least 1");
  if (a.kind == NetworkKind::node && !(a.field_init_std > 0.0))
    throw InvalidInput("network architecture: node field init stddev must be positive");
  if (a.kind == NetworkKind::node && a.time_span[0] == a.time_span[1])
    throw InvalidInput("network architecture: node time span is empty");
}

Vector init_parameters(const NetworkArch& a, std::uint64_t seed) {
  const double root_w = std::sqrt(static_cast<double>(a.width));
  const double wscale = a.init == InitScheme::inverse ? 1.0 / root_w : root_w;
  const double bscale = root_w;

  Vector theta(count_parameters(a));
  Rng rng(seed);
  for (const Segment& s : layout_of(a)) {
    double* p = theta.data() + s.offset;
    const Index n = s.rows * s.cols;
    switch (s.kind) {
      case Segment::weight:
        for (Index i = 0; i < n; ++i) p[i] = rng.uniform(-wscale, wscale);
        break;
      case Segment::bias:
        for (Index i = 0; i < n; ++i) p[i] = rng.uniform(-bscale, bscale);
        break;
      case Segment::field:
        for (Index i = 0; i < n; ++i) p[i] = rng.normal(0.0, a.field_init_std);
        break;
    }
  }
  return theta;
}

using ConstMap = Eigen::Map<const Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;

ConstMap map_mat(const Vector& theta, const Segment& s) {
  return ConstMap(theta.data() + s.offset, s.rows, s.cols);
}

ConstVecMap map_vec(const Vector& theta, const Segment& s) {
  return ConstVecMap(theta.data() + s.offset, s.rows);
}

void check_record(const ForwardRecord& rec, const void* owner, std::uint64_t revision) {
  if (rec.owner != owner || rec.revision != revision)
    throw InvalidInput(
        "backward: forward record is stale (parameters changed or record belongs to "
        "another network)");
}

void check_input(const Matrix& X, Index d, const char* who) {
  if (X.rows() != d) {
    std::ostringstream msg;
    msg << who << ": input has " << X.rows() << " rows, expected " << d;
    throw InvalidInput(msg.str());
  }
}

}  // namespace

Index count_parameters(const NetworkArch& a) {
  validate_arch(a);
  Index n = 0;
  for (const Segment& s : layout_of(a)) n += s.rows * s.cols;
  return n;
}

// ---------------------------------------------------------------------------
// MlpNetwork

MlpNetwork::MlpNetwork(const NetworkArch& arch, std::uint64_t seed) : arch_(arch) {
  validate_arch(arch_);
  if (arch_.kind != NetworkKind::mlp) throw InvalidInput("MlpNetwork: arch.kind must be mlp");
  theta_ = init_parameters(arch_, seed);
}

void MlpNetwork::set_parameters(const Vector& theta) {
  if (theta.size() != theta_.size())
    throw InvalidInput("set_parameters: size mismatch");
  theta_ = theta;
  ++revision_;
}

Matrix MlpNetwork::forward(const Matrix& X, ForwardRecord* record) const {
  check_input(X, arch_.input_dim, "MlpNetwork::forward");
  const auto segs = layout_of(arch_);

  if (record) {
    record->input = X;
    record->hidden.clear();
    record->owner = this;
    record->revision = revision_;
  }

  Matrix H = gemm_cols(map_mat(theta_, segs[0]), X);
  H.colwise() += map_vec(theta_, segs[1]);
  if (record) record->hidden.push_back(H);

  for (Index t = 0; t + 1 < arch_.depth; ++t) {
    const Segment& ws = segs[static_cast<std::size_t>(2 + 2 * t)];
    const Segment& bs = segs[static_cast<std::size_t>(3 + 2 * t)];
    Matrix Z = gemm_cols(map_mat(theta_, ws), H);
    Z.colwise() += map_vec(theta_, bs);
    H += Z.array().tanh().matrix();
    if (record) record->hidden.push_back(H);
  }

  const Segment& wo = segs[segs.size() - 2];
  const Segment& bo = segs[segs.size() - 1];
  Matrix Y = gemm_cols(map_mat(theta_, wo), H);
  Y.colwise() += map_vec(theta_, bo);
  return Y;
}

Vector MlpNetwork::backward(const ForwardRecord& rec, const Matrix& G) const {
  check_record(rec, this, revision_);
  if (G.rows() != arch_.output_dim || G.cols() != rec.input.cols())
    throw InvalidInput("MlpNetwork::backward: grad_output shape mismatch");

  const auto segs = layout_of(arch_);
  Vector grad = Vector::Zero(theta_.size());
  auto grad_mat = [&](const Segment& s) {
    return Eigen::Map<Matrix>(grad.data() + s.offset, s.rows, s.cols);
  };
  auto grad_vec = [&](const Segment& s) {
    return Eigen::Map<Vector>(grad.data() + s.offset, s.rows);
  };

  const Matrix& h_last = rec.hidden.back();
  const Segment& wo = segs[segs.size() - 2];
  const Segment& bo = segs[segs.size() - 1];
  grad_mat(wo) = gemm_abt(G, h_last);
  grad_vec(bo) = G.rowwise().sum();

  Matrix A = gemm_cols(Matrix(map_mat(theta_, wo).transpose()), G);

  for (Index t = arch_.depth - 2; t >= 0; --t) {
    const Segment& ws = segs[static_cast<std::size_t>(2 + 2 * t)];
    const Segment& bs = segs[static_cast<std::size_t>(3 + 2 * t)];
    const Matrix& h_in = rec.hidden[static_cast<std::size_t>(t)];
    const Matrix& h_out = rec.hidden[static_cast<std::size_t>(t + 1)];

    // tanh(W_t h_t + b_t) was stored implicitly as the residual increment.
    Matrix T = h_out - h_in;
    Matrix S = ((1.0 - T.array().square()) * A.array()).matrix();
    grad_mat(ws) = gemm_abt(S, h_in);
    grad_vec(bs) = S.rowwise().sum();
    A += gemm_cols(Matrix(map_mat(theta_, ws).transpose()), S);
  }

  grad_mat(segs[0]) = gemm_abt(A, rec.input);
  grad_vec(segs[1]) = A.rowwise().sum();
  return grad;
}

std::unique_ptr<DictionaryNetwork> MlpNetwork::clone() const {
  return std::make_unique<MlpNetwork>(*this);
}

// ---------------------------------------------------------------------------
// NodeNetwork

NodeNetwork::NodeNetwork(const NetworkArch& arch, std::uint64_t seed) : arch_(arch) {
  validate_arch(arch_);
  if (arch_.kind != NetworkKind::node) throw InvalidInput("NodeNetwork: arch.kind must be node");
  theta_ = init_parameters(arch_, seed);
}

void NodeNetwork::set_parameters(const Vector& theta) {
  if (theta.size() != theta_.size())
    throw InvalidInput("set_parameters: size mismatch");
  theta_ = theta;
  ++revision_;
}

void NodeNetwork::eval_field(const Matrix& H, Matrix& dH) const {
  const auto segs = layout_of(arch_);
  const auto W1 = map_mat(theta_, segs[2]);
  const auto W2 = map_mat(theta_, segs[3]);
  const auto W3 = map_mat(theta_, segs[4]);
  for_each_chunk(H.cols(), kDefaultChunk, [&](Index, Index b, Index e) {
    const Index n = e - b;
    const Matrix U = (W1 * H.middleCols(b, n)).array().tanh().matrix();
    const Matrix T = (W2 * U).array().tanh().matrix();
    dH.middleCols(b, n).noalias() = W3 * T;
  });
}

Matrix NodeNetwork::forward(const Matrix& X, ForwardRecord* record) const {
  check_input(X, arch_.input_dim, "NodeNetwork::forward");
  const auto segs = layout_of(arch_);
  const Index lp = arch_.width;
  const Index N = X.cols();

  Matrix H = gemm_cols(map_mat(theta_, segs[0]), X);
  H.colwise() += map_vec(theta_, segs[1]);

  Vector y0 = Eigen::Map<const Vector>(H.data(), H.size());
  VectorField field = [this, lp, N](const Vector& y, double, Vector& dy) {
    ConstMap Hm(y.data(), lp, N);
    Eigen::Map<Matrix> dHm(dy.data(), lp, N);
    Matrix dH(lp, N);
    eval_field(Hm, dH);
    dHm = dH;
  };

  const Vector y1 = dopri54(field, y0, arch_.time_span[0], arch_.time_span[1], ode_cfg_).y;
  Matrix He = ConstMap(y1.data(), lp, N);

  if (record) {
    record->input = X;
    record->hidden.clear();
    record->state_end = He;
    record->owner = this;
    record->revision = revision_;
  }

  const Segment& wo = segs[segs.size() - 2];
  const Segment& bo = segs[segs.size() - 1];
  Matrix Y = gemm_cols(map_mat(theta_, wo), He);
  Y.colwise() += map_vec(theta_, bo);
  return Y;
}

Vector NodeNetwork::backward(const ForwardRecord& rec, const Matrix& G) const {
  check_record(rec, this, revision_);
  const Index N = rec.input.cols();
  if (G.rows() != arch_.output_dim || G.cols() != N)
    throw InvalidInput("NodeNetwork::backward: grad_output shape mismatch");

  const auto segs = layout_of(arch_);
  const Index lp = arch_.width;
  const Index lf = arch_.field_width;
  const auto W1 = map_mat(theta_, segs[2]);
  const auto W2 = map_mat(theta_, segs[3]);
  const auto W3 = map_mat(theta_, segs[4]);
  const Segment& wo = segs[segs.size() - 2];
  const Segment& bo = segs[segs.size() - 1];

  Vector grad = Vector::Zero(theta_.size());
  auto grad_mat = [&](const Segment& s) {
    return Eigen::Map<Matrix>(grad.data() + s.offset, s.rows, s.cols);
  };
  auto grad_vec = [&](const Segment& s) {
    return Eigen::Map<Vector>(grad.data() + s.offset, s.rows);
  };

  grad_mat(wo) = gemm_abt(G, rec.state_end);
  grad_vec(bo) = G.rowwise().sum();
  Matrix Ae = gemm_cols(Matrix(map_mat(theta_, wo).transpose()), G);

  const Index np_field = lf * lp + lf * lf + lp * lf;

  // One pass through the latent chain produces the field value, the state
  // pullback and the three parameter pullbacks; the adjoint integrator calls
  // this for every stage of every backward step.
  auto chain = [&](const Vector& y, const Vector& a, Vector* dy, Vector* da, Vector* dg,
                   double sign) {
    ConstMap Hm(y.data(), lp, N);
    ConstMap Am(a.data(), lp, N);
    if (dy) dy->resize(lp * N);
    if (da) da->resize(lp * N);
    const Index n_chunks = std::max<Index>(1, (N + kDefaultChunk - 1) / kDefaultChunk);
    std::vector<Vector> partial;
    if (dg) partial.assign(static_cast<std::size_t>(n_chunks), Vector());

    for_each_chunk(N, kDefaultChunk, [&](Index c, Index b, Index e) {
      const Index n = e - b;
      const Matrix Hc = Hm.middleCols(b, n);
      const Matrix Ac = Am.middleCols(b, n);
      const Matrix U = (W1 * Hc).array().tanh().matrix();
      const Matrix T = (W2 * U).array().tanh().matrix();
      if (dy) Eigen::Map<Matrix>(dy->data(), lp, N).middleCols(b, n).noalias() = W3 * T;

      const Matrix P = W3.transpose() * Ac;
      const Matrix Q = ((1.0 - T.array().square()) * P.array()).matrix();
      const Matrix R = W2.transpose() * Q;
      const Matrix S = ((1.0 - U.array().square()) * R.array()).matrix();
      if (da)
        Eigen::Map<Matrix>(da->data(), lp, N).middleCols(b, n).noalias() =
            sign * (W1.transpose() * S);

      if (dg) {
        Vector& p = partial[static_cast<std::size_t>(c)];
        p.resize(np_field);
        Eigen::Map<Matrix>(p.data(), lf, lp).noalias() = S * Hc.transpose();
        Eigen::Map<Matrix>(p.data() + lf * lp, lf, lf).noalias() = Q * U.transpose();
        Eigen::Map<Matrix>(p.data() + lf * lp + lf * lf, lp, lf).noalias() =
            Ac * T.transpose();
      }
    });

    if (dg) {
      dg->setZero(np_field);
      for (const Vector& p : partial) *dg += sign * p;
    }
  };

  AdjointField af;
  af.state_dim = lp * N;
  af.param_dim = np_field;
  af.f = [this, lp, N](const Vector& y, double, Vector& dy) {
    ConstMap Hm(y.data(), lp, N);
    Eigen::Map<Matrix> dHm(dy.data(), lp, N);
    Matrix dH(lp, N);
    eval_field(Hm, dH);
    dHm = dH;
  };
  af.vjp_state = [&chain](const Vector& y, double, const Vector& a, Vector& out) {
    chain(y, a, nullptr, &out, nullptr, 1.0);
  };
  af.vjp_params = [&chain](const Vector& y, double, const Vector& a, Vector& out) {
    chain(y, a, nullptr, nullptr, &out, 1.0);
  };
  af.fused = [&chain](const Vector& y, double, const Vector& a, Vector& dy, Vector& da,
                      Vector& dg) { chain(y, a, &dy, &da, &dg, -1.0); };

  const Vector he_flat = Eigen::Map<const Vector>(rec.state_end.data(), rec.state_end.size());
  const Vector ae_flat = Eigen::Map<const Vector>(Ae.data(), Ae.size());
  const AdjointResult adj = adjoint_backward(af, he_flat, ae_flat, arch_.time_span[0],
                                             arch_.time_span[1], ode_cfg_);

  grad.segment(segs[2].offset, np_field) = adj.grad_params;

  ConstMap As(adj.grad_state_start.data(), lp, N);
  grad_mat(segs[0]) = gemm_abt(Matrix(As), rec.input);
  grad_vec(segs[1]) = As.rowwise().sum();
  return grad;
}

std::unique_ptr<DictionaryNetwork> NodeNetwork::clone() const {
  return std::make_unique<NodeNetwork>(*this);
}

// ---------------------------------------------------------------------------

std::unique_ptr<DictionaryNetwork> make_network(const NetworkArch& arch, std::uint64_t seed) {
  validate_arch(arch);
  if (arch.kind == NetworkKind::mlp)
    return std::make_unique<MlpNetwork>(arch, seed);
  return std::make_unique<NodeNetwork>(arch, seed);
}

void adam_step(Vector& theta, const Vector& grad, AdamState& state, const AdamConfig& cfg) {
  if (theta.size() != grad.size()) throw InvalidInput("adam_step: size mismatch");
  if (state.m.size() != theta.size()) state.reset(theta.size());

  ++state.step;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v.array() = cfg.beta2 * state.v.array() + (1.0 - cfg.beta2) * grad.array().square();

  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  theta.array() -= cfg.learning_rate * (state.m.array() / bc1) /
                   ((state.v.array() / bc2).sqrt() + cfg.epsilon);
}

}  // namespace koop
