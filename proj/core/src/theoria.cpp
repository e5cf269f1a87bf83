#include "ccdd/theoria.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "ccdd/corruption.hpp"
#include "ccdd/error.hpp"
#include "ccdd/rng.hpp"

namespace ccdd::theoria {
namespace {

Matrix random_matrix(int rows, int cols, double scale, RngStream& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Finite-volume transport of one state's cell masses.
class Transport {
 public:
  Transport(const CoupledToyProcess& p, double mean)
      : kappa_(p.kappa), mean_(mean), diffusion_(0.5 * p.sigma * p.sigma),
        z_min_(p.z_min), dx_((p.z_max - p.z_min) / p.cells), cells_(p.cells) {}

  // d(mass)/dt written into `out`.
  void apply(const double* m, double* out) const {
    std::fill(out, out + cells_, 0.0);
    for (int i = 0; i + 1 < cells_; ++i) {
      const double face = z_min_ + (i + 1) * dx_;
      const double a = kappa_ * (mean_ - face);
      const double rho_l = m[i] / dx_;
      const double rho_r = m[i + 1] / dx_;
      const double flux = a * (a > 0.0 ? rho_l : rho_r) - diffusion_ * (rho_r - rho_l) / dx_;
      out[i] -= flux;
      out[i + 1] += flux;
    }
  }

  // Gershgorin bound on the spectral radius.
  double spectral_bound(double z_max) const {
    const double a = kappa_ * (std::abs(mean_) + std::max(std::abs(z_min_), std::abs(z_max)));
    return 2.0 * (a / dx_ + 2.0 * diffusion_ / (dx_ * dx_));
  }

 private:
  double kappa_, mean_, diffusion_, z_min_, dx_;
  int cells_;
};

constexpr double kMeans[2] = {-1.0, 1.0};
constexpr double kRk4StableLimit = 2.5;

// RK4 for dm/dt = f(m) on a flat vector.
template <typename F>
void rk4_steps(Eigen::VectorXd& m, double h, int steps, const F& f) {
  const auto n = m.size();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (int s = 0; s < steps; ++s) {
    f(m, k1);
    tmp = m + 0.5 * h * k1;
    f(tmp, k2);
    tmp = m + 0.5 * h * k2;
    f(tmp, k3);
    tmp = m + h * k3;
    f(tmp, k4);
    m += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
}

int substeps(double span, double max_step) {
  return std::max(1, static_cast<int>(std::ceil(span / max_step - 1e-9)));
}

JointLaw to_law(const Eigen::VectorXd& v, int cells) {
  JointLaw law(2, cells);
  for (int x = 0; x < 2; ++x) {
    for (int i = 0; i < cells; ++i) law(x, i) = v(x * cells + i);
  }
  return law;
}

Eigen::VectorXd to_vector(const JointLaw& law) {
  Eigen::VectorXd v(law.size());
  for (Eigen::Index i = 0; i < law.size(); ++i) v(i) = law.data()[i];
  return v;
}

}  // namespace

// ---- looped rollout -----------------------------------------------------------

Matrix LoopedBlock::apply(const Matrix& h) const {
  Matrix pre = h * w1;
  pre.rowwise() += b1.row(0);
  Matrix out = pre.array().tanh().matrix() * w2;
  out.rowwise() += b2.row(0);
  return h + out;
}

LoopedBlock LoopedBlock::random(int dim, int hidden, std::uint64_t seed, double scale) {
  RngStream rng = RngStream(seed).split(0x100b);
  LoopedBlock b;
  b.w1 = random_matrix(dim, hidden, scale / std::sqrt(dim), rng);
  b.b1 = random_matrix(1, hidden, 0.1, rng);
  b.w2 = random_matrix(hidden, dim, scale / std::sqrt(hidden), rng);
  b.b2 = random_matrix(1, dim, 0.1, rng);
  return b;
}

LoopedBlock LoopedBlock::identity(int dim, int hidden) {
  return {Matrix::Zero(dim, hidden), Matrix::Zero(1, hidden), Matrix::Zero(hidden, dim),
          Matrix::Zero(1, dim)};
}

LoopedRollout simulate_looped_via_euler(const LoopedBlock& block, const Matrix& h0, int steps) {
  if (steps < 1) throw DomainError("simulate_looped_via_euler: T must be at least 1");
  if (h0.cols() != block.dim()) throw InputError("simulate_looped_via_euler: width mismatch");
  LoopedRollout r;
  const double dt = 1.0 / steps;
  const double scale = static_cast<double>(steps);
  r.euler.push_back(h0);
  r.looped.push_back(h0);
  for (int k = 0; k < steps; ++k) {
    const Matrix& z = r.euler.back();
    const Matrix v = scale * (block.apply(z) - z);
    r.euler.push_back(z + dt * v);
    r.looped.push_back(block.apply(r.looped.back()));
    r.max_abs_gap = std::max(r.max_abs_gap, (r.euler.back() - r.looped.back()).cwiseAbs().maxCoeff());
  }
  return r;
}

Matrix integrate_rk4(const VectorField& field, const Matrix& z0, double horizon, int steps) {
  if (steps < 1) throw DomainError("integrate_rk4: need at least one step");
  const double h = horizon / steps;
  Matrix z = z0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const Matrix k1 = field(z, t);
    const Matrix k2 = field(z + 0.5 * h * k1, t + 0.5 * h);
    const Matrix k3 = field(z + 0.5 * h * k2, t + 0.5 * h);
    const Matrix k4 = field(z + h * k3, t + h);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return z;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("loglog_slope: need >= 2 points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw DomainError("loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

EmulationResult looped_emulates_integrator(const VectorField& field, const Matrix& z0,
                                           double horizon, std::span<const int> meshes,
                                           int reference_steps) {
  const Matrix reference = integrate_rk4(field, z0, horizon, reference_steps);
  EmulationResult r;
  std::vector<double> steps;
  for (int mesh : meshes) {
    if (mesh < 1) throw DomainError("looped_emulates_integrator: mesh must be positive");
    const double dt = horizon / mesh;
    Matrix z = z0;
    for (int k = 0; k < mesh; ++k) {
      // Block k of the loop: z -> z + dt v(z, t_k).
      z = z + dt * field(z, k * dt);
    }
    r.meshes.push_back(mesh);
    r.errors.push_back((z - reference).cwiseAbs().maxCoeff());
    steps.push_back(dt);
  }
  bool all_positive = r.errors.size() >= 2;
  for (double e : r.errors) all_positive = all_positive && e > 0.0;
  if (all_positive) r.slope = loglog_slope(steps, r.errors);
  return r;
}

// ---- Trotter splitting --------------------------------------------------------------

void CoupledToyProcess::validate() const {
  if (!(g01 >= 0.0 && g10 >= 0.0)) throw ConfigError("trotter: rates must be non-negative");
  if (!(kappa >= 0.0 && sigma >= 0.0)) throw ConfigError("trotter: kappa, sigma must be >= 0");
  if (!(z_max > z_min) || cells < 4) throw ConfigError("trotter: invalid grid");
  if (!(horizon > 0.0) || !(reference_step > 0.0)) {
    throw ConfigError("trotter: horizon and reference step must be positive");
  }
  if (reference_step > 1e-4) throw ConfigError("trotter: reference step must be <= 1e-4");
  if (!(p0 >= 0.0 && p0 <= 1.0) || !(z0_std > 0.0)) throw ConfigError("trotter: bad initial law");
  for (double mean : kMeans) {
    const Transport tr(*this, mean);
    const double rate = tr.spectral_bound(z_max) + 2.0 * (g01 + g10);
    if (rate * reference_step > kRk4StableLimit) {
      throw ConfigError("trotter: step " + std::to_string(reference_step) +
                        " violates the explicit stability limit for this grid");
    }
  }
}

JointLaw initial_law(const CoupledToyProcess& p) {
  p.validate();
  const double dx = (p.z_max - p.z_min) / p.cells;
  JointLaw law(2, p.cells);
  double total = 0.0;
  Eigen::VectorXd base(p.cells);
  for (int i = 0; i < p.cells; ++i) {
    const double lo = (p.z_min + i * dx - p.z0_mean) / p.z0_std;
    const double hi = (p.z_min + (i + 1) * dx - p.z0_mean) / p.z0_std;
    base(i) = normal_cdf(hi) - normal_cdf(lo);
    total += base(i);
  }
  base /= total;
  law.row(0) = p.p0 * base.transpose();
  law.row(1) = (1.0 - p.p0) * base.transpose();
  return law;
}

JointLaw reference_law(const CoupledToyProcess& p) {
  Eigen::VectorXd m = to_vector(initial_law(p));
  const Transport t0(p, kMeans[0]);
  const Transport t1(p, kMeans[1]);
  const int n = p.cells;
  const int steps = substeps(p.horizon, p.reference_step);
  rk4_steps(m, p.horizon / steps, steps, [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
    t0.apply(v.data(), out.data());
    t1.apply(v.data() + n, out.data() + n);
    for (int i = 0; i < n; ++i) {
      const double flow = p.g01 * v(i) - p.g10 * v(n + i);
      out(i) -= flow;
      out(n + i) += flow;
    }
  });
  return to_law(m, n);
}

JointLaw split_law(const CoupledToyProcess& p, double dt) {
  if (!(dt > 0.0)) throw DomainError("split_law: dt must be positive");
  const double macro = p.horizon / dt;
  const int n_macro = static_cast<int>(std::lround(macro));
  if (n_macro < 1 || std::abs(macro - n_macro) > 1e-9 * std::max(1.0, macro)) {
    throw ConfigError("split_law: dt must divide the horizon");
  }
  Eigen::VectorXd m = to_vector(initial_law(p));
  const Transport t0(p, kMeans[0]);
  const Transport t1(p, kMeans[1]);
  const int n = p.cells;

  const double r = p.g01 + p.g10;
  const double decay = r > 0.0 ? 1.0 - std::exp(-r * dt) : 0.0;
  const double p01 = r > 0.0 ? p.g01 / r * decay : 0.0;
  const double p10 = r > 0.0 ? p.g10 / r * decay : 0.0;
  const int sub = substeps(dt, p.reference_step);

  for (int k = 0; k < n_macro; ++k) {
    for (int i = 0; i < n; ++i) {
      const double a = m(i);
      const double b = m(n + i);
      m(i) = a * (1.0 - p01) + b * p10;
      m(n + i) = a * p01 + b * (1.0 - p10);
    }
    rk4_steps(m, dt / sub, sub, [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
      t0.apply(v.data(), out.data());
      t1.apply(v.data() + n, out.data() + n);
    });
  }
  return to_law(m, n);
}

double total_variation(const JointLaw& a, const JointLaw& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("total_variation: shapes");
  return 0.5 * (a - b).cwiseAbs().sum();
}

double trotter_error(const CoupledToyProcess& process, double dt) {
  return total_variation(split_law(process, dt), reference_law(process));
}

// ---- support and information -------------------------------------------------------

SupportCounts support_atomicity_check(int vocab_size, int length, const Codebook& codebook,
                                      const DiscreteSchedule& discrete,
                                      const ContinuousSchedule& continuous, double t,
                                      int n_samples, std::uint64_t seed) {
  if (vocab_size < 1 || length < 1 || vocab_size * length > 16) {
    throw ConfigError("support_atomicity_check: enumeration too large (need V L <= 16)");
  }
  if (codebook.vocab_size() != vocab_size) {
    throw ConfigError("support_atomicity_check: codebook vocabulary differs from V");
  }
  if (n_samples < 1) throw ConfigError("support_atomicity_check: n_samples must be positive");
  SupportCounts out;
  out.bound = 1;
  for (int j = 0; j < length; ++j) out.bound *= static_cast<std::size_t>(vocab_size + 1);

  RngStream data_rng = derive_stream(seed, StreamTag::kData, 0);
  TokenBatch x0(n_samples, length);
  for (Token& x : x0.ids()) {
    x = static_cast<Token>(std::min<double>(vocab_size - 1, std::floor(data_rng.uniform() * vocab_size)));
  }
  const std::vector<double> times(static_cast<std::size_t>(n_samples), t);
  const TokenBatch x_t = corrupt_discrete(x0, times, discrete, vocab_size,
                                          derive_stream(seed, StreamTag::kCorrupt, 0));
  const LatentBatch embedded = codebook.encode_partial(x_t);
  std::set<std::vector<double>> discrete_points;
  for (int b = 0; b < n_samples; ++b) {
    const auto seq = embedded.sequence(b);
    discrete_points.emplace(seq.data(), seq.data() + seq.size());
  }
  out.discrete_embedded = discrete_points.size();

  // Continuous draws share one clean embedding.
  TokenBatch fixed(n_samples, length);
  for (int b = 0; b < n_samples; ++b) {
    for (int j = 0; j < length; ++j) fixed.at(b, j) = x0.at(0, j);
  }
  const LatentBatch z_t = corrupt_continuous(codebook.encode(fixed), times, continuous,
                                             derive_stream(seed, StreamTag::kCorrupt, 1))
                              .z_t;
  std::set<std::vector<double>> continuous_points;
  for (int b = 0; b < n_samples; ++b) {
    const auto seq = z_t.sequence(b);
    continuous_points.emplace(seq.data(), seq.data() + seq.size());
  }
  out.continuous = continuous_points.size();
  return out;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double mutual_information(std::span<const double> source, const DiscreteSchedule& schedule,
                          double t) {
  const int vocab = static_cast<int>(source.size());
  if (vocab < 1) throw InputError("mutual_information: empty source");
  const double eta = schedule.eval(t);
  const int augmented = vocab + 1;
  Matrix joint(vocab, augmented);
  for (int x0 = 0; x0 < vocab; ++x0) {
    for (int xt = 0; xt < augmented; ++xt) {
      const double q = eta * (x0 == xt ? 1.0 : 0.0) + (1.0 - eta) * schedule.noise_prob(xt, vocab);
      joint(x0, xt) = source[static_cast<std::size_t>(x0)] * q;
    }
  }
  const Eigen::RowVectorXd marginal = joint.colwise().sum();
  double mi = 0.0;
  for (int x0 = 0; x0 < vocab; ++x0) {
    for (int xt = 0; xt < augmented; ++xt) {
      const double p = joint(x0, xt);
      if (p > 0.0) mi += p * std::log(p / (source[static_cast<std::size_t>(x0)] * marginal(xt)));
    }
  }
  return std::max(0.0, mi);
}

InfoDecayResult info_decay_suite(int vocab_size, const DiscreteSchedule& schedule,
                                 std::span<const double> t_grid, int n_samples,
                                 std::uint64_t seed) {
  if (vocab_size < 1 || vocab_size > 8) throw ConfigError("info_decay_suite: need 1 <= V <= 8");
  InfoDecayResult r;
  const std::vector<double> source(static_cast<std::size_t>(vocab_size), 1.0 / vocab_size);
  r.source_entropy = entropy(source);
  for (double t : t_grid) {
    r.t.push_back(t);
    r.mi.push_back(mutual_information(source, schedule, t));
  }
  for (std::size_t i = 1; i < r.t.size(); ++i) {
    if (r.t[i] < r.t[i - 1]) throw InputError("info_decay_suite: t grid must be increasing");
    if (r.mi[i] > r.mi[i - 1] + 1e-12) r.non_increasing = false;
  }

  // Ensemble of logit vectors; the token is drawn from softmax of a uniformly
  // chosen member.
  constexpr int kMembers = 8;
  RngStream rng = derive_stream(seed, StreamTag::kEval, 0x1f0);
  Matrix probs(kMembers, vocab_size);
  for (int k = 0; k < kMembers; ++k) {
    for (int v = 0; v < vocab_size; ++v) probs(k, v) = std::exp(2.0 * rng.normal());
    probs.row(k) /= probs.row(k).sum();
  }
  Matrix counts = Matrix::Zero(kMembers, vocab_size);
  for (int i = 0; i < n_samples; ++i) {
    const int k = std::min(kMembers - 1, static_cast<int>(rng.uniform() * kMembers));
    const double u = rng.uniform();
    double acc = 0.0;
    int token = vocab_size - 1;
    for (int v = 0; v < vocab_size; ++v) {
      acc += probs(k, v);
      if (u < acc) {
        token = v;
        break;
      }
    }
    counts(k, token) += 1.0;
  }
  const double n = std::max(1, n_samples);
  std::vector<double> p_token(static_cast<std::size_t>(vocab_size));
  std::vector<double> p_member(kMembers);
  std::vector<double> p_joint;
  for (int v = 0; v < vocab_size; ++v) p_token[static_cast<std::size_t>(v)] = counts.col(v).sum() / n;
  for (int k = 0; k < kMembers; ++k) p_member[static_cast<std::size_t>(k)] = counts.row(k).sum() / n;
  for (Eigen::Index i = 0; i < counts.size(); ++i) p_joint.push_back(counts.data()[i] / n);
  r.token_entropy = entropy(p_token);
  r.logit_token_mi = entropy(p_token) + entropy(p_member) - entropy(p_joint);
  r.bounds_hold = r.token_entropy <= std::log(static_cast<double>(vocab_size)) + 1e-12 &&
                  r.logit_token_mi <= r.token_entropy + 1e-12;
  return r;
}

// ---- suite ------------------------------------------------------------------------

bool VerifyReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

VerifyReport run_verify_suite(std::uint64_t seed) {
  VerifyReport rep;
  auto add = [&](std::string name, double value, std::string criterion, bool pass) {
    rep.rows.push_back({std::move(name), value, std::move(criterion), pass});
  };
  auto series = [&](const std::string& name, double x, double y) {
    std::ostringstream s;
    s.precision(17);
    s << name << ',' << x << ',' << y;
    rep.series.push_back(s.str());
  };

  // Looped rollout.
  {
    const LoopedBlock block = LoopedBlock::random(8, 16, seed);
    RngStream rng = derive_stream(seed, StreamTag::kInit, 0x700);
    const Matrix h0 = random_matrix(4, 8, 1.0, rng);
    double gap = 0.0;
    for (int steps : {1, 2, 3, 4, 8, 16, 32, 64, 128}) {
      gap = std::max(gap, simulate_looped_via_euler(block, h0, steps).max_abs_gap);
    }
    add("euler_equals_loop", gap, "<= 1e-12", gap <= 1e-12);
    const double id_gap =
        simulate_looped_via_euler(LoopedBlock::identity(8, 16), h0, 64).max_abs_gap;
    add("identity_block_gap", id_gap, "== 0", id_gap == 0.0);
  }

  // Integrator emulation on v = -z.
  {
    const Matrix z0 = Matrix::Constant(1, 1, 1.0);
    const VectorField decay = [](const Matrix& z, double) { return Matrix(-z); };
    const std::vector<int> meshes{16, 32, 64, 128};
    const EmulationResult em = looped_emulates_integrator(decay, z0, 1.0, meshes, 4096);
    for (std::size_t i = 0; i < meshes.size(); ++i) {
      series("integrator_error", 1.0 / meshes[i], em.errors[i]);
    }
    add("integrator_slope", em.slope, "in [0.8, 1.2]", em.slope >= 0.8 && em.slope <= 1.2);
    const double bound = 0.5 / 16.0 * std::exp(-1.0);
    const double ratio = em.errors[0] / bound;
    add("integrator_vs_euler_bound", ratio, "in [1/3, 3]", ratio >= 1.0 / 3.0 && ratio <= 3.0);
    const VectorField zero = [](const Matrix& z, double) { return Matrix(Matrix::Zero(z.rows(), z.cols())); };
    const EmulationResult ez = looped_emulates_integrator(zero, z0, 1.0, meshes, 64);
    const double zmax = *std::max_element(ez.errors.begin(), ez.errors.end());
    add("zero_field_error", zmax, "== 0", zmax == 0.0);
  }

  // Trotter splitting.
  {
    CoupledToyProcess proc;
    std::vector<double> dts, gaps;
    for (int m : {16, 32, 64, 128}) {
      dts.push_back(1.0 / m);
      gaps.push_back(trotter_error(proc, 1.0 / m));
      series("trotter_gap", dts.back(), gaps.back());
    }
    const double slope = loglog_slope(dts, gaps);
    add("trotter_slope", slope, "in [0.8, 1.2]", slope >= 0.8 && slope <= 1.2);
    const double macro = trotter_error(proc, 1.0);
    add("trotter_macro_step_worse", macro, "> gap(1/16)", macro > gaps[0]);
    CoupledToyProcess frozen = proc;
    frozen.g01 = 0.0;
    frozen.g10 = 0.0;
    frozen.p0 = 0.5;
    const double decoupled = trotter_error(frozen, 1.0 / 16.0);
    add("trotter_decoupled_gap", decoupled, "< 1e-3", decoupled < 1e-3);
  }

  // Mutual information decay.
  {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
    bool monotone = true;
    double max_rise = 0.0;
    for (const DiscreteSchedule& s : {DiscreteSchedule::masked_linear(), DiscreteSchedule::uniform(3.0)}) {
      const InfoDecayResult r = info_decay_suite(4, s, grid, 20000, seed);
      monotone = monotone && r.non_increasing;
      for (std::size_t i = 1; i < r.mi.size(); ++i) max_rise = std::max(max_rise, r.mi[i] - r.mi[i - 1]);
      for (std::size_t i = 0; i < r.t.size(); ++i) series("mi_" + s.name(), r.t[i], r.mi[i]);
    }
    add("mi_non_increasing", max_rise, "max rise <= 1e-12", monotone);
    const std::vector<double> uniform4(4, 0.25);
    const double erasure =
        std::abs(mutual_information(uniform4, DiscreteSchedule::masked_linear(), 0.5) -
                 0.5 * std::log(4.0));
    add("mi_erasure_value", erasure, "<= 1e-12", erasure <= 1e-12);
    const double at_zero = std::abs(mutual_information(uniform4, DiscreteSchedule::masked_linear(), 0.0) -
                                    std::log(4.0));
    add("mi_identity_channel", at_zero, "<= 1e-12", at_zero <= 1e-12);
    const double at_one = mutual_information(uniform4, DiscreteSchedule::masked_linear(), 1.0);
    add("mi_full_mask", at_one, "== 0", at_one == 0.0);
    const InfoDecayResult logits = info_decay_suite(4, DiscreteSchedule::masked_linear(), grid, 20000, seed);
    add("token_entropy_bounds", logits.logit_token_mi, "I <= H(token) <= ln V", logits.bounds_hold);
  }

  // Support atomicity.
  {
    const Codebook cb = Codebook::random_orthonormal(2, 4, seed);
    const SupportCounts sc =
        support_atomicity_check(2, 2, cb, DiscreteSchedule::masked_linear(),
                                ContinuousSchedule::concave_sqrt(), 0.5, 10000, seed);
    add("discrete_support", static_cast<double>(sc.discrete_embedded), "<= (V+1)^L = 9",
        sc.discrete_embedded <= sc.bound);
    add("continuous_distinct", static_cast<double>(sc.continuous), "== n_samples",
        sc.continuous == 10000);
  }
  return rep;
}

}  // namespace ccdd::theoria
