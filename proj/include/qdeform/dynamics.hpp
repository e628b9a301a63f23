#pragma once

// Time-dependent deformation: u follows a path u(t) at fixed q, the free
// ladder operators evolve as a(t) = e^{-it} a, and
//   A(t) = S(t) a(t) T(t)^dagger = e^{-it} S a T^T,
//   B(t) = T(t) a(t)^dagger S(t)^-1 = e^{+it} T a^T S^-1.
// Frames store the real bodies S a T^T and T a^T S^-1; the phases are applied
// in Real wherever a time derivative of A or B is taken.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qdeform/errors.hpp"
#include "qdeform/fock.hpp"
#include "qdeform/scalar.hpp"
#include "qdeform/similarity.hpp"
#include "qdeform/unitary_flow.hpp"

namespace qdeform {

enum class Ladder { lowering, raising };

/// Free evolution: e^{-it} a0 for lowering-type input, e^{+it} a0 for raising-type.
inline FockMatrix evolve_free(const FockMatrix& a0, double t, Ladder kind = Ladder::lowering) {
  const Complex phase = std::polar(1.0, kind == Ladder::lowering ? -t : t);
  return FockMatrix(CMatrix(phase * a0.mat()), a0.label() + "(t)");
}

enum class PathFamily { constant, ramp, sine };

struct ParameterPath {
  PathFamily family = PathFamily::constant;
  double u0 = 0.7;
  double rate = 0.0;   // ramp slope, or sine amplitude
  double omega = 1.0;  // sine angular frequency
  double q = 1.2;
  double t_end = 1.0;
  double h = 1e-3;

  double u(double t) const {
    switch (family) {
      case PathFamily::ramp: return u0 + rate * t;
      case PathFamily::sine: return u0 + rate * std::sin(omega * t);
      default: return u0;
    }
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_end / h)); }
  double time(std::size_t i) const { return h * static_cast<double>(i); }
  bool trivial() const { return q == 1.0 && u0 == 0.0 && (family == PathFamily::constant || rate == 0.0); }

  std::string text() const {
    std::ostringstream os;
    os.precision(17);
    switch (family) {
      case PathFamily::constant: os << "const:" << u0; break;
      case PathFamily::ramp: os << "ramp:" << u0 << ',' << rate; break;
      case PathFamily::sine: os << "sine:" << u0 << ',' << rate << ',' << omega; break;
    }
    return os.str();
  }

  void validate() const {
    require(std::isfinite(q) && q > 0.0, ErrorKind::parameter, "path q must be positive and finite");
    require(std::isfinite(u0) && std::isfinite(rate) && std::isfinite(omega), ErrorKind::parameter,
            "path coefficients must be finite");
    require(std::isfinite(t_end) && t_end > 0.0 && std::isfinite(h) && h > 0.0, ErrorKind::parameter,
            "t_end and h must be positive");
    const double ratio = t_end / h;
    require(std::abs(ratio - std::round(ratio)) <= 1e-9 * ratio, ErrorKind::parameter,
            "t_end must be an integer multiple of h");
    require(h <= t_end / 50.0 * (1.0 + 1e-12), ErrorKind::parameter, "sample step must satisfy h <= t_end/50");
    if (trivial()) return;
    double prev = u(0.0);
    for (std::size_t i = 0; i <= steps(); ++i) {
      const double ui = u(time(i));
      if (ui == 0.0 || (prev > 0.0) != (ui > 0.0)) {
        throw Error(ErrorKind::no_solution, "u(t) vanishes near t=" + std::to_string(time(i)) +
                                                "; the similarity solve needs u != 0 along the path");
      }
      prev = ui;
    }
  }

  /// Parse "const:u0", "ramp:u0,rate" or "sine:u0,amplitude,omega".
  static ParameterPath parse(const std::string& text) {
    const auto colon = text.find(':');
    require(colon != std::string::npos, ErrorKind::parameter, "path spec must look like family:values");
    const std::string name = text.substr(0, colon);
    std::vector<double> values;
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(item, &used));
        require(used == item.size(), ErrorKind::parameter, "bad number '" + item + "' in path spec");
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::parameter, "bad number '" + item + "' in path spec");
      }
    }
    ParameterPath p;
    if (name == "const" || name == "constant") {
      require(values.size() == 1, ErrorKind::parameter, "const path takes one value");
      p.family = PathFamily::constant;
    } else if (name == "ramp") {
      require(values.size() == 2, ErrorKind::parameter, "ramp path takes u0,rate");
      p.family = PathFamily::ramp;
      p.rate = values[1];
    } else if (name == "sine") {
      require(values.size() == 3, ErrorKind::parameter, "sine path takes u0,amplitude,omega");
      p.family = PathFamily::sine;
      p.rate = values[1];
      p.omega = values[2];
    } else {
      throw Error(ErrorKind::parameter, "unknown path family '" + name + "'");
    }
    p.u0 = values[0];
    return p;
  }
};

template <class Real>
struct TrajectoryFrame {
  double t = 0.0;
  double u = 0.0;
  RMatrix<Real> s;       // S(t)
  RMatrix<Real> s_inv;   // S(t)^-1
  RMatrix<Real> flow;    // T(t)
  RMatrix<Real> a_body;  // A(t) = e^{-it} a_body
  RMatrix<Real> b_body;  // B(t) = e^{+it} b_body
  RMatrix<Real> ds_dt;
  RMatrix<Real> ds_inv_dt;
  RMatrix<Real> dflow_dt;
  double inverse_residual = 0.0;
  double sylvester_residual = 0.0;
  double condition_1norm = 1.0;

  FockMatrix a_op() const {
    return FockMatrix(CMatrix(std::polar(1.0, -t) * to_complex(a_body)), "A(t)");
  }
  FockMatrix b_op() const {
    return FockMatrix(CMatrix(std::polar(1.0, t) * to_complex(b_body)), "B(t)");
  }
};

template <class Real>
struct Trajectory {
  ParameterPath path;
  std::size_t dim = 0;
  std::size_t block = 0;
  std::vector<TrajectoryFrame<Real>> frames;

  double h() const { return path.h; }
};

struct TrajectoryOptions {
  std::size_t block = 0;  // 0 selects D/4
  std::vector<double> extra_gauge;
  unsigned threads = 1;
};

namespace detail {

/// Stencil weights for d/dt at frame i: central inside, second-order one-sided at the ends.
inline std::vector<std::pair<std::size_t, double>> derivative_stencil(std::size_t i, std::size_t n, double h) {
  require(n >= 3, ErrorKind::parameter, "finite differences need at least three frames");
  const double w = 1.0 / (2.0 * h);
  if (i == 0) return {{0, -3.0 * w}, {1, 4.0 * w}, {2, -w}};
  if (i + 1 == n) return {{n - 1, 3.0 * w}, {n - 2, -4.0 * w}, {n - 3, w}};
  return {{i + 1, w}, {i - 1, -w}};
}

template <class Real, class Member>
RMatrix<Real> differentiate(const std::vector<TrajectoryFrame<Real>>& frames, std::size_t i, double h, Member member) {
  RMatrix<Real> out;
  for (const auto& [j, w] : derivative_stencil(i, frames.size(), h)) {
    const RMatrix<Real>& m = frames[j].*member;
    if (out.size() == 0)
      out = m * Real(w);
    else
      out += m * Real(w);
  }
  return out;
}

template <class Real>
double norm1(const RMatrix<Real>& m) {
  double best = 0.0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    double sum = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) sum += std::abs(to_double(m(r, c)));
    best = std::max(best, sum);
  }
  return best;
}

/// Entrywise modulus of re + i im, maximized over the leading rows x cols block.
template <class Real>
double complex_max_abs(const RMatrix<Real>& re, const RMatrix<Real>& im, Eigen::Index rows, Eigen::Index cols) {
  using std::sqrt;
  double best = 0.0;
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double v = to_double(Real(sqrt(re(r, c) * re(r, c) + im(r, c) * im(r, c))));
      if (!(v <= best)) best = v;
    }
  }
  return best;
}

}  // namespace detail

/// Fill the finite-difference derivatives of S, S^-1 and T in every frame.
template <class Real>
void differentiate_frames(Trajectory<Real>& traj) {
  auto& f = traj.frames;
  const double h = traj.h();
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i].ds_dt = detail::differentiate(f, i, h, &TrajectoryFrame<Real>::s);
    f[i].ds_inv_dt = detail::differentiate(f, i, h, &TrajectoryFrame<Real>::s_inv);
    f[i].dflow_dt = detail::differentiate(f, i, h, &TrajectoryFrame<Real>::flow);
  }
}

/// Frames at t_i = i h with S gauge-fixed consistently: the unit max-abs rule at
/// t=0 picks one normalization row per column, reused at every later time.
template <class Real>
Trajectory<Real> build_trajectory(const ParameterPath& path, std::size_t dim, const TrajectoryOptions& options = {}) {
  path.validate();
  detail::require_fock_dim(dim);
  Trajectory<Real> traj;
  traj.path = path;
  traj.dim = dim;
  traj.block = options.block == 0 ? std::max<std::size_t>(1, dim / 4) : options.block;
  require(traj.block <= dim / 2, ErrorKind::parameter, "interior block must satisfy K <= D/2");

  const std::size_t n = path.steps() + 1;
  traj.frames.resize(n);
  const DisplacementKernel<Real> kernel(dim);
  const RMatrix<Real> a = lowering<Real>(dim);

  SolveOptions solve_options;
  solve_options.extra_gauge = options.extra_gauge;
  solve_options.estimate_condition = false;

  auto params_at = [&](double u) {
    DeformParams p;
    p.q = path.q;
    p.u = u;
    p.dim = dim;
    p.interior = traj.block;
    return p;
  };
  if (!path.trivial()) solve_options.gauge_rows = solve_similarity<Real>(params_at(path.u(0.0)), solve_options).peak_rows;

  auto build = [&](std::size_t i) {
    TrajectoryFrame<Real>& f = traj.frames[i];
    f.t = path.time(i);
    f.u = path.trivial() ? 0.0 : path.u(f.t);
    try {
      const DeformParams p = params_at(f.u);
      SimilaritySolution<Real> sol = solve_similarity<Real>(p, solve_options);
      CertifiedInverse<Real> inv = invert_similarity(sol, p.tol.inverse);
      f.sylvester_residual = sol.max_sylvester_residual();
      require(f.sylvester_residual <= p.tol.sylvester, ErrorKind::inversion,
              "Sylvester residual " + std::to_string(f.sylvester_residual) + " exceeds certification");
      f.s = std::move(sol.s);
      f.s_inv = std::move(inv.inverse);
      f.inverse_residual = inv.residual;
      f.flow = kernel(Real(f.u));
      f.a_body = (f.s * a) * f.flow.transpose();
      f.b_body = f.flow * (a.transpose() * f.s_inv);
      f.condition_1norm = detail::norm1(f.s) * detail::norm1(f.s_inv);
    } catch (const Error& e) {
      throw Error(e.kind(), "at t=" + std::to_string(f.t) + ": " + e.what());
    }
  };

  // A constant path has one distinct parameter value.
  const bool constant = path.trivial() || path.family == PathFamily::constant || path.rate == 0.0;
  if (constant) {
    build(0);
    for (std::size_t i = 1; i < n; ++i) {
      traj.frames[i] = traj.frames[0];
      traj.frames[i].t = path.time(i);
    }
  } else {
    const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n)));
    if (workers == 1) {
      for (std::size_t i = 0; i < n; ++i) build(i);
    } else {
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < n; i += workers) build(i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
  }
  differentiate_frames(traj);
  return traj;
}

/// Every stride-th frame of a finer trajectory, with derivatives recomputed at step stride*h.
template <class Real>
Trajectory<Real> coarsen(const Trajectory<Real>& fine, std::size_t stride) {
  require(stride >= 1 && fine.path.steps() % stride == 0, ErrorKind::parameter,
          "stride must divide the number of steps");
  Trajectory<Real> out;
  out.path = fine.path;
  out.path.h = fine.path.h * static_cast<double>(stride);
  out.path.validate();
  out.dim = fine.dim;
  out.block = fine.block;
  for (std::size_t i = 0; i < fine.frames.size(); i += stride) out.frames.push_back(fine.frames[i]);
  differentiate_frames(out);
  return out;
}

struct EomResidual {
  double t = 0.0;
  double residual_a = 0.0;
  double residual_b = 0.0;
};

/// Residuals of (d/dt + i)A = S' S^-1 A + A T T'^dagger and
/// (d/dt - i)B = B S dS^-1/dt + T' T^dagger B on the K block, with dA/dt and
/// dB/dt by finite differences of the phased operators.
template <class Real>
std::vector<EomResidual> modified_eom_residual(const Trajectory<Real>& traj) {
  const auto& f = traj.frames;
  require(f.size() >= 3, ErrorKind::parameter, "modified equations need at least three frames");
  using std::cos;
  using std::sin;
  const auto k = static_cast<Eigen::Index>(traj.block);
  const double h = traj.h();
  std::vector<EomResidual> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto& fr = f[i];
    RMatrix<Real> da_re = RMatrix<Real>::Zero(k, k), da_im = RMatrix<Real>::Zero(k, k);
    RMatrix<Real> db_re = RMatrix<Real>::Zero(k, k), db_im = RMatrix<Real>::Zero(k, k);
    for (const auto& [j, w] : detail::derivative_stencil(i, f.size(), h)) {
      const Real tj(f[j].t);
      const Real c = cos(tj) * Real(w);
      const Real s = sin(tj) * Real(w);
      const auto ab = f[j].a_body.topLeftCorner(k, k);
      const auto bb = f[j].b_body.topLeftCorner(k, k);
      da_re += ab * c;
      da_im -= ab * s;
      db_re += bb * c;
      db_im += bb * s;
    }
    const Real c = cos(Real(fr.t));
    const Real s = sin(Real(fr.t));
    const RMatrix<Real> ak = fr.a_body.topLeftCorner(k, k);
    const RMatrix<Real> bk = fr.b_body.topLeftCorner(k, k);

    const RMatrix<Real> ga = fr.ds_dt.topRows(k) * (fr.s_inv * fr.a_body.leftCols(k)) +
                             fr.a_body.topRows(k) * (fr.flow * fr.dflow_dt.topRows(k).transpose());
    const RMatrix<Real> ra_re = da_re - ga * c + ak * s;
    const RMatrix<Real> ra_im = da_im + ak * c + ga * s;

    const RMatrix<Real> gb = fr.b_body.topRows(k) * (fr.s * fr.ds_inv_dt.leftCols(k)) +
                             (fr.dflow_dt.topRows(k) * fr.flow.transpose()) * fr.b_body.leftCols(k);
    const RMatrix<Real> rb_re = db_re - gb * c + bk * s;
    const RMatrix<Real> rb_im = db_im - bk * c - gb * s;

    out[i] = {fr.t, detail::complex_max_abs(ra_re, ra_im, k, k), detail::complex_max_abs(rb_re, rb_im, k, k)};
  }
  return out;
}

/// Framewise ||dS^-1/dt + S^-1 S' S^-1||_max on the K block, relative to ||S^-1 S' S^-1||.
template <class Real>
std::vector<double> inverse_derivative_residual(const Trajectory<Real>& traj) {
  const auto k = static_cast<Eigen::Index>(traj.block);
  std::vector<double> out;
  for (const auto& f : traj.frames) {
    const RMatrix<Real> expected = -(f.s_inv.topRows(k) * f.ds_dt) * f.s_inv.leftCols(k);
    const double scale = max_abs(expected);
    const double diff = max_abs(RMatrix<Real>(f.ds_inv_dt.topLeftCorner(k, k) - expected));
    out.push_back(scale > 0.0 ? diff / scale : diff);
  }
  return out;
}

/// Max over frames of the K-block residuals of a T^dagger = S^-1 A, S a = A T,
/// T a^dagger = B S and a^dagger S^-1 = T^dagger B (phases cancel in each).
template <class Real>
double frame_identity_residual(const Trajectory<Real>& traj) {
  const auto k = static_cast<Eigen::Index>(traj.block);
  const RMatrix<Real> a = lowering<Real>(traj.dim);
  double worst = 0.0;
  for (const auto& f : traj.frames) {
    const RMatrix<Real> r1 = (a * f.flow.transpose()).topLeftCorner(k, k) - (f.s_inv * f.a_body).topLeftCorner(k, k);
    const RMatrix<Real> r2 = (f.s * a).topLeftCorner(k, k) - (f.a_body * f.flow).topLeftCorner(k, k);
    const RMatrix<Real> r3 = (f.flow * a.transpose()).topLeftCorner(k, k) - (f.b_body * f.s).topLeftCorner(k, k);
    const RMatrix<Real> r4 =
        (a.transpose() * f.s_inv).topLeftCorner(k, k) - (f.flow.transpose() * f.b_body).topLeftCorner(k, k);
    for (const auto* r : {&r1, &r2, &r3, &r4}) worst = std::max(worst, max_abs(*r));
  }
  return worst;
}

/// Max over frames of ||A - S a(t) T^dagger||_max on the full matrix, assembled independently in double.
template <class Real>
double assembly_residual(const Trajectory<Real>& traj) {
  const CMatrix a = annihilation(traj.dim).mat();
  double worst = 0.0;
  for (const auto& f : traj.frames) {
    const CMatrix direct = to_complex(f.s) * (std::polar(1.0, -f.t) * a) * to_complex(f.flow).adjoint();
    const double scale = std::max(1.0, max_abs(f.a_op().mat()));
    worst = std::max(worst, max_abs(CMatrix(f.a_op().mat() - direct)) / scale);
  }
  return worst;
}

/// drift(t) = ||[A(t), B(t)] - (I + (q-1)N)||_max on the K block.
template <class Real>
std::vector<double> commutator_drift(const Trajectory<Real>& traj) {
  const auto k = static_cast<Eigen::Index>(traj.block);
  const Real qm1 = Real(traj.path.q) - Real(1);
  std::vector<double> out;
  for (const auto& f : traj.frames) {
    RMatrix<Real> c = f.a_body.topRows(k) * f.b_body.leftCols(k) - f.b_body.topRows(k) * f.a_body.leftCols(k);
    for (Eigen::Index m = 0; m < k; ++m) c(m, m) -= Real(1) + qm1 * Real(m);
    out.push_back(max_abs(c));
  }
  return out;
}

enum class Which { a, b };

inline std::string to_string(Which w) { return w == Which::a ? "A" : "B"; }

struct GreenOptions {
  double initial_shift = 0.0;  // added to the diagonal of the K block of the initial value
};

struct GreenResult {
  Which which = Which::a;
  double step = 0.0;
  std::vector<double> times;
  std::vector<double> deviation;  // ||reconstructed - direct||_max on the K block
  double max_deviation = 0.0;
};

/// Retarded reconstruction: integrate (d/dt -+ i - L(t)) X = C(t) forward from the
/// direct value at t=0 with classical RK4 at step 2h, where for A
///   L = S' S^-1 + T T'^dagger,  C = [A, T T'^dagger],
/// and for B
///   L = S dS^-1/dt + T' T^dagger,  C = [B, S dS^-1/dt],
/// with C taken from the direct trajectory. Left multiplication by L acts
/// column by column, so only the leading K columns are propagated.
template <class Real>
GreenResult green_reconstruct(const Trajectory<Real>& traj, Which which, const GreenOptions& options = {}) {
  using std::cos;
  using std::sin;
  const auto& f = traj.frames;
  require(f.size() >= 3, ErrorKind::parameter, "reconstruction needs at least three frames");
  const auto d = static_cast<Eigen::Index>(traj.dim);
  const auto k = static_cast<Eigen::Index>(traj.block);
  const double sigma = which == Which::a ? -1.0 : 1.0;  // X = e^{sigma i t} body

  std::vector<RMatrix<Real>> lin(f.size());
  std::vector<RMatrix<Real>> src(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto& fr = f[i];
    if (which == Which::a) {
      const RMatrix<Real> rot = fr.flow * fr.dflow_dt.transpose();
      lin[i] = fr.ds_dt * fr.s_inv + rot;
      src[i] = fr.a_body * rot.leftCols(k) - rot * fr.a_body.leftCols(k);
    } else {
      const RMatrix<Real> conn = fr.s * fr.ds_inv_dt;
      lin[i] = conn + fr.dflow_dt * fr.flow.transpose();
      src[i] = fr.b_body * conn.leftCols(k) - conn * fr.b_body.leftCols(k);
    }
  }
  const RMatrix<Real>& (*body)(const TrajectoryFrame<Real>&) =
      which == Which::a ? +[](const TrajectoryFrame<Real>& fr) -> const RMatrix<Real>& { return fr.a_body; }
                        : +[](const TrajectoryFrame<Real>& fr) -> const RMatrix<Real>& { return fr.b_body; };

  struct State {
    RMatrix<Real> re, im;
  };
  const Real sig(sigma);
  auto rhs = [&](std::size_t i, const State& x) {
    const Real t(f[i].t);
    const Real c = cos(t);
    const Real s = sin(t);
    State out;
    out.re = lin[i] * x.re - x.im * sig + src[i] * c;
    out.im = lin[i] * x.im + x.re * sig + src[i] * (sig * s);
    return out;
  };
  auto axpy = [](const State& x, const State& k1, const Real& w) {
    return State{x.re + k1.re * w, x.im + k1.im * w};
  };
  auto deviation = [&](std::size_t i, const State& x) {
    const Real t(f[i].t);
    const RMatrix<Real> b = body(f[i]).topLeftCorner(k, k);
    const RMatrix<Real> er = x.re.topRows(k) - b * cos(t);
    const RMatrix<Real> ei = x.im.topRows(k) - b * (sig * sin(t));
    return detail::complex_max_abs(er, ei, k, k);
  };

  State x{body(f[0]).leftCols(k), RMatrix<Real>::Zero(d, k)};
  for (Eigen::Index m = 0; m < k; ++m) x.re(m, m) += Real(options.initial_shift);

  GreenResult result;
  result.which = which;
  result.step = 2.0 * traj.h();
  const Real step(result.step);
  const Real half = step / Real(2);
  result.times.push_back(f[0].t);
  result.deviation.push_back(deviation(0, x));
  for (std::size_t i = 0; i + 2 < f.size(); i += 2) {
    const State k1 = rhs(i, x);
    const State k2 = rhs(i + 1, axpy(x, k1, half));
    const State k3 = rhs(i + 1, axpy(x, k2, half));
    const State k4 = rhs(i + 2, axpy(x, k3, step));
    const Real w = step / Real(6);
    x.re += (k1.re + k2.re * Real(2) + k3.re * Real(2) + k4.re) * w;
    x.im += (k1.im + k2.im * Real(2) + k3.im * Real(2) + k4.im) * w;
    for (Eigen::Index c = 0; c < k; ++c)
      for (Eigen::Index r = 0; r < d; ++r)
        if (!is_finite(x.re(r, c)) || !is_finite(x.im(r, c)))
          throw Error(ErrorKind::integrator, "reconstruction became non-finite at t=" + std::to_string(f[i + 2].t));
    result.times.push_back(f[i + 2].t);
    result.deviation.push_back(deviation(i + 2, x));
  }
  result.max_deviation = *std::max_element(result.deviation.begin(), result.deviation.end());
  return result;
}

}  // namespace qdeform
