#include "weakmeas/fringe.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "weakmeas/errors.hpp"

namespace weakmeas {

double fringe_value(const FringeModel& m, double tau) {
  const double r = tau / m.t2star;
  return m.offset + m.contrast * std::exp(-r * r) * std::cos(m.coupling * tau + m.phase);
}

void FringeDataset::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.p0 >= 0.0 && p.p0 <= 1.0)) throw InvalidArgument("FringeDataset: p0 outside [0, 1]");
    if (p.n_shots < 1) throw InvalidArgument("FringeDataset: n_shots must be at least 1");
    if (!std::isfinite(p.tau) || (i > 0 && !(p.tau > points[i - 1].tau))) {
      throw InvalidArgument("FringeDataset: taus must be finite and strictly increasing");
    }
  }
}

FringeDataset generate_fringe_data(const FringeModel& m, std::span<const double> taus, std::size_t shots, Rng& rng) {
  if (shots < 1) throw InvalidArgument("generate_fringe_data: shots must be at least 1");
  FringeDataset d;
  d.points.reserve(taus.size());
  for (const double tau : taus) {
    const double p = fringe_value(m, tau);
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("generate_fringe_data: model leaves [0, 1]");
    std::binomial_distribution<std::size_t> draw(shots, p);
    d.points.push_back({tau, static_cast<double>(draw(rng)) / static_cast<double>(shots), shots});
  }
  d.validate();
  return d;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    v[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return v;
}

namespace {

// Internal units: microseconds and rad/us keep the normal matrix well scaled.
constexpr double kUs = 1e-6;
using Vec5 = Eigen::Matrix<double, 5, 1>;

struct Problem {
  Eigen::VectorXd tau;     // us
  Eigen::VectorXd y;
  Eigen::VectorXd weight;  // 1 / sigma

  // Columns: offset, contrast, coupling, phase, t2star.
  void evaluate(const Vec5& x, Eigen::VectorXd& resid, Eigen::MatrixXd* jac) const {
    const auto n = tau.size();
    resid.resize(n);
    if (jac) jac->resize(n, 5);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = tau(i);
      const double r = t / x(4);
      const double e = std::exp(-r * r);
      const double arg = x(2) * t + x(3);
      const double c = std::cos(arg), s = std::sin(arg);
      resid(i) = weight(i) * (y(i) - (x(0) + x(1) * e * c));
      if (jac) {
        (*jac)(i, 0) = weight(i);
        (*jac)(i, 1) = weight(i) * e * c;
        (*jac)(i, 2) = -weight(i) * x(1) * e * s * t;
        (*jac)(i, 3) = -weight(i) * x(1) * e * s;
        (*jac)(i, 4) = weight(i) * x(1) * e * c * 2.0 * t * t / (x(4) * x(4) * x(4));
      }
    }
  }

  double cost(const Vec5& x) const {
    Eigen::VectorXd r;
    evaluate(x, r, nullptr);
    return r.squaredNorm();
  }
};

// Strongest angular frequency of the mean-subtracted data (rad/us).
double periodogram_peak(const Problem& pb) {
  const Eigen::VectorXd centered = pb.y.array() - pb.y.mean();
  const double span = pb.tau(pb.tau.size() - 1) - pb.tau(0);
  double min_dt = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i < pb.tau.size(); ++i) min_dt = std::min(min_dt, pb.tau(i) - pb.tau(i - 1));
  const double w_lo = 2.0 * std::numbers::pi / span;
  const double w_hi = std::numbers::pi / min_dt;
  auto power = [&](double w) {
    std::complex<double> s = 0;
    for (Eigen::Index i = 0; i < pb.tau.size(); ++i) s += centered(i) * std::polar(1.0, -w * pb.tau(i));
    return std::norm(s);
  };
  double best_w = w_lo, best_p = -1.0;
  const int coarse = 4096;
  for (int k = 0; k < coarse; ++k) {
    const double w = w_lo + (w_hi - w_lo) * k / (coarse - 1);
    const double p = power(w);
    if (p > best_p) {
      best_p = p;
      best_w = w;
    }
  }
  const double dw = (w_hi - w_lo) / (coarse - 1);
  for (int k = -200; k <= 200; ++k) {
    const double w = best_w + dw * k / 200.0;
    const double p = power(w);
    if (p > best_p) {
      best_p = p;
      best_w = w;
    }
  }
  return best_w;
}

// Given frequency, scan T2* and solve the remaining linear parameters.
Vec5 initial_guess(const Problem& pb) {
  const double w = periodogram_peak(pb);
  const double span = pb.tau(pb.tau.size() - 1) - pb.tau(0);
  Vec5 best;
  double best_cost = std::numeric_limits<double>::infinity();
  const auto n = pb.tau.size();
  for (int k = 0; k < 60; ++k) {
    const double t2 = span * std::pow(10.0, -2.0 + 3.0 * k / 59.0);
    Eigen::MatrixXd basis(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = pb.tau(i) / t2;
      const double e = std::exp(-r * r);
      basis(i, 0) = pb.weight(i);
      basis(i, 1) = pb.weight(i) * e * std::cos(w * pb.tau(i));
      basis(i, 2) = pb.weight(i) * e * std::sin(w * pb.tau(i));
    }
    const Eigen::VectorXd rhs = pb.y.cwiseProduct(pb.weight);
    const Eigen::Vector3d coef = basis.colPivHouseholderQr().solve(rhs);
    // a cos(w t + phi) = a cos(phi) cos(w t) - a sin(phi) sin(w t)
    Vec5 x;
    x << coef(0), std::hypot(coef(1), coef(2)), w, std::atan2(-coef(2), coef(1)), t2;
    const double c = pb.cost(x);
    if (c < best_cost) {
      best_cost = c;
      best = x;
    }
  }
  return best;
}

Vec5 to_internal(const FringeModel& m) {
  Vec5 x;
  x << m.offset, m.contrast, m.coupling * kUs, m.phase, m.t2star / kUs;
  return x;
}

FringeModel to_model(const Vec5& x) {
  return {x(0), x(1), x(2) / kUs, x(3), x(4) * kUs};
}

}  // namespace

FitResult fit_fringe(const FringeDataset& data, std::optional<FringeModel> init) {
  data.validate();
  if (data.points.size() < 5) throw InvalidArgument("fit_fringe: need at least 5 points");
  const auto n = static_cast<Eigen::Index>(data.points.size());
  Problem pb;
  pb.tau.resize(n);
  pb.y.resize(n);
  pb.weight.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = data.points[static_cast<std::size_t>(i)];
    const double shots = static_cast<double>(p.n_shots);
    // Regularized binomial variance keeps weights finite at p0 = 0 or 1.
    const double pt = (p.p0 * shots + 0.5) / (shots + 1.0);
    pb.tau(i) = p.tau / kUs;
    pb.y(i) = p.p0;
    pb.weight(i) = 1.0 / std::sqrt(pt * (1.0 - pt) / shots);
  }

  Vec5 x = init ? to_internal(*init) : initial_guess(pb);
  FitResult out;
  double cost = pb.cost(x);
  out.initial_residual_norm = std::sqrt(cost);

  double lambda = 1e-3;
  Eigen::VectorXd resid;
  Eigen::MatrixXd jac;
  constexpr int kMaxIterations = 200;
  for (int it = 1; it <= kMaxIterations; ++it) {
    out.iterations = it;
    pb.evaluate(x, resid, &jac);
    const Eigen::Matrix<double, 5, 5> jtj = jac.transpose() * jac;
    const Vec5 jtr = jac.transpose() * resid;
    bool accepted = false;
    Vec5 step = Vec5::Zero();
    for (int tries = 0; tries < 60 && !accepted; ++tries) {
      Eigen::Matrix<double, 5, 5> a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      step = a.ldlt().solve(jtr);
      Vec5 trial = x + step;
      if (!(trial(4) > 0.0) || !trial.allFinite()) {
        lambda *= 2.0;
        continue;
      }
      const double c = pb.cost(trial);
      if (c <= cost) {
        accepted = true;
        const double drop = cost - c;
        x = trial;
        cost = c;
        lambda = std::max(lambda / 2.0, 1e-12);
        if (drop <= 1e-12 * std::max(cost, 1e-300) ||
            step.cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
          out.converged = true;
        }
      } else {
        lambda *= 2.0;
      }
    }
    if (!accepted) {
      // No descent direction left: at a (possibly flat) optimum.
      out.converged = jtr.cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, std::sqrt(cost));
      break;
    }
    if (out.converged) break;
  }

  if (x(1) < 0.0) {
    x(1) = -x(1);
    x(3) += std::numbers::pi;
  }
  x(3) = std::remainder(x(3), 2.0 * std::numbers::pi);

  pb.evaluate(x, resid, &jac);
  const Eigen::Matrix<double, 5, 5> cov = (jac.transpose() * jac).inverse();
  Vec5 err = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.params = to_model(x);
  out.std_errors = to_model(err);
  out.residual_norm = std::sqrt(cost);
  return out;
}

void write_fringe_csv(std::ostream& os, const FringeDataset& data) {
  data.validate();
  os << "tau_s,p0,n_shots\n";
  os.precision(17);
  for (const auto& p : data.points) os << p.tau << ',' << p.p0 << ',' << p.n_shots << '\n';
}

FringeDataset read_fringe_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("read_fringe_csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "tau_s,p0,n_shots") throw InvalidArgument("read_fringe_csv: expected header 'tau_s,p0,n_shots'");
  FringeDataset d;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c)) {
      throw InvalidArgument("read_fringe_csv: row " + std::to_string(row) + " does not have three columns");
    }
    try {
      const long long shots = std::stoll(c);
      if (shots < 1) throw InvalidArgument("read_fringe_csv: n_shots must be positive");
      d.points.push_back({std::stod(a), std::stod(b), static_cast<std::size_t>(shots)});
    } catch (const std::logic_error&) {
      throw InvalidArgument("read_fringe_csv: malformed number in row " + std::to_string(row));
    }
  }
  d.validate();
  return d;
}

}  // namespace weakmeas
