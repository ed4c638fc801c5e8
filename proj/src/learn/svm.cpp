// Soft-margin C-SVC with a Gaussian kernel, solved by SMO with second-order
// working-set selection (Fan, Chen & Lin 2005, as in LIBSVM).

#include <cmath>
#include <limits>

#include <json.hpp>

#include "periocular/common.hpp"
#include "periocular/learn.hpp"

namespace periocular {

namespace {

constexpr double kTau = 1e-12;

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

class SmoSolver {
 public:
  SmoSolver(const Matrix& x, const std::vector<int>& y, double C, double gamma, double tol)
      : n_(x.rows()), y_(y), C_(C), tol_(tol), K_(n_ * n_), alpha_(n_, 0.0), grad_(n_, -1.0) {
    for (std::size_t i = 0; i < n_; ++i) {
      K_[i * n_ + i] = 1.0;
      for (std::size_t j = i + 1; j < n_; ++j) {
        const double k = std::exp(-gamma * squared_distance(x.row(i), x.row(j)));
        K_[i * n_ + j] = k;
        K_[j * n_ + i] = k;
      }
    }
  }

  void solve() {
    const std::size_t max_iter = std::max<std::size_t>(10'000'000, 100 * n_);
    while (iterations_ < max_iter) {
      std::size_t i, j;
      if (select_working_set(i, j)) {
        converged_ = true;
        return;
      }
      ++iterations_;
      update(i, j);
    }
    converged_ = false;
  }

  // b in f(x) = sum alpha_i y_i K(x_i, x) + b; LIBSVM's rho is -b.
  double bias() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double yg = y_[i] * grad_[i];
      if (at_upper(i)) {
        if (y_[i] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else if (at_lower(i)) {
        if (y_[i] == +1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
    return -rho;
  }

  const std::vector<double>& alpha() const { return alpha_; }
  std::size_t iterations() const { return iterations_; }
  bool converged() const { return converged_; }

 private:
  bool at_upper(std::size_t i) const { return alpha_[i] >= C_; }
  bool at_lower(std::size_t i) const { return alpha_[i] <= 0.0; }
  double K(std::size_t i, std::size_t j) const { return K_[i * n_ + j]; }
  double Q(std::size_t i, std::size_t j) const { return y_[i] * y_[j] * K(i, j); }

  // Returns true when the maximal violating pair is within tolerance.
  bool select_working_set(std::size_t& out_i, std::size_t& out_j) const {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t gmax_idx = -1;
    for (std::size_t t = 0; t < n_; ++t) {
      if (y_[t] == +1) {
        if (!at_upper(t) && -grad_[t] >= gmax) {
          gmax = -grad_[t];
          gmax_idx = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!at_lower(t) && grad_[t] >= gmax) {
        gmax = grad_[t];
        gmax_idx = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (gmax_idx < 0) return true;
    const auto i = static_cast<std::size_t>(gmax_idx);

    std::ptrdiff_t gmin_idx = -1;
    double obj_diff_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n_; ++j) {
      if (y_[j] == +1) {
        if (at_lower(j)) continue;
        const double grad_diff = gmax + grad_[j];
        gmax2 = std::max(gmax2, grad_[j]);
        if (grad_diff > 0.0) {
          const double quad = K(i, i) + K(j, j) - 2.0 * y_[i] * Q(i, j);
          const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
          if (obj <= obj_diff_min) {
            gmin_idx = static_cast<std::ptrdiff_t>(j);
            obj_diff_min = obj;
          }
        }
      } else {
        if (at_upper(j)) continue;
        const double grad_diff = gmax - grad_[j];
        gmax2 = std::max(gmax2, -grad_[j]);
        if (grad_diff > 0.0) {
          const double quad = K(i, i) + K(j, j) + 2.0 * y_[i] * Q(i, j);
          const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
          if (obj <= obj_diff_min) {
            gmin_idx = static_cast<std::ptrdiff_t>(j);
            obj_diff_min = obj;
          }
        }
      }
    }
    if (gmax + gmax2 < tol_ || gmin_idx < 0) return true;
    out_i = i;
    out_j = static_cast<std::size_t>(gmin_idx);
    return false;
  }

  void update(std::size_t i, std::size_t j) {
    const double old_ai = alpha_[i];
    const double old_aj = alpha_[j];
    double& ai = alpha_[i];
    double& aj = alpha_[j];
    if (y_[i] != y_[j]) {
      double quad = K(i, i) + K(j, j) + 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else if (ai < 0.0) {
        ai = 0.0; aj = -diff;
      }
      if (diff > 0.0) {
        if (ai > C_) { ai = C_; aj = C_ - diff; }
      } else if (aj > C_) {
        aj = C_; ai = C_ + diff;
      }
    } else {
      double quad = K(i, i) + K(j, j) - 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C_) {
        if (ai > C_) { ai = C_; aj = sum - C_; }
      } else if (aj < 0.0) {
        aj = 0.0; ai = sum;
      }
      if (sum > C_) {
        if (aj > C_) { aj = C_; ai = sum - C_; }
      } else if (ai < 0.0) {
        ai = 0.0; aj = sum;
      }
    }
    const double dai = ai - old_ai;
    const double daj = aj - old_aj;
    for (std::size_t k = 0; k < n_; ++k) grad_[k] += Q(i, k) * dai + Q(j, k) * daj;
  }

  std::size_t n_;
  const std::vector<int>& y_;
  double C_;
  double tol_;
  std::vector<double> K_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
  std::size_t iterations_ = 0;
  bool converged_ = false;
};

}  // namespace

TrainedModel train_svm(const LabeledSet& data, const SvmParams& params, std::uint64_t seed) {
  data.validate(true);
  if (!(params.C > 0.0)) throw ArgumentError("SVM C must be > 0");
  if (!(params.gamma > 0.0)) throw ArgumentError("SVM gamma must be > 0");
  if (!(params.tol > 0.0 && params.tol <= 0.1)) throw ArgumentError("SVM tol must lie in (0, 0.1]");

  SvmState state;
  state.gamma = params.gamma;
  Matrix x = data.x;
  if (params.standardize) {
    state.standardizer = Standardizer::fit(data.x);
    for (std::size_t r = 0; r < x.rows(); ++r) state.standardizer.apply(data.x.row(r), x.row(r));
  }

  SmoSolver solver(x, data.y, params.C, params.gamma, params.tol);
  solver.solve();
  state.iterations = solver.iterations();
  state.converged = solver.converged();
  state.bias = solver.bias();
  const auto& alpha = solver.alpha();
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] > 0.0) {
      state.support_vectors.append_row(x.row(i));
      state.coef.push_back(alpha[i] * data.y[i]);
    }
  }

  TrainedModel model;
  model.kind = ModelKind::svm;
  model.seed = seed;
  model.spec_id = data.spec_id;
  model.dim = data.dim();
  model.config_json = nlohmann::ordered_json{{"C", params.C},
                                             {"gamma", params.gamma},
                                             {"tol", params.tol},
                                             {"standardize", params.standardize}}
                          .dump();
  model.state = std::move(state);
  return model;
}

double svm_dual_objective(const TrainedModel& model) {
  const auto* s = std::get_if<SvmState>(&model.state);
  if (!s) throw UsageError("svm_dual_objective needs an SVM model");
  double linear = 0.0, quad = 0.0;
  const std::size_t n = s->coef.size();
  for (std::size_t i = 0; i < n; ++i) {
    linear += std::abs(s->coef[i]);
    for (std::size_t j = 0; j < n; ++j) {
      const double k = std::exp(-s->gamma * squared_distance(s->support_vectors.row(i), s->support_vectors.row(j)));
      quad += s->coef[i] * s->coef[j] * k;
    }
  }
  return linear - 0.5 * quad;
}

}  // namespace periocular
