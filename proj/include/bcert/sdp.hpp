#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stop_token>
#include <string>
#include <tuple>
#include <vector>

#include "bcert/error.hpp"

namespace bcert {

// ---------------------------------------------------------------------------
// Problem and solution types
// ---------------------------------------------------------------------------

/// Marks an entry of the nonnegative-orthant (LP) block.
inline constexpr int kLpBlock = -1;

/// One entry of a symmetric block-diagonal data matrix. For row < col the
/// matrix holds `value` at both (row, col) and (col, row). LP entries use
/// block kLpBlock and row == col == variable index.
struct SdpEntry {
  int block;
  int row;
  int col;
  double value;
};

/// Standard primal form
///   minimize <C, X>  s.t.  <A_i, X> = b_i,  X = diag(X_1..X_k, x_lp) >= 0.
struct SdpProblem {
  std::vector<int> block_dims;
  int lp_dim = 0;
  std::vector<std::vector<SdpEntry>> rows;
  std::vector<double> rhs;
  std::vector<SdpEntry> objective;

  std::size_t row_count() const { return rows.size(); }

  void validate() const {
    if (rows.size() != rhs.size()) throw DimensionMismatch("row and right-hand-side counts differ");
    auto check = [&](const SdpEntry& e) {
      if (e.block == kLpBlock) {
        if (e.row < 0 || e.row >= lp_dim || e.col != e.row) throw DimensionMismatch("LP entry out of range");
        return;
      }
      if (e.block < 0 || e.block >= static_cast<int>(block_dims.size())) {
        throw DimensionMismatch("entry references a missing block");
      }
      const int d = block_dims[e.block];
      if (e.row < 0 || e.col < e.row || e.col >= d) throw DimensionMismatch("entry outside its block");
    };
    for (int d : block_dims) {
      if (d < 1) throw DimensionMismatch("block dimension must be >= 1");
    }
    for (const auto& r : rows) {
      for (const auto& e : r) check(e);
    }
    for (const auto& e : objective) check(e);
  }
};

enum class SdpStatus { kFeasible, kOptimal, kInfeasible, kUnbounded, kNumericalFailure, kCancelled };

inline std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kFeasible:
      return "Feasible";
    case SdpStatus::kOptimal:
      return "Optimal";
    case SdpStatus::kInfeasible:
      return "Infeasible";
    case SdpStatus::kUnbounded:
      return "Unbounded";
    case SdpStatus::kNumericalFailure:
      return "NumericalFailure";
    case SdpStatus::kCancelled:
      return "Cancelled";
  }
  return "?";
}

struct SdpDiagnostics {
  int iterations = 0;
  double primal_residual = 0;  // ||A(X) - b|| / (1 + ||b||)
  double dual_residual = 0;    // ||C - A^T y - Z|| / (1 + ||C||)
  double gap = 0;              // |<C,X> - b^T y| / (1 + |<C,X>| + |b^T y|)
  double wall_seconds = 0;
  bool rescaled = false;
  int face_removed = 0;  // Gram rows/columns and LP coordinates fixed to zero
  std::string message;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::kNumericalFailure;
  std::vector<Eigen::MatrixXd> blocks;
  Eigen::VectorXd lp;
  Eigen::VectorXd y;
  double primal_objective = 0;
  double dual_objective = 0;
  SdpDiagnostics diagnostics;

  bool ok() const { return status == SdpStatus::kFeasible || status == SdpStatus::kOptimal; }
};

struct SdpOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  double infeasibility_tol = 1e-8;
  int max_iter = 200;
  double step_fraction = 0.98;
  // When the iteration stalls or breaks down, the best iterate seen is
  // returned if its residuals are within these looser tolerances.
  double near_feas_tol = 1e-6;
  double near_gap_tol = 1e-6;
  int stall_iters = 10;  // not applied while kappa dominates tau
  bool rescale_retry = true;
  bool facial_reduction = true;
  // Alternating-projection rounds applied to an accepted X whose affine
  // projection is not PSD (see detail::polish); 0 disables.
  int polish_iters = 300;
  std::stop_token cancel;
  std::ostream* log = nullptr;  // per-iteration trace when set
};

// ---------------------------------------------------------------------------
// PSD validation
// ---------------------------------------------------------------------------

struct PsdCheck {
  bool ok = false;
  double min_eigenvalue = 0;
};

/// Smallest eigenvalue by symmetric eigendecomposition, independent of the
/// interior-point iterates.
inline PsdCheck check_gram_psd(const Eigen::MatrixXd& m, double tol = 1e-6) {
  if (m.rows() != m.cols()) throw NotSymmetric("matrix is not square");
  if (m.size() == 0) return {true, 0.0};
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) throw NotSymmetric("asymmetry " + std::to_string(asym) + " exceeds 1e-10");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  return {lo >= -tol, lo};
}

namespace detail {

/// Block-diagonal symmetric matrix: dense blocks plus a diagonal LP part.
struct BlockMat {
  std::vector<Eigen::MatrixXd> s;
  Eigen::VectorXd lp;

  static BlockMat zeros(const SdpProblem& p) {
    BlockMat m;
    for (int d : p.block_dims) m.s.push_back(Eigen::MatrixXd::Zero(d, d));
    m.lp = Eigen::VectorXd::Zero(p.lp_dim);
    return m;
  }
  static BlockMat identity(const SdpProblem& p) {
    BlockMat m;
    for (int d : p.block_dims) m.s.push_back(Eigen::MatrixXd::Identity(d, d));
    m.lp = Eigen::VectorXd::Ones(p.lp_dim);
    return m;
  }

  BlockMat& axpy(double a, const BlockMat& o) {
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += a * o.s[k];
    lp += a * o.lp;
    return *this;
  }
  BlockMat& scale(double a) {
    for (auto& b : s) b *= a;
    lp *= a;
    return *this;
  }
  double dot(const BlockMat& o) const {
    double acc = lp.dot(o.lp);
    for (std::size_t k = 0; k < s.size(); ++k) acc += s[k].cwiseProduct(o.s[k]).sum();
    return acc;
  }
  double norm() const { return std::sqrt(dot(*this)); }
};

/// Row data regrouped by block for the Schur complement.
struct Triplet {
  int row;
  int col;
  double value;
};

struct RowBlock {
  int row_index;
  std::vector<Triplet> entries;
};

class Operator {
 public:
  explicit Operator(const SdpProblem& p) : p_(p) {
    per_block_.resize(p.block_dims.size());
    lp_cols_.resize(p.lp_dim);
    for (int i = 0; i < static_cast<int>(p.rows.size()); ++i) {
      std::vector<std::vector<Triplet>> tmp(p.block_dims.size());
      for (const auto& e : p.rows[i]) {
        if (e.block == kLpBlock) {
          lp_cols_[e.row].push_back({i, 0, e.value});
        } else {
          tmp[e.block].push_back({e.row, e.col, e.value});
        }
      }
      for (std::size_t k = 0; k < tmp.size(); ++k) {
        if (!tmp[k].empty()) per_block_[k].push_back({i, std::move(tmp[k])});
      }
    }
  }

  const SdpProblem& problem() const { return p_; }
  int m() const { return static_cast<int>(p_.rows.size()); }

  BlockMat from_entries(const std::vector<SdpEntry>& entries) const {
    BlockMat out = BlockMat::zeros(p_);
    for (const auto& e : entries) add_entry(out, e, 1.0);
    return out;
  }

  /// A(X).
  Eigen::VectorXd apply(const BlockMat& x) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(m());
    for (std::size_t k = 0; k < per_block_.size(); ++k) {
      const auto& xk = x.s[k];
      for (const auto& rb : per_block_[k]) {
        double acc = 0;
        for (const auto& t : rb.entries) acc += t.row == t.col ? t.value * xk(t.row, t.row) : 2 * t.value * xk(t.row, t.col);
        r[rb.row_index] += acc;
      }
    }
    for (int l = 0; l < p_.lp_dim; ++l) {
      for (const auto& t : lp_cols_[l]) r[t.row] += t.value * x.lp[l];
    }
    return r;
  }

  /// A^T y.
  BlockMat adjoint(const Eigen::VectorXd& y) const {
    BlockMat out = BlockMat::zeros(p_);
    for (std::size_t k = 0; k < per_block_.size(); ++k) {
      auto& ok = out.s[k];
      for (const auto& rb : per_block_[k]) {
        const double yi = y[rb.row_index];
        if (yi == 0) continue;
        for (const auto& t : rb.entries) {
          ok(t.row, t.col) += yi * t.value;
          if (t.row != t.col) ok(t.col, t.row) += yi * t.value;
        }
      }
    }
    for (int l = 0; l < p_.lp_dim; ++l) {
      for (const auto& t : lp_cols_[l]) out.lp[l] += y[t.row] * t.value;
    }
    return out;
  }

  /// Schur matrix M_ij = <A_i, W A_j W> (+ LP part sum a_il a_jl w_l).
  /// Returns false when cancelled.
  bool schur(const std::vector<Eigen::MatrixXd>& w, const Eigen::VectorXd& w_lp, Eigen::MatrixXd& out,
             const std::stop_token& cancel) const {
    out.setZero(m(), m());
    for (std::size_t k = 0; k < per_block_.size(); ++k) {
      if (cancel.stop_requested()) return false;
      const auto& rows = per_block_[k];
      const Eigen::MatrixXd& wk = w[k];
      const int d = static_cast<int>(wk.rows());
      Eigen::MatrixXd g(d, d);
      for (std::size_t a = 0; a < rows.size(); ++a) {
        // g = W A_a W, accumulated from the sparse entries of A_a.
        g.setZero();
        for (const auto& t : rows[a].entries) {
          if (t.row == t.col) {
            g.noalias() += t.value * wk.col(t.row) * wk.row(t.row);
          } else {
            g.noalias() += t.value * (wk.col(t.row) * wk.row(t.col) + wk.col(t.col) * wk.row(t.row));
          }
        }
        const int i = rows[a].row_index;
        for (std::size_t b = a; b < rows.size(); ++b) {
          double acc = 0;
          for (const auto& t : rows[b].entries) acc += t.row == t.col ? t.value * g(t.row, t.row) : 2 * t.value * g(t.row, t.col);
          const int j = rows[b].row_index;
          out(std::min(i, j), std::max(i, j)) += acc;
        }
        if ((a & 63u) == 63u && cancel.stop_requested()) return false;
      }
    }
    for (int l = 0; l < p_.lp_dim; ++l) {
      const auto& col = lp_cols_[l];
      for (std::size_t a = 0; a < col.size(); ++a) {
        for (std::size_t b = a; b < col.size(); ++b) {
          const int i = col[a].row, j = col[b].row;
          double v = col[a].value * col[b].value * w_lp[l];
          if (i == j && a != b) v *= 2;
          out(std::min(i, j), std::max(i, j)) += v;
        }
      }
    }
    out.triangularView<Eigen::StrictlyLower>() = out.transpose().triangularView<Eigen::StrictlyLower>();
    return true;
  }

 private:
  static void add_entry(BlockMat& out, const SdpEntry& e, double scale) {
    if (e.block == kLpBlock) {
      out.lp[e.row] += scale * e.value;
      return;
    }
    auto& b = out.s[e.block];
    b(e.row, e.col) += scale * e.value;
    if (e.row != e.col) b(e.col, e.row) += scale * e.value;
  }

  const SdpProblem& p_;
  std::vector<std::vector<RowBlock>> per_block_;
  std::vector<std::vector<Triplet>> lp_cols_;
};

/// Factorization of the Schur matrix with a fallback to diagonal
/// regularization when it is numerically singular.
class SchurSolver {
 public:
  bool factor(const Eigen::MatrixXd& m) {
    const double scale = std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
    llt_.compute(m);
    if (llt_.info() == Eigen::Success) return true;
    for (double reg = 1e-14; reg <= 1e-6; reg *= 100) {
      Eigen::MatrixXd mr = m;
      mr.diagonal().array() += reg * scale;
      llt_.compute(mr);
      if (llt_.info() == Eigen::Success) return true;
    }
    return false;
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& r) const { return llt_.solve(r); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// W Z W = X per dense block with W = R R^T, R^T Z R = diag(lambda). For the
/// LP part `w_lp` is x / z, the diagonal analogue of the W . W product.
struct NtScaling {
  std::vector<Eigen::MatrixXd> r, rinv, w;
  std::vector<Eigen::VectorXd> lambda;
  Eigen::VectorXd w_lp;
};

inline bool nt_scaling(const BlockMat& x, const BlockMat& z, NtScaling& out) {
  const std::size_t nb = x.s.size();
  out.r.resize(nb);
  out.rinv.resize(nb);
  out.w.resize(nb);
  out.lambda.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    Eigen::LLT<Eigen::MatrixXd> lx(x.s[k]), lz(z.s[k]);
    if (lx.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    Eigen::MatrixXd lxm = lx.matrixL(), lzm = lz.matrixL();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(lzm.transpose() * lxm, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::VectorXd s = svd.singularValues();
    if (s.minCoeff() <= 0 || !std::isfinite(s.maxCoeff())) return false;
    Eigen::VectorXd sih = s.cwiseSqrt().cwiseInverse();
    out.r[k] = lxm * svd.matrixV() * sih.asDiagonal();
    out.rinv[k] = sih.asDiagonal() * svd.matrixU().transpose() * lzm.transpose();
    out.w[k] = out.r[k] * out.r[k].transpose();
    out.lambda[k] = s;
  }
  if ((x.lp.array() <= 0).any() || (z.lp.array() <= 0).any()) return false;
  out.w_lp = x.lp.cwiseQuotient(z.lp);
  return true;
}

inline BlockMat congruence_w(const NtScaling& sc, const BlockMat& a) {
  BlockMat out;
  out.s.resize(a.s.size());
  for (std::size_t k = 0; k < a.s.size(); ++k) out.s[k] = sc.w[k] * a.s[k] * sc.w[k];
  out.lp = sc.w_lp.cwiseProduct(a.lp);
  return out;
}

/// Largest alpha in (0, cap] keeping `lambda + alpha * d` PSD, where `d` is a
/// direction already in the scaled frame.
inline double max_step_scaled(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& d) {
  Eigen::VectorXd lih = lambda.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd t = lih.asDiagonal() * d * lih.asDiagonal();
  t = 0.5 * (t + t.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  return lo >= 0 ? std::numeric_limits<double>::infinity() : -1.0 / lo;
}

inline double max_step_lp(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.size(); ++i) {
    if (dx[i] < 0) a = std::min(a, -x[i] / dx[i]);
  }
  return a;
}

struct Direction {
  BlockMat dx, dz;
  Eigen::VectorXd dy;
  double dtau = 0, dkappa = 0;
};

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
/// Mehrotra predictor-corrector steps.
class HsdSolver {
 public:
  HsdSolver(const SdpProblem& p, const SdpOptions& opt) : p_(p), op_(p), opt_(opt) {}

  SdpSolution run() {
    SdpSolution sol;
    const int m = op_.m();
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(p_.rhs.data(), m);
    const BlockMat c = op_.from_entries(p_.objective);
    const double b_norm = b.norm(), c_norm = c.norm();
    const bool has_objective = c_norm > 0;
    int nu = p_.lp_dim;
    for (int d : p_.block_dims) nu += d;

    BlockMat x = BlockMat::identity(p_), z = BlockMat::identity(p_);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    double tau = 1, kappa = 1;
    NtScaling sc;
    Eigen::MatrixXd schur;
    SchurSolver chol;

    auto emit = [&](SdpStatus st, int iter, const BlockMat& xx, const Eigen::VectorXd& yy, double tt) {
      sol.status = st;
      sol.diagnostics.iterations = iter;
      const double inv = st == SdpStatus::kInfeasible || st == SdpStatus::kUnbounded ? 1.0 : 1.0 / tt;
      sol.blocks = xx.s;
      for (auto& blk : sol.blocks) blk *= inv;
      sol.lp = xx.lp * inv;
      sol.y = yy * inv;
      BlockMat xs = xx;
      xs.scale(inv);
      sol.primal_objective = c.dot(xs);
      sol.dual_objective = b.dot(sol.y);
      return sol;
    };

    // Best iterate by the largest residual relative to its near tolerance.
    struct Best {
      double merit = std::numeric_limits<double>::infinity();
      double pres = 0, dres = 0, gap = 0;
      int iter = -1;
      BlockMat x;
      Eigen::VectorXd y;
      double tau = 1;
    } best;

    auto finish = [&](SdpStatus st, int iter) {
      if (st == SdpStatus::kNumericalFailure && best.iter >= 0 && best.pres <= opt_.near_feas_tol &&
          (!has_objective || (best.dres <= opt_.near_feas_tol && best.gap <= opt_.near_gap_tol))) {
        sol.diagnostics.message = "reduced accuracy (" + sol.diagnostics.message + "); returning iterate " +
                                  std::to_string(best.iter);
        sol.diagnostics.primal_residual = best.pres;
        sol.diagnostics.dual_residual = best.dres;
        sol.diagnostics.gap = best.gap;
        emit(has_objective ? SdpStatus::kOptimal : SdpStatus::kFeasible, iter, best.x, best.y, best.tau);
        return sol;
      }
      return emit(st, iter, x, y, tau);
    };

    for (int iter = 0;; ++iter) {
      if (opt_.cancel.stop_requested()) return finish(SdpStatus::kCancelled, iter);

      const Eigen::VectorXd ax = op_.apply(x);
      const BlockMat aty = op_.adjoint(y);
      const Eigen::VectorXd rp = b * tau - ax;
      BlockMat rd = c;
      rd.scale(tau).axpy(-1, aty).axpy(-1, z);
      const double cx = c.dot(x), by = b.dot(y);
      const double rg = cx - by + kappa;
      const double mu = (x.dot(z) + tau * kappa) / (nu + 1);

      const double pres = rp.norm() / tau / (1 + b_norm);
      const double dres = rd.norm() / tau / (1 + c_norm);
      const double gap = std::abs(cx - by) / tau / (1 + std::abs(cx / tau) + std::abs(by / tau));
      sol.diagnostics.primal_residual = pres;
      sol.diagnostics.dual_residual = dres;
      sol.diagnostics.gap = gap;
      if (opt_.log) {
        *opt_.log << "iter " << iter << " pres " << pres << " dres " << dres << " gap " << gap << " mu " << mu << " tau "
                  << tau << " kappa " << kappa << " cx " << cx / tau << " by " << by / tau << "\n";
      }

      const double merit = has_objective ? std::max({pres / opt_.near_feas_tol, dres / opt_.near_feas_tol,
                                                     gap / opt_.near_gap_tol})
                                         : pres;
      if (merit < best.merit) {
        best.merit = merit;
        best.pres = pres;
        best.dres = dres;
        best.gap = gap;
        best.iter = iter;
        best.x = x;
        best.y = y;
        best.tau = tau;
      } else if (iter - best.iter >= opt_.stall_iters && tau > kappa) {
        sol.diagnostics.message = "no progress for " + std::to_string(opt_.stall_iters) + " iterations";
        return finish(SdpStatus::kNumericalFailure, iter);
      }

      if (!has_objective) {
        if (pres <= opt_.feas_tol) return finish(SdpStatus::kFeasible, iter);
      } else if (pres <= opt_.feas_tol && dres <= opt_.feas_tol && gap <= opt_.gap_tol) {
        return finish(SdpStatus::kOptimal, iter);
      }
      // Infeasibility certificates from the embedding.
      if (by > 0) {
        BlockMat farkas = aty;
        farkas.axpy(1, z);
        if (tau < kappa && farkas.norm() / by <= opt_.infeasibility_tol) {
          sol.diagnostics.message = "dual ray certifies primal infeasibility";
          return finish(SdpStatus::kInfeasible, iter);
        }
      }
      if (cx < 0 && tau < kappa && ax.norm() / -cx <= opt_.infeasibility_tol) {
        sol.diagnostics.message = "primal ray certifies dual infeasibility";
        return finish(SdpStatus::kUnbounded, iter);
      }
      if (iter >= opt_.max_iter) {
        sol.diagnostics.message = "iteration limit reached";
        return finish(SdpStatus::kNumericalFailure, iter);
      }
      if (!std::isfinite(mu) || mu <= 0) {
        sol.diagnostics.message = "complementarity lost finiteness";
        return finish(SdpStatus::kNumericalFailure, iter);
      }

      if (!nt_scaling(x, z, sc)) {
        sol.diagnostics.message = "iterate left the cone interior";
        return finish(SdpStatus::kNumericalFailure, iter);
      }
      if (!op_.schur(sc.w, sc.w_lp, schur, opt_.cancel)) return finish(SdpStatus::kCancelled, iter);
      if (!chol.factor(schur)) {
        sol.diagnostics.message = "Schur complement factorization failed";
        return finish(SdpStatus::kNumericalFailure, iter);
      }

      // Components shared by predictor and corrector.
      const BlockMat wcw = congruence_w(sc, c);
      const BlockMat wrdw = congruence_w(sc, rd);
      const Eigen::VectorXd a_wrdw = op_.apply(wrdw);
      const Eigen::VectorXd dy2 = chol.solve(op_.apply(wcw) + b);
      BlockMat dx2 = congruence_w(sc, op_.adjoint(dy2));
      dx2.axpy(-1, wcw);
      const double denom = b.dot(dy2) - c.dot(dx2) + kappa / tau;

      auto direction = [&](const BlockMat& rc_mat, double eta, double r_tk) {
        Direction d;
        const Eigen::VectorXd dy1 = chol.solve(eta * rp - op_.apply(rc_mat) + eta * a_wrdw);
        BlockMat dx1 = rc_mat;
        dx1.axpy(-eta, wrdw).axpy(1, congruence_w(sc, op_.adjoint(dy1)));
        d.dtau = (eta * rg - b.dot(dy1) + c.dot(dx1) + r_tk / tau) / denom;
        d.dy = dy1 + d.dtau * dy2;
        d.dx = dx1;
        d.dx.axpy(d.dtau, dx2);
        d.dz = rd;
        d.dz.scale(eta).axpy(-1, op_.adjoint(d.dy)).axpy(d.dtau, c);
        d.dkappa = (r_tk - kappa * d.dtau) / tau;
        return d;
      };

      auto step_length = [&](const Direction& d, std::vector<Eigen::MatrixXd>* dxs, std::vector<Eigen::MatrixXd>* dzs) {
        double a = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < x.s.size(); ++k) {
          Eigen::MatrixXd dxt = sc.rinv[k] * d.dx.s[k] * sc.rinv[k].transpose();
          Eigen::MatrixXd dzt = sc.r[k].transpose() * d.dz.s[k] * sc.r[k];
          a = std::min(a, max_step_scaled(sc.lambda[k], dxt));
          a = std::min(a, max_step_scaled(sc.lambda[k], dzt));
          if (dxs) (*dxs)[k] = std::move(dxt);
          if (dzs) (*dzs)[k] = std::move(dzt);
        }
        a = std::min(a, max_step_lp(x.lp, d.dx.lp));
        a = std::min(a, max_step_lp(z.lp, d.dz.lp));
        if (d.dtau < 0) a = std::min(a, -tau / d.dtau);
        if (d.dkappa < 0) a = std::min(a, -kappa / d.dkappa);
        return a;
      };

      // Predictor.
      BlockMat rc_aff = x;
      rc_aff.scale(-1);
      const Direction aff = direction(rc_aff, 1.0, -tau * kappa);
      std::vector<Eigen::MatrixXd> dxt(x.s.size()), dzt(x.s.size());
      const double a_aff = std::min(1.0, step_length(aff, &dxt, &dzt));
      const double sigma = std::clamp(std::pow(1 - a_aff, 3), 0.0, 1.0);

      // Corrector with second-order term.
      const double smu = sigma * mu;
      BlockMat rc = BlockMat::zeros(p_);
      for (std::size_t k = 0; k < x.s.size(); ++k) {
        const Eigen::VectorXd& lam = sc.lambda[k];
        const Eigen::MatrixXd prod = dxt[k] * dzt[k];
        Eigen::MatrixXd rck = -0.5 * (prod + prod.transpose());
        rck.diagonal().array() += smu;
        rck.diagonal() -= lam.cwiseProduct(lam);
        for (int i = 0; i < rck.rows(); ++i) {
          for (int j = 0; j < rck.cols(); ++j) rck(i, j) *= 2.0 / (lam[i] + lam[j]);
        }
        rc.s[k] = sc.r[k] * rck * sc.r[k].transpose();
      }
      for (int l = 0; l < p_.lp_dim; ++l) {
        rc.lp[l] = (smu - x.lp[l] * z.lp[l] - aff.dx.lp[l] * aff.dz.lp[l]) / z.lp[l];
      }
      const double r_tk = smu - tau * kappa - aff.dtau * aff.dkappa;
      const Direction dir = direction(rc, 1 - sigma, r_tk);
      double alpha = step_length(dir, nullptr, nullptr);
      alpha = std::min(1.0, opt_.step_fraction * alpha);
      if (!std::isfinite(alpha) || alpha <= 1e-12) {
        sol.diagnostics.message = "step length collapsed";
        return finish(SdpStatus::kNumericalFailure, iter);
      }

      x.axpy(alpha, dir.dx);
      z.axpy(alpha, dir.dz);
      y += alpha * dir.dy;
      tau += alpha * dir.dtau;
      kappa += alpha * dir.dkappa;
      for (auto& blk : x.s) blk = 0.5 * (blk + blk.transpose()).eval();
      for (auto& blk : z.s) blk = 0.5 * (blk + blk.transpose()).eval();

      // Keep the embedding well scaled; the iterates are homogeneous.
      const double scale = std::max(tau, kappa);
      if (scale > 1e8 || scale < 1e-8) {
        x.scale(1 / scale);
        z.scale(1 / scale);
        y /= scale;
        tau /= scale;
        kappa /= scale;
      }
    }
  }

 private:
  const SdpProblem& p_;
  Operator op_;
  SdpOptions opt_;
};

/// Row-equilibrated copy: every row divided by its largest magnitude.
inline SdpProblem jacobi_scaled(const SdpProblem& p, std::vector<double>& factors) {
  SdpProblem q = p;
  factors.assign(p.rows.size(), 1.0);
  for (std::size_t i = 0; i < q.rows.size(); ++i) {
    double mx = 0;
    for (const auto& e : q.rows[i]) mx = std::max(mx, std::abs(e.value));
    if (mx == 0) continue;
    factors[i] = mx;
    for (auto& e : q.rows[i]) e.value /= mx;
    q.rhs[i] /= mx;
  }
  return q;
}

/// Smallest eigenvalue over all blocks and LP coordinates.
inline double min_eigenvalue(const BlockMat& x) {
  double lo = x.lp.size() ? x.lp.minCoeff() : std::numeric_limits<double>::infinity();
  for (const auto& b : x.s) {
    if (b.size()) lo = std::min(lo, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b, Eigen::EigenvaluesOnly).eigenvalues()[0]);
  }
  return lo;
}

/// Alternating projections between {A(X) = b} and the cone, started from
/// the solver's X. Returns the affinely projected iterate with the largest
/// min eigenvalue, unless the plain affine projection of the start is at
/// least as good, in which case `x` is left unchanged. Useful when the
/// feasible set has no interior and the solver stalls short of accuracy.
inline void polish(const SdpProblem& p, BlockMat& x, int iterations, const std::stop_token& cancel) {
  if (iterations <= 0 || p.rows.empty()) return;
  const Operator op(p);
  Eigen::MatrixXd gram;
  std::vector<Eigen::MatrixXd> eye;
  for (int d : p.block_dims) eye.push_back(Eigen::MatrixXd::Identity(d, d));
  if (!op.schur(eye, Eigen::VectorXd::Ones(p.lp_dim), gram, cancel)) return;
  SchurSolver solver;
  if (!solver.factor(gram)) return;
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(p.rhs.data(), static_cast<int>(p.rhs.size()));
  auto project_affine = [&](BlockMat& z) {
    for (int pass = 0; pass < 3; ++pass) z.axpy(-1.0, op.adjoint(solver.solve(op.apply(z) - b)));
  };
  auto project_cone = [](BlockMat& z) {
    for (auto& blk : z.s) {
      if (!blk.size()) continue;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk);
      blk = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
    }
    z.lp = z.lp.cwiseMax(0.0);
  };

  BlockMat z = x;
  project_affine(z);
  const double start = min_eigenvalue(z);
  double best = start;
  BlockMat best_x = z;
  for (int it = 0; it < iterations && best < 0; ++it) {
    if (cancel.stop_requested()) return;
    project_cone(z);
    project_affine(z);
    const double e = min_eigenvalue(z);
    if (e > best) {
      best = e;
      best_x = z;
    }
  }
  if (best > start) x = std::move(best_x);
}

/// Coordinates that may be nonzero in a feasible X.
struct Face {
  std::vector<std::vector<int>> keep;  // per block, surviving indices
  std::vector<int> keep_lp;
  int removed = 0;
};

/// Partial facial reduction. A row with zero right-hand side whose surviving
/// entries all sit on diagonals and share one sign forces those diagonal
/// entries, and hence their rows and columns, to zero. Repeated to a fixed
/// point; signs and zeros are exact for data converted from rationals.
inline Face reduce_face(const SdpProblem& p) {
  std::vector<std::vector<char>> dead(p.block_dims.size());
  for (std::size_t k = 0; k < dead.size(); ++k) dead[k].assign(p.block_dims[k], 0);
  std::vector<char> dead_lp(p.lp_dim, 0);
  auto is_dead = [&](int blk, int i) { return blk == kLpBlock ? dead_lp[i] != 0 : dead[blk][i] != 0; };

  int removed = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t r = 0; r < p.rows.size(); ++r) {
      if (p.rhs[r] != 0) continue;
      std::map<std::tuple<int, int, int>, double> live;
      for (const auto& e : p.rows[r]) {
        if (is_dead(e.block, e.row) || is_dead(e.block, e.col)) continue;
        live[{e.block, e.row, e.col}] += e.value;
      }
      int sign = 0;
      bool diagonal = true;
      for (const auto& [key, v] : live) {
        if (v == 0) continue;
        const int sg = v > 0 ? 1 : -1;
        if (std::get<1>(key) != std::get<2>(key) || (sign != 0 && sg != sign)) {
          diagonal = false;
          break;
        }
        sign = sg;
      }
      if (!diagonal || sign == 0) continue;
      for (const auto& [key, v] : live) {
        if (v == 0) continue;
        const auto [blk, i, j] = key;
        (blk == kLpBlock ? dead_lp[i] : dead[blk][i]) = 1;
        ++removed;
      }
      changed = true;
    }
  }

  Face f;
  f.removed = removed;
  f.keep.resize(p.block_dims.size());
  for (std::size_t k = 0; k < dead.size(); ++k) {
    for (int i = 0; i < p.block_dims[k]; ++i) {
      if (!dead[k][i]) f.keep[k].push_back(i);
    }
  }
  for (int i = 0; i < p.lp_dim; ++i) {
    if (!dead_lp[i]) f.keep_lp.push_back(i);
  }
  return f;
}

/// The problem restricted to a face. Blocks left empty are dropped.
inline SdpProblem restrict_to_face(const SdpProblem& p, const Face& f, std::vector<int>& block_map) {
  SdpProblem q;
  block_map.assign(p.block_dims.size(), -1);
  std::vector<std::vector<int>> pos(p.block_dims.size());
  for (std::size_t k = 0; k < p.block_dims.size(); ++k) {
    pos[k].assign(p.block_dims[k], -1);
    for (std::size_t t = 0; t < f.keep[k].size(); ++t) pos[k][f.keep[k][t]] = static_cast<int>(t);
    if (!f.keep[k].empty()) {
      block_map[k] = static_cast<int>(q.block_dims.size());
      q.block_dims.push_back(static_cast<int>(f.keep[k].size()));
    }
  }
  std::vector<int> pos_lp(p.lp_dim, -1);
  for (std::size_t t = 0; t < f.keep_lp.size(); ++t) pos_lp[f.keep_lp[t]] = static_cast<int>(t);
  q.lp_dim = static_cast<int>(f.keep_lp.size());

  auto map_entries = [&](const std::vector<SdpEntry>& in) {
    std::vector<SdpEntry> out;
    for (const auto& e : in) {
      if (e.block == kLpBlock) {
        if (pos_lp[e.row] >= 0) out.push_back({kLpBlock, pos_lp[e.row], pos_lp[e.row], e.value});
        continue;
      }
      const int i = pos[e.block][e.row], j = pos[e.block][e.col];
      if (i >= 0 && j >= 0) out.push_back({block_map[e.block], std::min(i, j), std::max(i, j), e.value});
    }
    return out;
  };
  for (const auto& r : p.rows) q.rows.push_back(map_entries(r));
  q.rhs = p.rhs;
  q.objective = map_entries(p.objective);
  return q;
}

/// Embeds a solution of the restricted problem back into the full space.
inline void lift_from_face(SdpSolution& s, const SdpProblem& p, const Face& f, const std::vector<int>& block_map) {
  std::vector<Eigen::MatrixXd> blocks;
  for (std::size_t k = 0; k < p.block_dims.size(); ++k) {
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(p.block_dims[k], p.block_dims[k]);
    const int nb = block_map[k];
    if (nb >= 0 && nb < static_cast<int>(s.blocks.size())) {
      const auto& keep = f.keep[k];
      for (std::size_t a = 0; a < keep.size(); ++a) {
        for (std::size_t b = 0; b < keep.size(); ++b) full(keep[a], keep[b]) = s.blocks[nb](a, b);
      }
    }
    blocks.push_back(std::move(full));
  }
  s.blocks = std::move(blocks);
  Eigen::VectorXd lp = Eigen::VectorXd::Zero(p.lp_dim);
  for (std::size_t t = 0; t < f.keep_lp.size() && static_cast<int>(t) < s.lp.size(); ++t) lp[f.keep_lp[t]] = s.lp[t];
  s.lp = std::move(lp);
}

/// Solves without facial reduction. Rows without entries are dropped when
/// their right-hand side is zero and make the problem infeasible otherwise.
inline SdpSolution solve_on_face(const SdpProblem& problem, const SdpOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  SdpProblem p;
  p.block_dims = problem.block_dims;
  p.lp_dim = problem.lp_dim;
  p.objective = problem.objective;
  std::vector<int> kept;
  bool trivially_infeasible = false;
  for (std::size_t i = 0; i < problem.rows.size(); ++i) {
    bool empty = true;
    for (const auto& e : problem.rows[i]) empty = empty && e.value == 0;
    if (empty) {
      if (std::abs(problem.rhs[i]) > opt.feas_tol) trivially_infeasible = true;
      continue;
    }
    kept.push_back(static_cast<int>(i));
    p.rows.push_back(problem.rows[i]);
    p.rhs.push_back(problem.rhs[i]);
  }

  auto expand_y = [&](SdpSolution& s, const std::vector<double>& factors) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<int>(problem.rows.size()));
    for (std::size_t r = 0; r < kept.size(); ++r) {
      if (r < static_cast<std::size_t>(s.y.size())) y[kept[r]] = s.y[r] / (factors.empty() ? 1.0 : factors[r]);
    }
    s.y = y;
  };

  SdpSolution sol;
  if (trivially_infeasible) {
    sol.status = SdpStatus::kInfeasible;
    sol.diagnostics.message = "an equality row has no variables and a nonzero right-hand side";
    sol.blocks.clear();
    for (int d : p.block_dims) sol.blocks.push_back(Eigen::MatrixXd::Zero(d, d));
    sol.lp = Eigen::VectorXd::Zero(p.lp_dim);
    sol.y = Eigen::VectorXd::Zero(static_cast<int>(problem.rows.size()));
  } else if (p.block_dims.empty() && p.lp_dim == 0) {
    sol.status = SdpStatus::kFeasible;
    sol.y = Eigen::VectorXd::Zero(static_cast<int>(problem.rows.size()));
    sol.lp = Eigen::VectorXd::Zero(0);
  } else {
    sol = detail::HsdSolver(p, opt).run();
    std::vector<double> factors;
    if (sol.status == SdpStatus::kNumericalFailure && opt.rescale_retry) {
      SdpProblem q = detail::jacobi_scaled(p, factors);
      SdpSolution retry = detail::HsdSolver(q, opt).run();
      retry.diagnostics.rescaled = true;
      if (retry.status != SdpStatus::kNumericalFailure) {
        sol = std::move(retry);
      } else {
        retry.diagnostics.message = sol.diagnostics.message + "; after rescaling: " + retry.diagnostics.message;
        sol = std::move(retry);
      }
      if (!sol.diagnostics.rescaled) factors.clear();
    }
    expand_y(sol, factors);
    if (sol.ok() && opt.polish_iters > 0) {
      BlockMat x{sol.blocks, sol.lp};
      detail::polish(p, x, opt.polish_iters, opt.cancel);
      sol.blocks = std::move(x.s);
      sol.lp = std::move(x.lp);
    }
  }
  sol.diagnostics.wall_seconds = elapsed();
  return sol;
}

}  // namespace detail

/// Solves the SDP, first fixing to zero any coordinates that the equality
/// rows force to vanish (see detail::reduce_face).
inline SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& opt = {}) {
  problem.validate();
  if (!opt.facial_reduction) return detail::solve_on_face(problem, opt);
  const detail::Face face = detail::reduce_face(problem);
  if (face.removed == 0) return detail::solve_on_face(problem, opt);
  std::vector<int> block_map;
  SdpSolution s = detail::solve_on_face(detail::restrict_to_face(problem, face, block_map), opt);
  detail::lift_from_face(s, problem, face, block_map);
  s.diagnostics.face_removed = face.removed;
  return s;
}

/// Primal equality residual max_i |<A_i, X> - b_i| of a candidate solution.
inline double primal_residual_inf(const SdpProblem& p, const SdpSolution& s) {
  detail::BlockMat x;
  x.s = s.blocks;
  x.lp = s.lp;
  detail::Operator op(p);
  Eigen::VectorXd r = op.apply(x) - Eigen::Map<const Eigen::VectorXd>(p.rhs.data(), static_cast<int>(p.rhs.size()));
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

// ---------------------------------------------------------------------------
// Exchange with external solvers
// ---------------------------------------------------------------------------

/// Writes the problem in SDPA sparse format. The LP part becomes a trailing
/// diagonal block. In SDPA's notation F0 = -C, F_i = A_i, c_i = b_i, so the
/// SDPA dual variable Y is our X.
inline void export_sdpa(const SdpProblem& p, std::ostream& out) {
  p.validate();
  const int nb = static_cast<int>(p.block_dims.size()) + (p.lp_dim > 0 ? 1 : 0);
  out << "* sparse SDPA export: minimize <C,X> s.t. <A_i,X> = b_i, X psd\n";
  out << p.rows.size() << "\n" << nb << "\n";
  for (int d : p.block_dims) out << d << " ";
  if (p.lp_dim > 0) out << -p.lp_dim;
  out << "\n";
  out.precision(17);
  for (double v : p.rhs) out << v << " ";
  out << "\n";
  auto emit = [&](int mat, const SdpEntry& e, double scale) {
    const int blk = e.block == kLpBlock ? static_cast<int>(p.block_dims.size()) + 1 : e.block + 1;
    out << mat << " " << blk << " " << e.row + 1 << " " << e.col + 1 << " " << scale * e.value << "\n";
  };
  for (const auto& e : p.objective) emit(0, e, -1.0);
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    for (const auto& e : p.rows[i]) emit(static_cast<int>(i + 1), e, 1.0);
  }
}

/// Reads an externally computed X as whitespace-separated "block i j value"
/// lines (1-based, upper or lower triangle; the LP block is the trailing
/// diagonal block). Lines starting with '*' or '#' are ignored. The status is
/// Feasible when the primal residual is within `feas_tol`, Infeasible
/// otherwise; PSD-ness is left to check_gram_psd.
inline SdpSolution import_solution(const SdpProblem& p, std::istream& in, double feas_tol = 1e-6) {
  SdpSolution s;
  for (int d : p.block_dims) s.blocks.push_back(Eigen::MatrixXd::Zero(d, d));
  s.lp = Eigen::VectorXd::Zero(p.lp_dim);
  s.y = Eigen::VectorXd::Zero(static_cast<int>(p.rows.size()));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '*' || line[0] == '#') continue;
    std::istringstream ls(line);
    int blk, i, j;
    double v;
    if (!(ls >> blk >> i >> j >> v)) throw SyntaxError("solution line " + std::to_string(lineno) + " is malformed");
    --blk;
    --i;
    --j;
    if (blk == static_cast<int>(p.block_dims.size()) && p.lp_dim > 0) {
      if (i != j || i < 0 || i >= p.lp_dim) throw DimensionMismatch("LP entry out of range on line " + std::to_string(lineno));
      s.lp[i] = v;
      continue;
    }
    if (blk < 0 || blk >= static_cast<int>(p.block_dims.size())) {
      throw DimensionMismatch("block out of range on line " + std::to_string(lineno));
    }
    const int d = p.block_dims[blk];
    if (i < 0 || j < 0 || i >= d || j >= d) throw DimensionMismatch("index out of range on line " + std::to_string(lineno));
    s.blocks[blk](i, j) = v;
    s.blocks[blk](j, i) = v;
  }
  const double res = primal_residual_inf(p, s);
  s.diagnostics.primal_residual = res;
  s.status = res <= feas_tol ? SdpStatus::kFeasible : SdpStatus::kInfeasible;
  s.diagnostics.message = "imported";
  return s;
}

}  // namespace bcert
