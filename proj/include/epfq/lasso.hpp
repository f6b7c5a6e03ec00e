#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Cholesky>
#include <Eigen/Jacobi>
#include <nlohmann/json.hpp>

namespace epfq::lasso {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Column means and (population) standard deviations of a design, plus the target's.
template <typename Scalar>
struct Standardizer {
	Vector<Scalar> mean;
	Vector<Scalar> scale;
	/// Original column indices entering the penalized fit, and those with zero variance.
	std::vector<Eigen::Index> retained;
	std::vector<Eigen::Index> dropped;
	Scalar y_mean = 0;
	Scalar y_scale = 1;
	bool y_degenerate = false;

	/// Standardized values of the retained columns of one original-unit row.
	template <typename Derived>
	Vector<Scalar> transform(const Eigen::MatrixBase<Derived> &row) const {
		Vector<Scalar> out(static_cast<Eigen::Index>(retained.size()));
		for (std::size_t k = 0; k < retained.size(); ++k) {
			const auto j = retained[k];
			out(static_cast<Eigen::Index>(k)) = (row(j) - mean(j)) / scale(j);
		}
		return out;
	}
};

template <typename Scalar>
struct Standardized {
	Matrix<Scalar> X; ///< retained columns only, mean 0 and sd 1
	Vector<Scalar> y; ///< centered, divided by its sd
	Standardizer<Scalar> standardizer;
};

/// Columns whose sd is below 1e-10 (relative to their level) are dropped and recorded.
template <typename DerivedX, typename DerivedY>
Standardized<typename DerivedX::Scalar> standardize(const Eigen::MatrixBase<DerivedX> &X,
                                                   const Eigen::MatrixBase<DerivedY> &y) {
	using Scalar = typename DerivedX::Scalar;
	const auto n = X.rows();
	if (n < 2) {
		throw std::invalid_argument("standardize: need at least two rows");
	}
	if (y.size() != n) {
		throw std::invalid_argument("standardize: target length does not match the design");
	}
	Standardized<Scalar> out;
	auto &st = out.standardizer;
	st.mean = X.colwise().mean().transpose();
	st.scale.resize(X.cols());
	for (Eigen::Index j = 0; j < X.cols(); ++j) {
		const Scalar var = (X.col(j).array() - st.mean(j)).square().mean();
		st.scale(j) = std::sqrt(var);
		if (st.scale(j) <= Scalar(1e-10) * (Scalar(1) + std::abs(st.mean(j)))) {
			st.dropped.push_back(j);
			st.scale(j) = Scalar(1);
		} else {
			st.retained.push_back(j);
		}
	}
	out.X.resize(n, static_cast<Eigen::Index>(st.retained.size()));
	for (std::size_t k = 0; k < st.retained.size(); ++k) {
		const auto j = st.retained[k];
		out.X.col(static_cast<Eigen::Index>(k)) = (X.col(j).array() - st.mean(j)) / st.scale(j);
	}
	st.y_mean = y.mean();
	const Scalar y_sd = std::sqrt((y.array() - st.y_mean).square().mean());
	if (y_sd <= Scalar(1e-10) * (Scalar(1) + std::abs(st.y_mean))) {
		st.y_degenerate = true;
		st.y_scale = Scalar(1);
		out.y = Vector<Scalar>::Zero(n);
	} else {
		st.y_scale = y_sd;
		out.y = (y.array() - st.y_mean) / y_sd;
	}
	return out;
}

template <typename Scalar>
struct LambdaGrid {
	Vector<Scalar> values; ///< descending
	bool degenerate = false; ///< no signal: the grid is {0}
};

/// Log-spaced grid from lambda_max = max_j |x_j' y| / n down to lambda_max * min_ratio.
template <typename DerivedX, typename DerivedY>
LambdaGrid<typename DerivedX::Scalar> lambda_grid(const Eigen::MatrixBase<DerivedX> &X,
                                                 const Eigen::MatrixBase<DerivedY> &y, int count = 100,
                                                 typename DerivedX::Scalar min_ratio = 1e-4) {
	using Scalar = typename DerivedX::Scalar;
	if (count < 1) {
		throw std::invalid_argument("lambda grid needs at least one value");
	}
	LambdaGrid<Scalar> grid;
	const Scalar lambda_max =
	    X.cols() == 0 ? Scalar(0) : (X.transpose() * y).cwiseAbs().maxCoeff() / static_cast<Scalar>(X.rows());
	if (!(lambda_max > Scalar(0))) {
		grid.values = Vector<Scalar>::Zero(1);
		grid.degenerate = true;
		return grid;
	}
	grid.values.resize(count);
	for (int k = 0; k < count; ++k) {
		const Scalar frac = count == 1 ? Scalar(0) : static_cast<Scalar>(k) / static_cast<Scalar>(count - 1);
		grid.values(k) = lambda_max * std::pow(min_ratio, frac);
	}
	grid.values(0) = lambda_max;
	return grid;
}

template <typename Scalar>
struct CdOptions {
	Scalar tolerance = Scalar(1e-7);
	long max_sweeps = 100000;
};

struct CdReport {
	long sweeps = 0;
	bool converged = false;
};

inline double soft_threshold(double z, double t) {
	return z > t ? z - t : (z < -t ? z + t : 0.0);
}

/// Cyclic coordinate descent for  1/2 b'Qb - c'b + lambda |b|_1  with Q = X'X/n, c = X'y/n,
/// i.e. the (1/2n)|y - Xb|^2 + lambda |b|_1 objective in covariance form. Keeps the
/// gradient c - Qb up to date, so a coordinate update costs O(p) and warm starts along a
/// descending lambda path are free. Convergence: max coefficient change below tolerance
/// in a full sweep.
template <typename Scalar>
class GramLasso {
public:
	GramLasso(const Matrix<Scalar> &Q, const Vector<Scalar> &c) : Q_(Q), c_(c) {
		if (Q.rows() != Q.cols() || Q.rows() != c.size()) {
			throw std::invalid_argument("GramLasso: dimension mismatch");
		}
		if (!Q.allFinite() || !c.allFinite()) {
			throw std::invalid_argument("GramLasso: non-finite inputs");
		}
		reset();
	}

	void reset() {
		beta_ = Vector<Scalar>::Zero(c_.size());
		grad_ = c_;
		active_.clear();
	}

	/// Replaces the current iterate (warm start).
	/// Replaces the current iterate and its gradient c - Q beta.
	template <typename DerivedB, typename DerivedG>
	void set_state(const Eigen::MatrixBase<DerivedB> &beta, const Eigen::MatrixBase<DerivedG> &gradient) {
		beta_ = beta;
		grad_ = gradient;
		active_.clear();
		for (Eigen::Index j = 0; j < beta_.size(); ++j) {
			if (beta_(j) != Scalar(0)) {
				active_.push_back(j);
			}
		}
	}

	template <typename Derived>
	void set_beta(const Eigen::MatrixBase<Derived> &beta) {
		beta_ = beta;
		grad_ = c_;
		active_.clear();
		for (Eigen::Index j = 0; j < beta_.size(); ++j) {
			if (beta_(j) != Scalar(0)) {
				grad_.noalias() -= beta_(j) * Q_.col(j);
				active_.push_back(j);
			}
		}
	}

	CdReport solve(Scalar lambda, const CdOptions<Scalar> &options = {}) {
		CdReport report;
		while (report.sweeps < options.max_sweeps) {
			Scalar change = full_sweep(lambda);
			++report.sweeps;
			if (change < options.tolerance) {
				report.converged = true;
				break;
			}
			int rounds = 0;
			while (report.sweeps < options.max_sweeps) {
				change = active_sweep(lambda);
				++report.sweeps;
				if (change < options.tolerance) {
					break;
				}
				if (++rounds % kSweepsPerNewtonStep == 0) {
					newton_step(lambda);
				}
			}
		}
		return report;
	}

	/// One full cyclic pass over all coordinates; returns the largest coefficient change.
	Scalar full_sweep(Scalar lambda) {
		Scalar change = 0;
		for (Eigen::Index j = 0; j < beta_.size(); ++j) {
			change = std::max(change, update(j, lambda));
		}
		active_.clear();
		for (Eigen::Index j = 0; j < beta_.size(); ++j) {
			if (beta_(j) != Scalar(0)) {
				active_.push_back(j);
			}
		}
		return change;
	}

	Scalar objective(Scalar lambda) const {
		// 1/2 b'Qb - c'b = -1/2 b'(c + grad) since grad = c - Qb
		return Scalar(-0.5) * beta_.dot(c_ + grad_) + lambda * beta_.template lpNorm<1>();
	}

	const Vector<Scalar> &beta() const { return beta_; }
	const Vector<Scalar> &gradient() const { return grad_; }

private:
	Scalar active_sweep(Scalar lambda) {
		Scalar change = 0;
		for (auto j : active_) {
			change = std::max(change, update(j, lambda));
		}
		return change;
	}

	// Minimizes the objective restricted to the current signed support (a quadratic there),
	// moving from beta toward that minimizer only as far as the first sign change.
	// Cyclic updates alone crawl on strongly correlated columns at small lambda.
	void newton_step(Scalar lambda) {
		support_.clear();
		for (auto j : active_) {
			if (beta_(j) != Scalar(0)) {
				support_.push_back(j);
			}
		}
		const auto m = static_cast<Eigen::Index>(support_.size());
		if (m == 0) {
			return;
		}
		const Matrix<Scalar> Qa = Q_(support_, support_);
		Vector<Scalar> rhs(m);
		Vector<Scalar> current(m);
		for (Eigen::Index k = 0; k < m; ++k) {
			const auto j = support_[static_cast<std::size_t>(k)];
			current(k) = beta_(j);
			rhs(k) = c_(j) - (current(k) > 0 ? lambda : -lambda);
		}
		const Eigen::LDLT<Matrix<Scalar>> ldlt(Qa);
		if (ldlt.info() != Eigen::Success) {
			return;
		}
		const auto d = ldlt.vectorD();
		if (!(d.minCoeff() > Scalar(1e-10) * d.maxCoeff())) {
			return; // rank deficient on the support: the orthant minimizer is not unique
		}
		const Vector<Scalar> target = ldlt.solve(rhs);
		if (!target.allFinite()) {
			return;
		}
		Scalar t = 1;
		Eigen::Index blocking = -1;
		for (Eigen::Index k = 0; k < m; ++k) {
			if ((current(k) > 0) != (target(k) > 0) || target(k) == 0) {
				const Scalar tk = current(k) / (current(k) - target(k));
				if (tk < t) {
					t = tk;
					blocking = k;
				}
			}
		}
		for (Eigen::Index k = 0; k < m; ++k) {
			const auto j = support_[static_cast<std::size_t>(k)];
			beta_(j) = k == blocking ? Scalar(0) : current(k) + t * (target(k) - current(k));
		}
		grad_ = c_;
		for (auto j : support_) {
			if (beta_(j) != Scalar(0)) {
				grad_.noalias() -= beta_(j) * Q_.col(j);
			}
		}
	}

	static constexpr int kSweepsPerNewtonStep = 8;

	Scalar update(Eigen::Index j, Scalar lambda) {
		const Scalar q = Q_(j, j);
		if (!(q > Scalar(0))) {
			return 0;
		}
		const Scalar old = beta_(j);
		const Scalar fresh = static_cast<Scalar>(soft_threshold(grad_(j) + q * old, lambda)) / q;
		const Scalar delta = fresh - old;
		if (delta != Scalar(0)) {
			grad_.noalias() -= delta * Q_.col(j);
			beta_(j) = fresh;
		}
		return std::abs(delta);
	}

	const Matrix<Scalar> &Q_;
	const Vector<Scalar> &c_;
	Vector<Scalar> beta_;
	Vector<Scalar> grad_;
	std::vector<Eigen::Index> active_;
	std::vector<Eigen::Index> support_;
};

namespace detail {

// Piecewise-linear solution path of the Gram-form problem (LARS with lasso drops),
// tracked with an incrementally updated Cholesky factor of Q on the support. Used only
// to warm-start coordinate descent at each grid point; it reports failure on numerical
// breakdown and the caller falls back to plain warm starts.
template <typename Scalar>
class Homotopy {
public:
	Homotopy(const Matrix<Scalar> &Q, const Vector<Scalar> &c)
	    : Q_(Q), c_(c), p_(c.size()), beta_(Vector<Scalar>::Zero(c.size())), g_(c), a_(c.size()),
	      L_(c.size(), c.size()), QS_(c.size(), c.size()), signs_(c.size()), z_(c.size()), w_(c.size()),
	      in_support_(static_cast<std::size_t>(c.size()), 0), blocked_(static_cast<std::size_t>(c.size()), 0) {
		lambda_ = p_ == 0 ? Scalar(0) : c.cwiseAbs().maxCoeff();
		max_steps_ = 20 * p_ + 100;
	}

	bool ok() const { return ok_; }
	long steps() const { return steps_; }
	const Vector<Scalar> &beta() const { return beta_; }
	/// c - Q beta, maintained along the path (refreshed every few segments).
	const Vector<Scalar> &gradient() const { return g_; }

	/// Follows the path down to `target`; false once the path has broken down.
	bool advance(Scalar target) {
		while (ok_ && lambda_ > target) {
			if (++steps_ > max_steps_) {
				ok_ = false;
				break;
			}
			if (support_.empty() && !enter_tightest()) {
				lambda_ = target; // nothing can enter: beta = 0 stays optimal
				break;
			}
			step(target);
		}
		return ok_;
	}

private:
	bool enter_tightest() {
		Eigen::Index best = -1;
		for (Eigen::Index j = 0; j < p_; ++j) {
			if (!blocked_[static_cast<std::size_t>(j)] && !(Q_(j, j) > Scalar(0))) {
				blocked_[static_cast<std::size_t>(j)] = 1;
			}
			if (!blocked_[static_cast<std::size_t>(j)] && (best < 0 || std::abs(g_(j)) > std::abs(g_(best)))) {
				best = j;
			}
		}
		if (best < 0 || !(std::abs(g_(best)) > Scalar(0))) {
			return false;
		}
		lambda_ = std::min(lambda_, std::abs(g_(best)));
		return add(best);
	}

	void step(Scalar target) {
		const auto m = static_cast<Eigen::Index>(support_.size());
		// direction: beta_S grows by delta * w as lambda falls by delta; z_ = L^-1 signs is
		// kept current by add/remove, and w, a stay valid while the support is unchanged
		auto w = w_.head(m);
		if (stale_) {
			w = z_.head(m);
			L_.topLeftCorner(m, m).template triangularView<Eigen::Lower>().transpose().solveInPlace(w);
			if (!w.allFinite()) {
				ok_ = false;
				return;
			}
			a_.noalias() = QS_.leftCols(m) * w;
			stale_ = false;
		}
		const auto &a = a_;
		Scalar delta = lambda_ - target;
		int event = 0; // 0 target, 1 entry, 2 drop
		Eigen::Index who = -1;
		for (Eigen::Index j = 0; j < p_; ++j) {
			const auto ju = static_cast<std::size_t>(j);
			if (in_support_[ju] || blocked_[ju]) {
				continue;
			}
			const Scalar up = Scalar(1) - a(j);
			const Scalar down = Scalar(1) + a(j);
			if (up > Scalar(1e-12)) {
				const Scalar d = (lambda_ - g_(j)) / up;
				if (d > 0 && d < delta) {
					delta = d;
					event = 1;
					who = j;
				}
			}
			if (down > Scalar(1e-12)) {
				const Scalar d = (lambda_ + g_(j)) / down;
				if (d > 0 && d < delta) {
					delta = d;
					event = 1;
					who = j;
				}
			}
		}
		for (Eigen::Index k = 0; k < m; ++k) {
			const auto j = support_[static_cast<std::size_t>(k)];
			if (w(k) != Scalar(0)) {
				const Scalar d = -beta_(j) / w(k);
				if (d > 0 && d < delta) {
					delta = d;
					event = 2;
					who = k;
				}
			}
		}
		for (Eigen::Index k = 0; k < m; ++k) {
			beta_(support_[static_cast<std::size_t>(k)]) += delta * w(k);
		}
		lambda_ -= delta;
		if (event == 2) {
			remove(who);
		}
		// g moves linearly along a segment; refresh now and then against drift
		if (++segments_ % kRefreshEvery == 0) {
			refresh_gradient();
		} else {
			g_.noalias() -= delta * a_;
		}
		if (event == 1 && !add(who)) {
			blocked_[static_cast<std::size_t>(who)] = 1;
		}
	}

	void refresh_gradient() {
		g_ = c_;
		for (auto j : support_) {
			g_.noalias() -= beta_(j) * Q_.col(j);
		}
	}

	// Appends j to the Cholesky factor; false when Q_jj is (numerically) in the span of the support.
	bool add(Eigen::Index j) {
		const auto m = static_cast<Eigen::Index>(support_.size());
		Vector<Scalar> l(m);
		for (Eigen::Index k = 0; k < m; ++k) {
			l(k) = Q_(support_[static_cast<std::size_t>(k)], j);
		}
		if (m > 0) {
			L_.topLeftCorner(m, m).template triangularView<Eigen::Lower>().solveInPlace(l);
		}
		const Scalar d2 = Q_(j, j) - l.squaredNorm();
		if (!(d2 > Scalar(1e-10) * Q_(j, j))) {
			return false;
		}
		L_.row(m).head(m) = l.transpose();
		L_(m, m) = std::sqrt(d2);
		QS_.col(m) = Q_.col(j);
		support_.push_back(j);
		in_support_[static_cast<std::size_t>(j)] = 1;
		signs_(m) = g_(j) >= 0 ? Scalar(1) : Scalar(-1);
		forward_from(m);
		return true;
	}

	// Deletes support position k: drop row k of L, then re-triangularize with Givens rotations.
	void remove(Eigen::Index k) {
		const auto m = static_cast<Eigen::Index>(support_.size());
		const auto j = support_[static_cast<std::size_t>(k)];
		beta_(j) = 0;
		in_support_[static_cast<std::size_t>(j)] = 0;
		for (Eigen::Index r = k; r + 1 < m; ++r) {
			L_.row(r).head(m) = L_.row(r + 1).head(m);
			signs_(r) = signs_(r + 1);
			QS_.col(r) = QS_.col(r + 1);
		}
		for (Eigen::Index r = k; r + 1 < m; ++r) {
			// zero L(r, r + 1) by rotating columns r and r + 1
			Eigen::JacobiRotation<Scalar> rot;
			rot.makeGivens(L_(r, r), L_(r, r + 1));
			for (Eigen::Index i = r; i + 1 < m; ++i) {
				const Scalar x = L_(i, r);
				const Scalar y = L_(i, r + 1);
				L_(i, r) = rot.c() * x - rot.s() * y;
				L_(i, r + 1) = rot.s() * x + rot.c() * y;
			}
			if (L_(r, r) < 0) {
				L_.col(r).segment(r, m - 1 - r) *= Scalar(-1);
			}
		}
		support_.erase(support_.begin() + k);
		std::fill(blocked_.begin(), blocked_.end(), 0);
		forward_from(k); // rows above k are untouched by the rotations
	}

	// Forward substitution of L z = signs for rows k and up.
	void forward_from(Eigen::Index k) {
		const auto m = static_cast<Eigen::Index>(support_.size());
		for (Eigen::Index r = k; r < m; ++r) {
			z_(r) = (signs_(r) - L_.row(r).head(r).dot(z_.head(r))) / L_(r, r);
		}
		stale_ = true;
	}

	const Matrix<Scalar> &Q_;
	const Vector<Scalar> &c_;
	Eigen::Index p_;
	Vector<Scalar> beta_;
	Vector<Scalar> g_;
	Vector<Scalar> a_;
	Matrix<Scalar> L_;
	Matrix<Scalar> QS_; // columns of Q on the support, in support order
	Vector<Scalar> signs_;
	Vector<Scalar> z_, w_;
	std::vector<Eigen::Index> support_;
	std::vector<char> in_support_;
	std::vector<char> blocked_;
	Scalar lambda_ = 0;
	static constexpr long kRefreshEvery = 32;
	long steps_ = 0;
	long segments_ = 0;
	long max_steps_ = 0;
	bool ok_ = true;
	bool stale_ = true;
};

} // namespace detail

/// Solutions along a descending grid: each grid point is solved by coordinate descent,
/// warm-started from the exact homotopy path (or the previous solution if that broke down).
/// `on_solution(index, beta)` is called once per grid point, in order.
template <typename Scalar, typename Callback>
void solve_path(const Matrix<Scalar> &Q, const Vector<Scalar> &c, const Vector<Scalar> &grid,
                const CdOptions<Scalar> &options, Callback &&on_solution, Eigen::Index last = -1) {
	if (last < 0) {
		last = grid.size() - 1;
	}
	detail::Homotopy<Scalar> path(Q, c);
	GramLasso<Scalar> cd(Q, c);
	for (Eigen::Index g = 0; g <= last; ++g) {
		if (path.ok() && path.advance(grid(g))) {
			cd.set_state(path.beta(), path.gradient());
		}
		cd.solve(grid(g), options);
		on_solution(g, cd.beta());
	}
}

/// LASSO on standardized data at one lambda; optional warm start.
template <typename DerivedX, typename DerivedY>
Vector<typename DerivedX::Scalar> fit_coordinate_descent(const Eigen::MatrixBase<DerivedX> &X,
                                                        const Eigen::MatrixBase<DerivedY> &y,
                                                        typename DerivedX::Scalar lambda,
                                                        const Vector<typename DerivedX::Scalar> *warm_start = nullptr,
                                                        const CdOptions<typename DerivedX::Scalar> &options = {},
                                                        CdReport *report = nullptr) {
	using Scalar = typename DerivedX::Scalar;
	if (!X.allFinite() || !y.allFinite()) {
		throw std::invalid_argument("coordinate descent: non-finite inputs");
	}
	const Scalar n = static_cast<Scalar>(X.rows());
	const Matrix<Scalar> Q = (X.transpose() * X) / n;
	const Vector<Scalar> c = (X.transpose() * y) / n;
	GramLasso<Scalar> solver(Q, c);
	if (warm_start != nullptr) {
		solver.set_beta(*warm_start);
	}
	const auto r = solver.solve(lambda, options);
	if (report != nullptr) {
		*report = r;
	}
	return solver.beta();
}

/// (1/2n)|y - Xb|^2 + lambda |b|_1
template <typename DerivedX, typename DerivedY, typename DerivedB>
typename DerivedX::Scalar lasso_objective(const Eigen::MatrixBase<DerivedX> &X, const Eigen::MatrixBase<DerivedY> &y,
                                          const Eigen::MatrixBase<DerivedB> &beta,
                                          typename DerivedX::Scalar lambda) {
	const auto n = static_cast<typename DerivedX::Scalar>(X.rows());
	return (y - X * beta).squaredNorm() / (2 * n) + lambda * beta.template lpNorm<1>();
}

template <typename Scalar>
struct CvResult {
	Scalar lambda = 0;
	Eigen::Index index = 0;
	Vector<Scalar> curve; ///< mean held-out MSE per grid point
	std::vector<int> folds; ///< fold id per row
};

/// Uniform random partition of n rows into k folds of near-equal size.
inline std::vector<int> assign_folds(Eigen::Index n, int k, std::uint64_t seed) {
	if (k < 2 || k > n) {
		throw std::invalid_argument("cross-validation needs 2 <= k <= n (k=" + std::to_string(k) +
		                            ", n=" + std::to_string(n) + ")");
	}
	std::vector<int> order(static_cast<std::size_t>(n));
	std::iota(order.begin(), order.end(), 0);
	std::mt19937_64 rng(seed);
	std::shuffle(order.begin(), order.end(), rng);
	std::vector<int> folds(static_cast<std::size_t>(n));
	for (std::size_t pos = 0; pos < order.size(); ++pos) {
		folds[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(k));
	}
	return folds;
}

namespace detail {

// Per-fold sufficient statistics, so each training complement is a subtraction.
template <typename Scalar>
struct FoldStats {
	std::vector<std::vector<Eigen::Index>> rows;
	std::vector<Matrix<Scalar>> gram;   // X_k'X_k
	std::vector<Vector<Scalar>> cross;  // X_k'y_k
	std::vector<Vector<Scalar>> colsum; // 1'X_k
	std::vector<Scalar> ysum;
	Matrix<Scalar> gram_total;
	Vector<Scalar> cross_total;
	Vector<Scalar> colsum_total;
	Scalar ysum_total = 0;
};

template <typename Scalar, typename DerivedX, typename DerivedY>
FoldStats<Scalar> fold_stats(const Eigen::MatrixBase<DerivedX> &X, const Eigen::MatrixBase<DerivedY> &y,
                             const std::vector<int> &folds, int k) {
	FoldStats<Scalar> s;
	const auto p = X.cols();
	s.rows.resize(static_cast<std::size_t>(k));
	for (std::size_t i = 0; i < folds.size(); ++i) {
		s.rows[static_cast<std::size_t>(folds[i])].push_back(static_cast<Eigen::Index>(i));
	}
	s.gram_total = Matrix<Scalar>::Zero(p, p);
	s.cross_total = Vector<Scalar>::Zero(p);
	s.colsum_total = Vector<Scalar>::Zero(p);
	for (int f = 0; f < k; ++f) {
		const auto &idx = s.rows[static_cast<std::size_t>(f)];
		const Matrix<Scalar> Xf = X(idx, Eigen::all);
		const Vector<Scalar> yf = y(idx);
		Matrix<Scalar> G = Matrix<Scalar>::Zero(p, p);
		G.template selfadjointView<Eigen::Lower>().rankUpdate(Xf.transpose());
		G = G.template selfadjointView<Eigen::Lower>();
		s.gram_total += G;
		s.gram.push_back(std::move(G));
		s.cross.push_back(Xf.transpose() * yf);
		s.cross_total += s.cross.back();
		s.colsum.push_back(Xf.colwise().sum().transpose());
		s.colsum_total += s.colsum.back();
		s.ysum.push_back(yf.sum());
		s.ysum_total += s.ysum.back();
	}
	return s;
}

template <typename Scalar, typename DerivedX, typename DerivedY>
CvResult<Scalar> cross_validate(const Eigen::MatrixBase<DerivedX> &X, const Eigen::MatrixBase<DerivedY> &y,
                                const Vector<Scalar> &grid, int k, std::uint64_t seed, const CdOptions<Scalar> &cd,
                                FoldStats<Scalar> &stats) {
	CvResult<Scalar> cv;
	cv.folds = assign_folds(X.rows(), k, seed);
	stats = fold_stats<Scalar>(X, y, cv.folds, k);
	const auto p = X.cols();
	const auto n_grid = grid.size();
	cv.curve = Vector<Scalar>::Zero(n_grid);
	Matrix<Scalar> Q(p, p);
	Vector<Scalar> c(p);
	for (int f = 0; f < k; ++f) {
		const auto fi = static_cast<std::size_t>(f);
		const auto &held = stats.rows[fi];
		const Scalar n_train = static_cast<Scalar>(X.rows() - static_cast<Eigen::Index>(held.size()));
		const Vector<Scalar> mean = (stats.colsum_total - stats.colsum[fi]) / n_train;
		const Scalar ymean = (stats.ysum_total - stats.ysum[fi]) / n_train;
		// centered training Gram and cross-products
		Q = (stats.gram_total - stats.gram[fi]) / n_train;
		Q.noalias() -= mean * mean.transpose();
		c = (stats.cross_total - stats.cross[fi]) / n_train - mean * ymean;
		const Matrix<Scalar> Xh = X(held, Eigen::all);
		const Vector<Scalar> yh = y(held);
		solve_path<Scalar>(Q, c, grid, cd, [&](Eigen::Index g, const Vector<Scalar> &beta) {
			const Scalar intercept = ymean - mean.dot(beta);
			const Scalar mse = ((Xh * beta).array() + intercept - yh.array()).square().mean();
			cv.curve(g) += mse / static_cast<Scalar>(k);
		});
	}
	// descending grid: the first minimum is the largest lambda among ties
	Eigen::Index best = 0;
	for (Eigen::Index g = 1; g < n_grid; ++g) {
		if (cv.curve(g) < cv.curve(best)) {
			best = g;
		}
	}
	cv.index = best;
	cv.lambda = grid(best);
	return cv;
}

} // namespace detail

/// k-fold CV over a descending grid on standardized data; warm starts along the grid.
template <typename DerivedX, typename DerivedY>
CvResult<typename DerivedX::Scalar> cv_select(const Eigen::MatrixBase<DerivedX> &X,
                                             const Eigen::MatrixBase<DerivedY> &y,
                                             const Vector<typename DerivedX::Scalar> &grid, int k,
                                             std::uint64_t seed,
                                             const CdOptions<typename DerivedX::Scalar> &cd = {}) {
	using Scalar = typename DerivedX::Scalar;
	detail::FoldStats<Scalar> stats;
	return detail::cross_validate<Scalar>(X, y, grid, k, seed, cd, stats);
}

template <typename Scalar>
struct LassoOptions {
	int lambda_count = 100;
	Scalar lambda_min_ratio = Scalar(1e-4);
	int folds = 7;
	std::uint64_t seed = 0;
	CdOptions<Scalar> cd;
};

template <typename Scalar>
struct LassoFit {
	std::vector<std::string> names;
	Vector<Scalar> coef_std; ///< standardized scale, one per original column (0 when dropped)
	Vector<Scalar> coef;     ///< original scale
	Scalar intercept = 0;    ///< original scale
	Scalar lambda = 0;
	Eigen::Index lambda_index = 0;
	std::vector<Eigen::Index> active;
	Standardizer<Scalar> standardizer;
	Vector<Scalar> cv_curve;
	std::uint64_t fold_seed = 0;
	bool degenerate = false; ///< constant target; prediction is its mean
};

/// Standardize, build the lambda grid, choose lambda by k-fold CV, refit on all rows.
template <typename DerivedX, typename DerivedY>
LassoFit<typename DerivedX::Scalar> fit_lasso(const Eigen::MatrixBase<DerivedX> &X, const Eigen::MatrixBase<DerivedY> &y,
                                             std::vector<std::string> names,
                                             const LassoOptions<typename DerivedX::Scalar> &options = {}) {
	using Scalar = typename DerivedX::Scalar;
	if (static_cast<Eigen::Index>(names.size()) != X.cols()) {
		throw std::invalid_argument("fit_lasso: " + std::to_string(names.size()) + " names for " +
		                            std::to_string(X.cols()) + " columns");
	}
	if (!X.allFinite() || !y.allFinite()) {
		throw std::invalid_argument("fit_lasso: non-finite inputs");
	}
	auto data = standardize(X, y);
	LassoFit<Scalar> fit;
	fit.names = std::move(names);
	fit.standardizer = data.standardizer;
	fit.fold_seed = options.seed;
	fit.coef_std = Vector<Scalar>::Zero(X.cols());
	const auto grid = lambda_grid(data.X, data.y, options.lambda_count, options.lambda_min_ratio);
	const auto &st = fit.standardizer;

	Vector<Scalar> beta = Vector<Scalar>::Zero(data.X.cols());
	if (grid.degenerate) {
		fit.degenerate = true;
		fit.lambda = 0;
	} else {
		detail::FoldStats<Scalar> stats;
		const auto cv = detail::cross_validate<Scalar>(data.X, data.y, grid.values, options.folds, options.seed,
		                                               options.cd, stats);
		fit.cv_curve = cv.curve;
		fit.lambda = cv.lambda;
		fit.lambda_index = cv.index;
		const Scalar n = static_cast<Scalar>(data.X.rows());
		const Matrix<Scalar> Q = stats.gram_total / n;
		const Vector<Scalar> c = stats.cross_total / n;
		solve_path<Scalar>(
		    Q, c, grid.values, options.cd, [&](Eigen::Index, const Vector<Scalar> &b) { beta = b; }, cv.index);
	}

	fit.coef = Vector<Scalar>::Zero(X.cols());
	fit.intercept = st.y_mean;
	for (std::size_t k = 0; k < st.retained.size(); ++k) {
		const auto j = st.retained[k];
		const Scalar b = beta(static_cast<Eigen::Index>(k));
		fit.coef_std(j) = b;
		if (b != Scalar(0)) {
			fit.active.push_back(j);
			fit.coef(j) = st.y_scale * b / st.scale(j);
			fit.intercept -= fit.coef(j) * st.mean(j);
		}
	}
	return fit;
}

/// Forecast from a row in original units, positionally aligned with fit.names.
template <typename Scalar, typename Derived>
Scalar predict(const LassoFit<Scalar> &fit, const Eigen::MatrixBase<Derived> &row) {
	if (row.size() != static_cast<Eigen::Index>(fit.names.size())) {
		throw std::invalid_argument("predict: row has " + std::to_string(row.size()) + " values, fit expects " +
		                            std::to_string(fit.names.size()));
	}
	return fit.intercept + fit.coef.dot(row.template cast<Scalar>());
}

/// Forecast from named values; every fitted column must be present.
template <typename Scalar>
Scalar predict(const LassoFit<Scalar> &fit, const std::vector<std::string> &names, const Vector<Scalar> &values) {
	std::unordered_map<std::string, Eigen::Index> position;
	for (std::size_t i = 0; i < names.size(); ++i) {
		position.emplace(names[i], static_cast<Eigen::Index>(i));
	}
	Scalar out = fit.intercept;
	for (std::size_t j = 0; j < fit.names.size(); ++j) {
		const auto it = position.find(fit.names[j]);
		if (it == position.end()) {
			throw std::invalid_argument("predict: missing column '" + fit.names[j] + "'");
		}
		out += fit.coef(static_cast<Eigen::Index>(j)) * values(it->second);
	}
	return out;
}

template <typename Scalar>
nlohmann::json to_json(const LassoFit<Scalar> &fit) {
	nlohmann::json j;
	j["columns"] = fit.names;
	j["coefficients"] = std::vector<double>(fit.coef.data(), fit.coef.data() + fit.coef.size());
	j["intercept"] = static_cast<double>(fit.intercept);
	j["lambda"] = static_cast<double>(fit.lambda);
	j["fold_seed"] = fit.fold_seed;
	return j;
}

/// Restores a prediction-ready fit (original-scale coefficients only).
template <typename Scalar = double>
LassoFit<Scalar> lasso_fit_from_json(const nlohmann::json &j) {
	LassoFit<Scalar> fit;
	fit.names = j.at("columns").get<std::vector<std::string>>();
	const auto coef = j.at("coefficients").get<std::vector<double>>();
	if (coef.size() != fit.names.size()) {
		throw std::invalid_argument("lasso fit JSON: coefficient count does not match column count");
	}
	fit.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size())).cast<Scalar>();
	fit.coef_std = Vector<Scalar>::Zero(fit.coef.size());
	fit.intercept = static_cast<Scalar>(j.at("intercept").get<double>());
	fit.lambda = static_cast<Scalar>(j.at("lambda").get<double>());
	fit.fold_seed = j.at("fold_seed").get<std::uint64_t>();
	for (Eigen::Index i = 0; i < fit.coef.size(); ++i) {
		if (fit.coef(i) != Scalar(0)) {
			fit.active.push_back(i);
		}
	}
	return fit;
}

} // namespace epfq::lasso
