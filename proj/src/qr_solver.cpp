#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "epfq/postproc.hpp"

namespace epfq {

namespace {

struct Candidate {
	double slope;
	double weight;
	int index;
};

struct Rotation {
	double slope = 0.0;
	int other = -1;
};

// Best line through point `pivot`: minimizes sum_j rho_tau(a_j - b c_j) over the slope b,
// with a_j = x_j - x_pivot and c_j = xhat_j - xhat_pivot. Each term is |c_j| times a
// check loss in (s_j - b), s_j = a_j / c_j, so the derivative in b rises by |c_j| as b
// passes s_j; the minimizer is the first s_j where the running derivative turns >= 0.
Rotation rotate(std::span<const double> xhat, std::span<const double> x, double tau, int pivot,
                std::vector<Candidate> &buf) {
	buf.clear();
	double derivative = 0.0;
	const double px = xhat[static_cast<std::size_t>(pivot)];
	const double py = x[static_cast<std::size_t>(pivot)];
	for (std::size_t j = 0; j < xhat.size(); ++j) {
		const double c = xhat[j] - px;
		if (c == 0.0) {
			continue;
		}
		const double a = x[j] - py;
		buf.push_back({a / c, std::abs(c), static_cast<int>(j)});
		derivative -= c > 0.0 ? c * tau : -c * (1.0 - tau);
	}
	if (buf.empty()) {
		return {};
	}
	std::sort(buf.begin(), buf.end(), [](const Candidate &l, const Candidate &r) {
		return l.slope < r.slope || (l.slope == r.slope && l.index < r.index);
	});
	for (const auto &cand : buf) {
		derivative += cand.weight;
		if (derivative >= 0.0) {
			return {cand.slope, cand.index};
		}
	}
	return {buf.back().slope, buf.back().index};
}

QrFit degenerate_fit(std::span<const double> xhat, std::span<const double> x, double tau) {
	QrFit fit;
	// the check loss of a constant is minimized at the order statistic of rank ceil(n tau)
	std::vector<double> sorted(x.begin(), x.end());
	const auto n = sorted.size();
	const auto rank =
	    std::min(n, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tau * static_cast<double>(n)))));
	std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(rank - 1), sorted.end());
	fit.intercept = sorted[rank - 1];
	fit.slope = 0.0;
	fit.degenerate = true;
	fit.objective = qr_objective(xhat, x, tau, fit.intercept, 0.0);
	return fit;
}

} // namespace

double qr_objective(std::span<const double> xhat, std::span<const double> x, double tau, double intercept,
                    double slope) {
	double total = 0.0;
	for (std::size_t j = 0; j < x.size(); ++j) {
		total += pinball_loss(intercept + slope * xhat[j], x[j], tau);
	}
	return total;
}

QrFit solve_qr_exact(std::span<const double> xhat, std::span<const double> x, double tau, const QrFit *warm) {
	if (xhat.size() != x.size()) {
		throw std::invalid_argument("quantile regression: regressor and target lengths differ");
	}
	if (x.size() < 2) {
		throw std::invalid_argument("quantile regression needs at least two pairs");
	}
	if (!(tau > 0.0 && tau < 1.0)) {
		throw std::invalid_argument("quantile regression: tau must lie in (0, 1)");
	}
	const auto [lo, hi] = std::minmax_element(xhat.begin(), xhat.end());
	if (*lo == *hi) {
		return degenerate_fit(xhat, x, tau);
	}

	const int n = static_cast<int>(x.size());
	double scale = 0.0;
	for (int j = 0; j < n; ++j) {
		scale = std::max(scale, std::abs(x[static_cast<std::size_t>(j)]));
	}
	const double on_line_tol = 1e-12 * (1.0 + scale);

	int pivot = 0;
	if (warm != nullptr && !warm->degenerate) {
		double best = INFINITY;
		for (int j = 0; j < n; ++j) {
			const double r = std::abs(x[static_cast<std::size_t>(j)] - warm->intercept -
			                          warm->slope * xhat[static_cast<std::size_t>(j)]);
			if (r < best) {
				best = r;
				pivot = j;
			}
		}
	} else {
		std::vector<int> order(static_cast<std::size_t>(n));
		std::iota(order.begin(), order.end(), 0);
		auto mid = order.begin() + n / 2;
		std::nth_element(order.begin(), mid, order.end(), [&](int a, int b) {
			return xhat[static_cast<std::size_t>(a)] < xhat[static_cast<std::size_t>(b)];
		});
		pivot = *mid;
	}

	std::vector<Candidate> buf;
	buf.reserve(x.size());
	auto line_through = [&](int p, const Rotation &rot) {
		QrFit fit;
		fit.slope = rot.slope;
		fit.intercept = x[static_cast<std::size_t>(p)] - rot.slope * xhat[static_cast<std::size_t>(p)];
		fit.objective = qr_objective(xhat, x, tau, fit.intercept, fit.slope);
		return fit;
	};

	Rotation rot = rotate(xhat, x, tau, pivot, buf);
	QrFit best = line_through(pivot, rot);
	int current = rot.other;
	std::vector<int> tried;

	const int max_steps = 8 * n + 64;
	for (int step = 0; step < max_steps; ++step) {
		const double threshold = best.objective - 1e-13 * (1.0 + best.objective);
		// rotate around the newest interpolated point first
		Rotation next = rotate(xhat, x, tau, current, buf);
		QrFit candidate = line_through(current, next);
		if (candidate.objective < threshold) {
			best = candidate;
			pivot = current;
			current = next.other;
			continue;
		}
		// no improvement around either defining point: check any other point on the line
		bool improved = false;
		for (int j = 0; j < n && !improved; ++j) {
			if (j == pivot || j == current) {
				continue;
			}
			const double r = x[static_cast<std::size_t>(j)] - best.intercept - best.slope * xhat[static_cast<std::size_t>(j)];
			if (std::abs(r) > on_line_tol) {
				continue;
			}
			Rotation alt = rotate(xhat, x, tau, j, buf);
			QrFit alt_fit = line_through(j, alt);
			if (alt_fit.objective < threshold) {
				best = alt_fit;
				pivot = j;
				current = alt.other;
				improved = true;
			}
		}
		if (!improved) {
			break;
		}
	}
	return best;
}

QrFit fit_qr(std::span<const double> xhat, std::span<const double> x, double tau, const QrFit *warm) {
	if (x.size() < 10) {
		throw std::invalid_argument("quantile regression needs at least 10 pairs, got " + std::to_string(x.size()));
	}
	return solve_qr_exact(xhat, x, tau, warm);
}

} // namespace epfq
