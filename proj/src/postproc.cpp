#include "epfq/postproc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "epfq/csv.hpp"

namespace epfq {

namespace {

struct GridInfo {
	GridLabel label;
	const char *name;
	int size;
	int denominator; // interior levels are k / denominator
	int step;        // ... for k = step, 2 step, ...
};

// T5 and T7 are irregular: {0.1, 0.5, 0.9} and {0.1, 0.3, ..., 0.9}
constexpr std::array<GridInfo, 7> kGrids{{
    {GridLabel::T5, "T5", 5, 10, 4},
    {GridLabel::T7, "T7", 7, 10, 2},
    {GridLabel::T11, "T11", 11, 10, 1},
    {GridLabel::T21, "T21", 21, 20, 1},
    {GridLabel::T51, "T51", 51, 50, 1},
    {GridLabel::T101, "T101", 101, 100, 1},
    {GridLabel::T201, "T201", 201, 200, 1},
}};

const GridInfo &info(GridLabel label) {
	for (const auto &g : kGrids) {
		if (g.label == label) {
			return g;
		}
	}
	throw std::invalid_argument("unknown grid label");
}

} // namespace

GridLabel parse_grid_label(std::string_view label) {
	for (const auto &g : kGrids) {
		if (label == g.name) {
			return g.label;
		}
	}
	throw std::invalid_argument("unknown probability grid '" + std::string(label) +
	                            "' (valid: T5, T7, T11, T21, T51, T101, T201)");
}

std::string to_string(GridLabel label) {
	return info(label).name;
}

int grid_size(GridLabel label) {
	return info(label).size;
}

ProbGrid make_grid(GridLabel label, int window) {
	if (window < 2) {
		throw std::invalid_argument("probability grid needs a window of at least 2 days");
	}
	const auto &g = info(label);
	ProbGrid grid;
	grid.label = label;
	grid.window = window;
	grid.gamma = 1.0 / (2.0 * window);
	grid.levels.push_back(grid.gamma);
	if (label == GridLabel::T7) {
		for (int k : {1, 3, 5, 7, 9}) {
			grid.levels.push_back(k / 10.0);
		}
	} else if (label == GridLabel::T5) {
		for (int k : {1, 5, 9}) {
			grid.levels.push_back(k / 10.0);
		}
	} else {
		for (int k = g.step; k < g.denominator; k += g.step) {
			grid.levels.push_back(static_cast<double>(k) / g.denominator);
		}
	}
	grid.levels.push_back(1.0 - grid.gamma);
	for (std::size_t i = 1; i < grid.levels.size(); ++i) {
		if (!(grid.levels[i] > grid.levels[i - 1])) {
			throw std::invalid_argument("grid " + std::string(g.name) + " with N=" + std::to_string(window) +
			                            ": gamma=" + format_level(grid.gamma) +
			                            " does not precede the interior levels");
		}
	}
	return grid;
}

std::string format_level(double tau) {
	char buf[32];
	std::snprintf(buf, sizeof buf, "%.6g", tau);
	return buf;
}

std::string to_string(Fundamental var) {
	switch (var) {
	case Fundamental::Load:
		return "Load";
	case Fundamental::Solar:
		return "Solar";
	case Fundamental::Wind:
		return "Wind";
	case Fundamental::RES:
		return "RES";
	case Fundamental::ResLoad:
		return "ResLoad";
	}
	return "?";
}

Fundamental parse_fundamental(std::string_view name) {
	for (auto v : {Fundamental::Load, Fundamental::Solar, Fundamental::Wind, Fundamental::RES, Fundamental::ResLoad}) {
		if (name == to_string(v)) {
			return v;
		}
	}
	throw std::invalid_argument("unknown fundamental '" + std::string(name) + "'");
}

std::string to_string(Method method) {
	switch (method) {
	case Method::HS:
		return "HS";
	case Method::QR:
		return "QR";
	case Method::ReLU:
		return "ReLU";
	}
	return "?";
}

Method parse_method(std::string_view name) {
	for (auto m : {Method::HS, Method::QR, Method::ReLU}) {
		if (name == to_string(m)) {
			return m;
		}
	}
	throw std::invalid_argument("unknown postprocessing method '" + std::string(name) + "' (valid: HS, QR, ReLU)");
}

double quantile_of_sorted(std::span<const double> sorted, double tau) {
	if (sorted.empty()) {
		throw std::invalid_argument("empirical quantile of an empty sample");
	}
	const double h = (static_cast<double>(sorted.size()) - 1.0) * tau;
	const auto lo = static_cast<std::size_t>(std::floor(h));
	if (lo + 1 >= sorted.size()) {
		return sorted.back();
	}
	const double frac = h - static_cast<double>(lo);
	return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double empirical_quantile(std::span<const double> sample, double tau) {
	if (sample.empty()) {
		throw std::invalid_argument("empirical quantile of an empty sample");
	}
	std::vector<double> sorted(sample.begin(), sample.end());
	std::sort(sorted.begin(), sorted.end());
	return quantile_of_sorted(sorted, tau);
}

Eigen::VectorXd hs_forecast(double point_fc, std::span<const double> error_window, const ProbGrid &grid) {
	if (error_window.size() + 1 < kMinQuantileWindow) {
		throw std::invalid_argument("historical simulation needs at least 29 past errors, got " +
		                            std::to_string(error_window.size()));
	}
	std::vector<double> sorted(error_window.begin(), error_window.end());
	std::sort(sorted.begin(), sorted.end());
	Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
	for (std::size_t k = 0; k < grid.size(); ++k) {
		out(static_cast<Eigen::Index>(k)) = point_fc + quantile_of_sorted(sorted, grid.levels[k]);
	}
	return out;
}

Eigen::VectorXd qr_forecast(std::span<const QrFit> coeffs, double point_fc) {
	Eigen::VectorXd out(static_cast<Eigen::Index>(coeffs.size()));
	for (std::size_t k = 0; k < coeffs.size(); ++k) {
		out(static_cast<Eigen::Index>(k)) = coeffs[k].intercept + coeffs[k].slope * point_fc;
	}
	return rearrange(std::move(out));
}

Eigen::VectorXd relu_transform(double point_fc, std::span<const double> forecast_window, const ProbGrid &grid) {
	if (forecast_window.empty()) {
		throw std::invalid_argument("ReLU transform needs a nonempty forecast window");
	}
	std::vector<double> sorted(forecast_window.begin(), forecast_window.end());
	std::sort(sorted.begin(), sorted.end());
	Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
	for (std::size_t k = 0; k < grid.size(); ++k) {
		out(static_cast<Eigen::Index>(k)) = std::max(point_fc, quantile_of_sorted(sorted, grid.levels[k]));
	}
	return out;
}

Eigen::VectorXd rearrange(Eigen::VectorXd values) {
	std::sort(values.data(), values.data() + values.size());
	return values;
}

QuantileSurface::QuantileSurface(Fundamental variable, Method method, ProbGrid grid, DayDate first_day, int n_days)
    : variable_(variable), method_(method), grid_(std::move(grid)), first_day_(first_day), n_days_(n_days),
      values_(Storage::Zero(static_cast<Eigen::Index>(n_days) * kHoursPerDay,
                            static_cast<Eigen::Index>(grid_.size()))),
      untrained_(static_cast<std::size_t>(n_days) * kHoursPerDay, 0) {
	if (n_days < 1) {
		throw std::invalid_argument("quantile surface must cover at least one day");
	}
}

Eigen::Index QuantileSurface::slot(DayDate day, int hour) const {
	if (!contains(day) || hour < 1 || hour > kHoursPerDay) {
		throw std::out_of_range("surface " + to_string(variable_) + "/" + to_string(method_) + " has no slot " +
		                        day.iso() + " h" + std::to_string(hour) + " (covers " + first_day_.iso() + " .. " +
		                        last_day().iso() + ")");
	}
	return static_cast<Eigen::Index>(day - first_day_) * kHoursPerDay + (hour - 1);
}

QuantileSurface build_surface(Fundamental variable, const HourlyPanel &point_fc, const HourlyPanel &actual,
                              Method method, const ProbGrid &grid, int window) {
	return build_surface(variable, point_fc, actual, method, grid, window, point_fc.first_day() + window,
	                     point_fc.last_day());
}

QuantileSurface build_surface(Fundamental variable, const HourlyPanel &point_fc, const HourlyPanel &actual,
                              Method method, const ProbGrid &grid, int window, DayDate first, DayDate last) {
	if (window < static_cast<int>(kMinQuantileWindow)) {
		throw std::invalid_argument("postprocessing window must be at least 30 days");
	}
	if (first > last) {
		throw std::invalid_argument("surface range " + first.iso() + " .. " + last.iso() + " is empty");
	}
	const DayDate history_start = first - window;
	if (history_start < point_fc.first_day() || last > point_fc.last_day()) {
		throw std::out_of_range("insufficient history for " + to_string(variable) + " surface from " + first.iso() +
		                        ": forecasts cover " + point_fc.first_day().iso() + " .. " +
		                        point_fc.last_day().iso() + ", need " + history_start.iso() + " .. " + last.iso());
	}
	const bool needs_actuals = method != Method::ReLU;
	if (needs_actuals && (history_start < actual.first_day() || last - 2 > actual.last_day())) {
		throw std::out_of_range("insufficient actuals for " + to_string(variable) + " surface: need " +
		                        history_start.iso() + " .. " + (last - 2).iso());
	}

	QuantileSurface surface(variable, method, grid, first, last - first + 1);
	const auto n_levels = grid.size();
	const auto &fc = point_fc.values();
	const int fc_offset = point_fc.first_day().serial();
	const int act_offset = actual.n_days() > 0 ? actual.first_day().serial() : 0;

	std::vector<double> xs, ys, sorted;
	std::vector<std::vector<QrFit>> warm(kHoursPerDay);

	for (DayDate day = first; day <= last; ++day) {
		for (int h = 1; h <= kHoursPerDay; ++h) {
			const int col = h - 1;
			const double point = fc(day.serial() - fc_offset, col);
			auto out = surface.quantiles(day, h);
			if (variable == Fundamental::Solar && point == 0.0) {
				out.setZero();
				surface.set_untrained(day, h, true);
				continue;
			}
			Eigen::VectorXd q;
			switch (method) {
			case Method::HS: {
				ys.clear();
				for (DayDate d = day - window; d <= day - 2; ++d) {
					ys.push_back(actual.values()(d.serial() - act_offset, col) - fc(d.serial() - fc_offset, col));
				}
				q = hs_forecast(point, ys, grid);
				break;
			}
			case Method::QR: {
				xs.clear();
				ys.clear();
				for (DayDate d = day - window; d <= day - 2; ++d) {
					xs.push_back(fc(d.serial() - fc_offset, col));
					ys.push_back(actual.values()(d.serial() - act_offset, col));
				}
				auto &coeffs = warm[static_cast<std::size_t>(col)];
				const bool have_warm = coeffs.size() == n_levels;
				coeffs.resize(n_levels);
				for (std::size_t k = 0; k < n_levels; ++k) {
					// warm start from yesterday's fit at this level, else from the neighbouring level
					const QrFit *seed = have_warm ? &coeffs[k] : (k > 0 ? &coeffs[k - 1] : nullptr);
					const QrFit prior = seed != nullptr ? *seed : QrFit{};
					coeffs[k] = fit_qr(xs, ys, grid.levels[k], seed != nullptr ? &prior : nullptr);
				}
				q = qr_forecast(coeffs, point);
				break;
			}
			case Method::ReLU: {
				xs.clear();
				for (DayDate d = day - window; d <= day - 1; ++d) {
					xs.push_back(fc(d.serial() - fc_offset, col));
				}
				q = relu_transform(point, xs, grid);
				break;
			}
			}
			q = rearrange(std::move(q));
			if (is_nonnegative(variable)) {
				q = q.cwiseMax(0.0);
			}
			out = q.transpose();
		}
	}
	return surface;
}

void write_surface_csv(const QuantileSurface &surface, std::ostream &out) {
	out << "date,hour,tau,value,method,variable\n";
	const auto method = to_string(surface.method());
	const auto var = to_string(surface.variable());
	for (DayDate day = surface.first_day(); day <= surface.last_day(); ++day) {
		const auto iso = day.iso();
		for (int h = 1; h <= kHoursPerDay; ++h) {
			const auto q = surface.quantiles(day, h);
			for (std::size_t k = 0; k < surface.grid().size(); ++k) {
				out << iso << ',' << h << ',' << csv::format(surface.grid().levels[k]) << ','
				    << csv::format(q(static_cast<Eigen::Index>(k))) << ',' << method << ',' << var << '\n';
			}
		}
	}
}

} // namespace epfq
