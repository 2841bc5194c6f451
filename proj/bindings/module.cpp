// Python bindings for the core library. The module exposes the operations a
// notebook actually needs: Kelly sizing, minimum-variance weights, indicator
// transforms, rolling VaR with its coverage tests, dynamic beta, the KS
// statistic, and the full command line entry point for everything else.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sizebench/bars.hpp"
#include "sizebench/cli.hpp"
#include "sizebench/dates.hpp"
#include "sizebench/errors.hpp"
#include "sizebench/indicators.hpp"
#include "sizebench/kalman.hpp"
#include "sizebench/market_data.hpp"
#include "sizebench/risk.hpp"
#include "sizebench/sizing.hpp"
#include "sizebench/stats.hpp"
#include "sizebench/vartests.hpp"

namespace py = pybind11;

namespace {

using namespace sizebench;

std::vector<Date> parse_dates(const std::vector<std::string>& dates) {
  std::vector<Date> out;
  out.reserve(dates.size());
  for (const auto& d : dates) out.push_back(Date::parse(d));
  return out;
}

std::vector<std::string> format_dates(const std::vector<Date>& dates) {
  std::vector<std::string> out;
  out.reserve(dates.size());
  for (const auto& d : dates) out.push_back(d.to_string());
  return out;
}

ReturnSeries returns_from_lists(const std::vector<std::string>& dates,
                                const std::vector<double>& values, const std::string& ticker) {
  if (dates.size() != values.size())
    throw DomainError("dates and values must have the same length");
  ReturnSeries r;
  r.ticker = ticker;
  r.dates = parse_dates(dates);
  r.values = values;
  return r;
}

py::dict test_to_dict(const vartests::TestResult& result) {
  py::dict out;
  out["name"] = result.name;
  out["statistic"] = result.statistic;
  out["df"] = result.df;
  out["p_value"] = result.p_value;
  out["reject_5pct"] = result.reject_5pct;
  out["components"] = result.components;
  out["flags"] = result.flags;
  return out;
}

}  // namespace

PYBIND11_MODULE(_sizebench, m) {
  m.doc() = "Position sizing, VaR backtesting and factor analysis primitives";

  py::register_exception<Error>(m, "Error");

  // Kelly criterion.
  py::class_<sizing::KellyOptimum>(m, "KellyOptimum")
      .def_readonly("g_star", &sizing::KellyOptimum::g_star)
      .def_readonly("gamma_star", &sizing::KellyOptimum::gamma_star)
      .def("__repr__", [](const sizing::KellyOptimum& k) {
        std::ostringstream out;
        out << "KellyOptimum(g_star=" << k.g_star << ", gamma_star=" << k.gamma_star << ")";
        return out.str();
      });
  m.def("kelly_growth", &sizing::kelly_growth, py::arg("p"), py::arg("g"),
        "Expected log growth rate of a fixed-fraction bet");
  m.def("kelly_optimal", &sizing::kelly_optimal, py::arg("p"),
        "Closed-form optimal bet fraction and growth for win probability p");

  // Minimum-variance book weights.
  m.def(
      "min_variance_weights",
      [](const Eigen::MatrixXd& cov, const std::vector<std::string>& tickers) {
        const auto weights = sizing::min_variance_weights(cov, tickers);
        std::map<std::string, double> out;
        for (std::size_t i = 0; i < weights.tickers.size(); ++i)
          out[weights.tickers[i]] = weights.weights[i];
        return out;
      },
      py::arg("cov"), py::arg("tickers"),
      "Fully-invested minimum-variance weights from a covariance matrix");

  // Daily bars and derived returns.
  py::class_<BarSeries>(m, "BarSeries")
      .def_readonly("ticker", &BarSeries::ticker)
      .def("__len__", [](const BarSeries& s) { return s.bars.size(); })
      .def("dates",
           [](const BarSeries& s) {
             std::vector<std::string> out;
             for (const auto& bar : s.bars) out.push_back(bar.date.to_string());
             return out;
           })
      .def("closes", [](const BarSeries& s) {
        std::vector<double> out;
        for (const auto& bar : s.bars) out.push_back(bar.close);
        return out;
      });
  m.def(
      "load_bars",
      [](const std::string& path, const std::string& ticker) {
        return market_data::ingest_csv(
            path, ticker.empty() ? std::filesystem::path(path).stem().string() : ticker);
      },
      py::arg("path"), py::arg("ticker") = std::string(),
      "Read a daily OHLCV CSV; the ticker defaults to the file stem");
  m.def(
      "returns_from_bars",
      [](const BarSeries& series, const std::string& kind) {
        ReturnKind parsed;
        if (kind == "log") {
          parsed = ReturnKind::Log;
        } else if (kind == "simple") {
          parsed = ReturnKind::Simple;
        } else {
          throw DomainError("return kind must be 'log' or 'simple', got '" + kind + "'");
        }
        const auto returns = market_data::compute_returns(series, parsed);
        py::dict out;
        out["dates"] = format_dates(returns.dates);
        out["values"] = returns.values;
        return out;
      },
      py::arg("series"), py::arg("kind") = "log", "Close-to-close returns of a bar series");

  // Indicator transforms.
  py::class_<indicators::IndicatorSeries>(m, "IndicatorSeries")
      .def_readonly("name", &indicators::IndicatorSeries::name)
      .def_readonly("warmup", &indicators::IndicatorSeries::warmup)
      .def_readonly("params", &indicators::IndicatorSeries::params)
      .def("__len__", [](const indicators::IndicatorSeries& s) { return s.size(); })
      .def("dates",
           [](const indicators::IndicatorSeries& s) { return format_dates(s.dates); })
      .def("channels",
           [](const indicators::IndicatorSeries& s) {
             std::vector<std::string> names;
             for (const auto& [name, values] : s.channels) names.push_back(name);
             return names;
           })
      .def("channel", &indicators::IndicatorSeries::channel, py::arg("name"),
           "Values for one channel; warmup entries are NaN");

  m.def(
      "sma",
      [](const std::vector<std::string>& dates, const std::vector<double>& prices, int window) {
        return indicators::sma(parse_dates(dates), prices, window);
      },
      py::arg("dates"), py::arg("prices"), py::arg("window"));
  m.def(
      "ema",
      [](const std::vector<std::string>& dates, const std::vector<double>& prices, int window) {
        return indicators::ema(parse_dates(dates), prices, window);
      },
      py::arg("dates"), py::arg("prices"), py::arg("window"));
  m.def(
      "rsi",
      [](const std::vector<std::string>& dates, const std::vector<double>& prices, int window) {
        return indicators::rsi(parse_dates(dates), prices, window);
      },
      py::arg("dates"), py::arg("prices"), py::arg("window"));
  m.def(
      "bollinger",
      [](const std::vector<std::string>& dates, const std::vector<double>& prices, int window,
         double k) { return indicators::bollinger(parse_dates(dates), prices, window, k); },
      py::arg("dates"), py::arg("prices"), py::arg("window"), py::arg("k") = 2.0);
  m.def("stochastic_k", &indicators::stochastic_k, py::arg("series"), py::arg("window") = 4);
  m.def("mfi", &indicators::mfi, py::arg("series"), py::arg("window") = 14);
  m.def(
      "compute_indicator",
      [](const std::string& kind, const BarSeries& series,
         const std::map<std::string, double>& params) {
        auto merged = indicators::default_params(kind);
        for (const auto& [key, value] : params) merged[key] = value;
        return indicators::compute_indicator(kind, series, merged);
      },
      py::arg("kind"), py::arg("series"), py::arg("params") = std::map<std::string, double>{},
      "Bar-driven indicator by kind; omitted parameters take their defaults");
  m.def(
      "indicator_kinds", [] { return indicators::dispatch_kinds(); },
      "Kinds accepted by compute_indicator");

  // Rolling VaR and the coverage backtests, mirroring the vartest subcommand.
  m.def(
      "var_backtest",
      [](const std::vector<std::string>& dates, const std::vector<double>& returns, double alpha,
         int window, const std::string& method, const std::string& side) {
        risk::VarConfig config;
        config.alpha = alpha;
        config.window = window;
        config.method = risk::var_method_from_string(method);
        config.side = risk::side_from_string(side);
        risk::validate(config);

        const auto series = returns_from_lists(dates, returns, "RETURNS");
        const auto var = risk::rolling_var(series, config);
        const auto hits = risk::hit_sequence(series, var, config.side);

        py::list tests;
        const auto guarded = [&](const std::string& name,
                                 const std::function<vartests::TestResult()>& run) {
          py::dict entry;
          try {
            entry = test_to_dict(run());
          } catch (const Error& e) {
            entry["name"] = name;
            entry["error"] = std::string(e.what());
          }
          tests.append(entry);
        };
        guarded("uc", [&] { return vartests::uc_test(hits); });
        guarded("portmanteau", [&] { return vartests::independence_portmanteau(hits); });
        guarded("markov", [&] { return vartests::markov_test(hits); });
        guarded("geometric", [&] { return vartests::geometric_var_test(hits, var); });

        py::dict out;
        out["dates"] = format_dates(var.dates);
        out["var"] = var.var_values;
        out["hits"] = hits.hits;
        out["violations"] = hits.count();
        out["degenerate_window"] = var.degenerate_window;
        out["tests"] = tests;
        return out;
      },
      py::arg("dates"), py::arg("returns"), py::arg("alpha") = 0.05, py::arg("window") = 250,
      py::arg("method") = "parametric", py::arg("side") = "long",
      "Rolling VaR thresholds, violations, and the four coverage tests");

  // Time-varying market sensitivity.
  m.def(
      "dynamic_beta",
      [](const std::vector<std::string>& dates, const std::vector<double>& stock,
         const std::vector<double>& market) {
        const auto path = kalman::dynamic_beta(returns_from_lists(dates, stock, "STOCK"),
                                               returns_from_lists(dates, market, "MARKET"));
        py::dict out;
        out["dates"] = format_dates(path.dates);
        out["alpha"] = path.alpha;
        out["beta"] = path.beta;
        out["beta_se"] = path.beta_se;
        return out;
      },
      py::arg("dates"), py::arg("stock"), py::arg("market"),
      "Kalman-filtered alpha and beta of a stock against a market series");

  // Distribution-gap statistics.
  m.def(
      "ks_statistic",
      [](const std::vector<double>& sample, const std::function<double(double)>& reference_cdf) {
        return stats::ks_statistic(sample, reference_cdf);
      },
      py::arg("sample"), py::arg("reference_cdf"),
      "One-sample Kolmogorov-Smirnov statistic against a reference CDF");
  m.def("kolmogorov_pvalue", &stats::kolmogorov_pvalue, py::arg("d"), py::arg("n"),
        "Asymptotic p-value of the KS statistic at sample size n");
  m.def("normal_cdf", &stats::normal_cdf, py::arg("x"));

  // Full command line pipeline: generate, screen, indicators, factor,
  // backtest, vartest, report.
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        const int code = cli::cli_dispatch(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a subcommand; returns (exit_code, stdout, stderr)");
}
