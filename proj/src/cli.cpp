#include "sizebench/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sizebench/engine.hpp"
#include "sizebench/errors.hpp"
#include "sizebench/indicators.hpp"
#include "sizebench/market_data.hpp"
#include "sizebench/risk.hpp"
#include "sizebench/sizing.hpp"
#include "sizebench/vartests.hpp"

namespace sizebench::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct Log {
  int level = 0;  // 0 error, 1 info, 2 debug
  std::ostream* err = nullptr;

  void info(const std::string& message) const {
    if (level >= 1) (*err) << "info: " << message << '\n';
  }
  void debug(const std::string& message) const {
    if (level >= 2) (*err) << "debug: " << message << '\n';
  }
};

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string format_short(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return buffer;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  ensure_directory(dir);
  const fs::path path = dir / name;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), e.what());
  }
}

// ---------------------------------------------------------------------------
// Strict JSON field access. Every accessor names the offending JSON path so
// a config mistake is a one-line fix.
// ---------------------------------------------------------------------------

void require_object(const json& value, const std::string& where) {
  if (!value.is_object()) throw ConfigError(where, "expected an object");
}

void reject_unknown_keys(const json& object, const std::string& where,
                         const std::set<std::string>& allowed) {
  for (const auto& [key, value] : object.items()) {
    if (allowed.count(key) == 0) throw ConfigError(where + "." + key, "unknown key");
  }
}

const json* find_key(const json& object, const std::string& key) {
  const auto it = object.find(key);
  return it == object.end() ? nullptr : &*it;
}

double as_number(const json& value, const std::string& where) {
  if (!value.is_number()) throw ConfigError(where, "expected a number");
  return value.get<double>();
}

long long as_integer(const json& value, const std::string& where) {
  if (!value.is_number_integer()) throw ConfigError(where, "expected an integer");
  return value.get<long long>();
}

std::string as_string(const json& value, const std::string& where) {
  if (!value.is_string()) throw ConfigError(where, "expected a string");
  return value.get<std::string>();
}

double number_or(const json& object, const std::string& where, const std::string& key,
                 double fallback) {
  const json* value = find_key(object, key);
  return value == nullptr ? fallback : as_number(*value, where + "." + key);
}

long long integer_or(const json& object, const std::string& where, const std::string& key,
                     long long fallback) {
  const json* value = find_key(object, key);
  return value == nullptr ? fallback : as_integer(*value, where + "." + key);
}

std::string string_or(const json& object, const std::string& where, const std::string& key,
                      const std::string& fallback) {
  const json* value = find_key(object, key);
  return value == nullptr ? fallback : as_string(*value, where + "." + key);
}

// ---------------------------------------------------------------------------
// Run config: the one JSON document shared by the factor and backtest
// subcommands. Unknown keys are rejected at every nesting level.
// ---------------------------------------------------------------------------

struct FactorSettings {
  int rsi_window = 14;
  int bollinger_window = 20;
  double bollinger_k = 2.0;
  int quantiles = 10;
  std::vector<int> horizons{1, 5, 10};
};

struct RunConfig {
  std::vector<fs::path> universe;
  sizing::SizingPolicy policy;
  engine::BacktestConfig backtest;
  FactorSettings factor;
};

RunConfig parse_run_config(const fs::path& path) {
  const json doc = load_json_file(path);
  require_object(doc, path.string());
  reject_unknown_keys(doc, "config",
                      {"universe", "policy", "capital", "commission_bps", "rebalance", "var",
                       "seed", "benchmark", "rf_annual", "beta_estimator", "factor",
                       "vol_window", "min_variance_window"});

  RunConfig config;

  const json* universe = find_key(doc, "universe");
  if (universe == nullptr || !universe->is_array() || universe->empty())
    throw ConfigError("config.universe", "expected a non-empty array of CSV paths");
  const fs::path base = path.parent_path();
  for (std::size_t i = 0; i < universe->size(); ++i) {
    const fs::path entry =
        as_string((*universe)[i], "config.universe[" + std::to_string(i) + "]");
    config.universe.push_back(entry.is_absolute() ? entry : base / entry);
  }

  if (const json* policy = find_key(doc, "policy")) {
    require_object(*policy, "config.policy");
    reject_unknown_keys(*policy, "config.policy", {"kind", "long_pct", "short_pct", "params"});
    const std::string kind = string_or(*policy, "config.policy", "kind", "fixed_fraction");
    try {
      config.policy.kind = sizing::policy_kind_from_string(kind);
    } catch (const Error& e) {
      throw ConfigError("config.policy.kind", e.what());
    }
    config.policy.long_pct = number_or(*policy, "config.policy", "long_pct", 0.10);
    config.policy.short_pct = number_or(*policy, "config.policy", "short_pct", 0.10);
    if (const json* params = find_key(*policy, "params")) {
      require_object(*params, "config.policy.params");
      for (const auto& [key, value] : params->items())
        config.policy.params[key] = as_number(value, "config.policy.params." + key);
    }
  }
  try {
    sizing::validate_policy(config.policy);
  } catch (const Error& e) {
    throw ConfigError("config.policy", e.what());
  }

  config.backtest.capital = number_or(doc, "config", "capital", config.backtest.capital);
  if (!(config.backtest.capital > 0.0))
    throw ConfigError("config.capital", "must be positive");
  config.backtest.commission_bps =
      number_or(doc, "config", "commission_bps", config.backtest.commission_bps);
  if (config.backtest.commission_bps < 0.0)
    throw ConfigError("config.commission_bps", "must be non-negative");

  try {
    config.backtest.rebalance =
        engine::rebalance_from_string(string_or(doc, "config", "rebalance", "weekly"));
  } catch (const Error& e) {
    throw ConfigError("config.rebalance", e.what());
  }

  if (const json* var = find_key(doc, "var")) {
    require_object(*var, "config.var");
    reject_unknown_keys(*var, "config.var", {"alpha", "window", "method", "side"});
    config.backtest.var.alpha = number_or(*var, "config.var", "alpha", 0.05);
    config.backtest.var.window =
        static_cast<int>(integer_or(*var, "config.var", "window", 250));
    try {
      config.backtest.var.method =
          risk::var_method_from_string(string_or(*var, "config.var", "method", "parametric"));
      config.backtest.var.side =
          risk::side_from_string(string_or(*var, "config.var", "side", "long"));
    } catch (const Error& e) {
      throw ConfigError("config.var", e.what());
    }
  }
  try {
    risk::validate(config.backtest.var);
  } catch (const Error& e) {
    throw ConfigError("config.var", e.what());
  }

  // Accepted for interface stability; every computation behind this config
  // is already deterministic without it.
  if (const json* seed = find_key(doc, "seed")) as_integer(*seed, "config.seed");

  config.backtest.benchmark_ticker = string_or(doc, "config", "benchmark", "");
  config.backtest.rf_annual = number_or(doc, "config", "rf_annual", 0.0);
  const std::string estimator = string_or(doc, "config", "beta_estimator", "ols");
  if (estimator == "ols")
    config.backtest.beta_estimator = engine::BetaEstimator::Ols;
  else if (estimator == "kalman")
    config.backtest.beta_estimator = engine::BetaEstimator::Kalman;
  else
    throw ConfigError("config.beta_estimator", "expected 'ols' or 'kalman'");

  config.backtest.vol_window =
      static_cast<int>(integer_or(doc, "config", "vol_window", config.backtest.vol_window));
  config.backtest.min_variance_window = static_cast<int>(
      integer_or(doc, "config", "min_variance_window", config.backtest.min_variance_window));
  if (config.backtest.vol_window < 2) throw ConfigError("config.vol_window", "must be >= 2");
  if (config.backtest.min_variance_window < 2)
    throw ConfigError("config.min_variance_window", "must be >= 2");

  if (const json* factor = find_key(doc, "factor")) {
    require_object(*factor, "config.factor");
    reject_unknown_keys(
        *factor, "config.factor",
        {"rsi_window", "bollinger_window", "bollinger_k", "quantiles", "horizons"});
    config.factor.rsi_window =
        static_cast<int>(integer_or(*factor, "config.factor", "rsi_window", 14));
    config.factor.bollinger_window =
        static_cast<int>(integer_or(*factor, "config.factor", "bollinger_window", 20));
    config.factor.bollinger_k = number_or(*factor, "config.factor", "bollinger_k", 2.0);
    config.factor.quantiles =
        static_cast<int>(integer_or(*factor, "config.factor", "quantiles", 10));
    if (const json* horizons = find_key(*factor, "horizons")) {
      if (!horizons->is_array() || horizons->empty())
        throw ConfigError("config.factor.horizons", "expected a non-empty array of integers");
      config.factor.horizons.clear();
      for (std::size_t i = 0; i < horizons->size(); ++i) {
        const long long h =
            as_integer((*horizons)[i], "config.factor.horizons[" + std::to_string(i) + "]");
        if (h <= 0) throw ConfigError("config.factor.horizons", "horizons must be positive");
        config.factor.horizons.push_back(static_cast<int>(h));
      }
    }
  }
  if (config.factor.rsi_window < 1)
    throw ConfigError("config.factor.rsi_window", "must be >= 1");
  if (config.factor.bollinger_window < 2)
    throw ConfigError("config.factor.bollinger_window", "must be >= 2");
  if (!(config.factor.bollinger_k > 0.0))
    throw ConfigError("config.factor.bollinger_k", "must be positive");
  if (config.factor.quantiles < 2) throw ConfigError("config.factor.quantiles", "must be >= 2");

  return config;
}

std::vector<BarSeries> load_universe(const RunConfig& config, const Log& log) {
  std::vector<BarSeries> universe;
  for (const fs::path& path : config.universe) {
    universe.push_back(market_data::ingest_csv(path, path.stem().string()));
    log.debug("loaded " + std::to_string(universe.back().bars.size()) + " bars from '" +
              path.string() + "'");
  }
  return universe;
}

engine::FactorPanel build_factor(const std::vector<BarSeries>& universe,
                                 const FactorSettings& settings) {
  engine::FactorPanel panel =
      engine::make_default_factor(universe, settings.rsi_window, settings.bollinger_window,
                                  settings.bollinger_k, settings.quantiles);
  panel.horizons = settings.horizons;
  return panel;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

// One generator stream per ticker (splitmix64 of the base seed and the
// ticker index) so a multi-name universe is not six copies of one path.
std::uint64_t ticker_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int run_generate(const fs::path& spec_path, std::uint64_t seed, const fs::path& out_dir,
                 const Log& log) {
  const json doc = load_json_file(spec_path);
  require_object(doc, spec_path.string());
  reject_unknown_keys(doc, "spec", {"tickers"});
  const json* tickers = find_key(doc, "tickers");
  if (tickers == nullptr || !tickers->is_array() || tickers->empty())
    throw ConfigError("spec.tickers", "expected a non-empty array");

  std::vector<market_data::RegimeSpec> specs;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < tickers->size(); ++i) {
    const std::string where = "spec.tickers[" + std::to_string(i) + "]";
    const json& entry = (*tickers)[i];
    require_object(entry, where);
    reject_unknown_keys(entry, where,
                        {"ticker", "start_price", "start_date", "segments", "volume_base",
                         "volume_sigma"});

    market_data::RegimeSpec spec;
    const json* ticker = find_key(entry, "ticker");
    if (ticker == nullptr) throw ConfigError(where + ".ticker", "required");
    spec.ticker = as_string(*ticker, where + ".ticker");
    if (spec.ticker.empty()) throw ConfigError(where + ".ticker", "must be non-empty");
    if (!seen.insert(spec.ticker).second)
      throw ConfigError(where + ".ticker", "duplicate ticker '" + spec.ticker + "'");

    spec.start_price = number_or(entry, where, "start_price", spec.start_price);
    if (!(spec.start_price > 0.0)) throw ConfigError(where + ".start_price", "must be positive");
    if (const json* start = find_key(entry, "start_date")) {
      try {
        spec.start_date = Date::parse(as_string(*start, where + ".start_date"));
      } catch (const Error& e) {
        throw ConfigError(where + ".start_date", e.what());
      }
    }
    spec.volume_base = number_or(entry, where, "volume_base", spec.volume_base);
    spec.volume_sigma = number_or(entry, where, "volume_sigma", spec.volume_sigma);
    if (!(spec.volume_base > 0.0)) throw ConfigError(where + ".volume_base", "must be positive");
    if (spec.volume_sigma < 0.0)
      throw ConfigError(where + ".volume_sigma", "must be non-negative");

    const json* segments = find_key(entry, "segments");
    if (segments == nullptr || !segments->is_array() || segments->empty())
      throw ConfigError(where + ".segments", "expected a non-empty array");
    for (std::size_t s = 0; s < segments->size(); ++s) {
      const std::string seg_where = where + ".segments[" + std::to_string(s) + "]";
      const json& seg = (*segments)[s];
      require_object(seg, seg_where);
      reject_unknown_keys(seg, seg_where, {"days", "drift", "vol"});
      market_data::RegimeSegment segment;
      segment.days = static_cast<int>(integer_or(seg, seg_where, "days", 0));
      segment.drift = number_or(seg, seg_where, "drift", 0.0);
      segment.vol = number_or(seg, seg_where, "vol", 0.0);
      if (segment.days <= 0) throw ConfigError(seg_where + ".days", "must be positive");
      if (segment.vol < 0.0) throw ConfigError(seg_where + ".vol", "must be non-negative");
      spec.segments.push_back(segment);
    }
    specs.push_back(std::move(spec));
  }

  ensure_directory(out_dir);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const BarSeries bars = market_data::generate_synthetic(specs[i], ticker_seed(seed, i));
    const fs::path path = out_dir / (specs[i].ticker + ".csv");
    market_data::write_csv(bars, path);
    log.info("wrote " + std::to_string(bars.bars.size()) + " bars to '" + path.string() + "'");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// screen
// ---------------------------------------------------------------------------

std::vector<int> parse_windows(const std::string& spec) {
  std::vector<int> windows;
  std::stringstream in(spec);
  std::string token;
  while (std::getline(in, token, ',')) {
    try {
      std::size_t used = 0;
      const int window = std::stoi(token, &used);
      if (used != token.size() || window <= 0) throw std::invalid_argument(token);
      windows.push_back(window);
    } catch (const std::exception&) {
      throw ConfigError("--windows", "expected comma-separated positive integers, got '" +
                                         spec + "'");
    }
  }
  if (windows.empty()) throw ConfigError("--windows", "expected at least one window");
  return windows;
}

int run_screen(const std::vector<fs::path>& inputs, const std::string& windows_spec,
               const std::string& returns_kind, const fs::path& out_dir, const Log& log) {
  const std::vector<int> windows = parse_windows(windows_spec);
  ReturnKind kind;
  if (returns_kind == "log")
    kind = ReturnKind::Log;
  else if (returns_kind == "simple")
    kind = ReturnKind::Simple;
  else
    throw ConfigError("--returns-kind", "expected 'log' or 'simple'");

  std::vector<market_data::KsResult> results;
  for (const fs::path& input : inputs) {
    const BarSeries series = market_data::ingest_csv(input, input.stem().string());
    const ReturnSeries returns = market_data::compute_returns(series, kind);
    const SignalSeries signal = market_data::low_close_signal(series);
    for (int window : windows) {
      results.push_back(market_data::ks_screen(returns, signal, window));
      log.debug(series.ticker + " window " + std::to_string(window) + ": statistic " +
                format_short(results.back().statistic));
    }
  }

  ensure_directory(out_dir);
  market_data::write_ks_csv(results, out_dir / "screen.csv");
  log.info("wrote " + std::to_string(results.size()) + " screen rows to '" +
           (out_dir / "screen.csv").string() + "'");
  return 0;
}

// ---------------------------------------------------------------------------
// indicators
// ---------------------------------------------------------------------------

std::vector<std::string> all_indicator_kinds() {
  std::vector<std::string> kinds = {"sma", "ema", "rsi", "bollinger", "stochastic_k", "mfi"};
  for (const std::string& kind : indicators::dispatch_kinds()) kinds.push_back(kind);
  return kinds;
}

int run_indicators(const fs::path& input, const std::string& kinds_spec,
                   const fs::path& out_dir, const Log& log) {
  std::vector<std::string> kinds;
  if (kinds_spec == "all") {
    kinds = all_indicator_kinds();
  } else {
    std::stringstream in(kinds_spec);
    std::string token;
    while (std::getline(in, token, ',')) kinds.push_back(token);
    const std::vector<std::string> known = all_indicator_kinds();
    for (const std::string& kind : kinds) {
      if (std::find(known.begin(), known.end(), kind) == known.end())
        throw ConfigError("--kinds", "unknown indicator kind '" + kind + "'");
    }
    if (kinds.empty()) throw ConfigError("--kinds", "expected at least one kind");
  }

  const BarSeries series = market_data::ingest_csv(input, input.stem().string());
  const std::vector<Date> dates = series.dates();
  const std::vector<double> closes = series.closes();

  ensure_directory(out_dir);
  for (const std::string& kind : kinds) {
    const auto params = indicators::default_params(kind);
    indicators::IndicatorSeries computed;
    if (kind == "sma")
      computed = indicators::sma(dates, closes, static_cast<int>(params.at("window")));
    else if (kind == "ema")
      computed = indicators::ema(dates, closes, static_cast<int>(params.at("window")));
    else if (kind == "rsi")
      computed = indicators::rsi(dates, closes, static_cast<int>(params.at("window")));
    else if (kind == "bollinger")
      computed = indicators::bollinger(dates, closes, static_cast<int>(params.at("window")),
                                       params.at("k"));
    else if (kind == "stochastic_k")
      computed = indicators::stochastic_k(series, static_cast<int>(params.at("window")));
    else if (kind == "mfi")
      computed = indicators::mfi(series, static_cast<int>(params.at("window")));
    else
      computed = indicators::compute_indicator(kind, series);

    const fs::path path = out_dir / (kind + ".csv");
    indicators::write_indicator_csv(computed, path);
    log.info("wrote '" + path.string() + "'");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// factor
// ---------------------------------------------------------------------------

void write_factor_panel_csv(std::ostream& out, const engine::FactorPanel& panel) {
  out << "date";
  for (const std::string& ticker : panel.tickers) out << ',' << ticker;
  out << '\n';
  for (std::size_t t = 0; t < panel.rows(); ++t) {
    out << panel.dates[t].to_string();
    for (std::size_t j = 0; j < panel.cols(); ++j) {
      const double value =
          panel.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j));
      out << ',';
      if (std::isfinite(value)) out << format_double(value);
    }
    out << '\n';
  }
}

void write_qq_csv(std::ostream& out, const engine::FactorAnalytics& analytics) {
  out << "horizon,theoretical,sample\n";
  for (const auto& [horizon, points] : analytics.ic_qq) {
    for (const auto& point : points) {
      out << horizon << ',' << format_double(point.theoretical) << ','
          << format_double(point.sample) << '\n';
    }
  }
}

int run_factor(const fs::path& config_path, const fs::path& out_dir, const Log& log) {
  const RunConfig config = parse_run_config(config_path);
  const std::vector<BarSeries> universe = load_universe(config, log);
  const engine::FactorPanel panel = build_factor(universe, config.factor);

  std::map<int, Eigen::MatrixXd> forward;
  for (int horizon : panel.horizons)
    forward[horizon] = engine::forward_return_panel(universe, panel, horizon);
  const engine::FactorAnalytics analytics = engine::factor_analysis(panel, forward);

  {
    auto out = open_output(out_dir, "factor.csv");
    write_factor_panel_csv(out, panel);
  }
  {
    auto out = open_output(out_dir, "ic.csv");
    engine::write_ic_csv(out, analytics);
  }
  {
    auto out = open_output(out_dir, "quantile_stats.csv");
    engine::write_quantile_stats_csv(out, analytics);
  }
  {
    auto out = open_output(out_dir, "ic_qq.csv");
    write_qq_csv(out, analytics);
  }
  for (const auto& series : analytics.ic_series)
    log.info("horizon " + std::to_string(series.horizon) + ": mean IC " +
             format_short(series.mean()) + " over " + std::to_string(series.values.size()) +
             " dates");
  return 0;
}

// ---------------------------------------------------------------------------
// backtest
// ---------------------------------------------------------------------------

int run_backtest_command(const fs::path& config_path, const fs::path& out_dir, const Log& log) {
  const RunConfig config = parse_run_config(config_path);
  const std::vector<BarSeries> universe = load_universe(config, log);
  const engine::FactorPanel panel = build_factor(universe, config.factor);

  const engine::BacktestReport report =
      engine::run_backtest(universe, panel, config.policy, config.backtest);

  {
    auto out = open_output(out_dir, "report.json");
    engine::write_report_json(out, report);
  }
  {
    auto out = open_output(out_dir, "equity.csv");
    engine::write_equity_csv(out, report);
  }
  {
    auto out = open_output(out_dir, "exposures.csv");
    engine::write_exposures_csv(out, report);
  }
  {
    auto out = open_output(out_dir, "rolling_vol.csv");
    engine::write_rolling_vol_csv(out, report);
  }
  {
    auto out = open_output(out_dir, "return_quantiles.csv");
    engine::write_return_quantiles_csv(out, report);
  }
  if (report.var.size() > 0) {
    auto out = open_output(out_dir, "var.csv");
    risk::write_var_csv(out, report.daily_returns, report.var, report.hits);
  }

  log.info("final equity " + format_short(report.equity.back()) + " over " +
           std::to_string(report.dates.size()) + " days");
  for (const std::string& flag : report.flags) log.info("flag: " + flag);
  return 0;
}

// ---------------------------------------------------------------------------
// vartest
// ---------------------------------------------------------------------------

ReturnSeries read_returns_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  ReturnSeries returns;
  returns.ticker = path.stem().string();
  returns.kind = ReturnKind::Simple;

  std::string line;
  if (!std::getline(in, line)) throw EmptySeriesError("'" + path.string() + "' is empty");
  if (line.rfind("date,", 0) != 0)
    throw MalformedRowError(1, "expected a header starting with 'date,'");

  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw MalformedRowError(line_number, "expected 'date,value'");
    try {
      returns.dates.push_back(Date::parse(line.substr(0, comma)));
      std::size_t used = 0;
      const std::string field = line.substr(comma + 1);
      returns.values.push_back(std::stod(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const Error&) {
      throw MalformedRowError(line_number, "bad date '" + line.substr(0, comma) + "'");
    } catch (const std::exception&) {
      throw MalformedRowError(line_number, "bad value in '" + line + "'");
    }
  }
  if (returns.values.empty())
    throw EmptySeriesError("'" + path.string() + "' has no return rows");
  return returns;
}

ordered_json test_to_json(const vartests::TestResult& test) {
  ordered_json item;
  item["name"] = test.name;
  item["statistic"] = test.statistic;
  item["df"] = test.df;
  item["p_value"] = test.p_value;
  item["reject_5pct"] = test.reject_5pct;
  item["components"] = ordered_json::object();
  for (const auto& [key, value] : test.components) item["components"][key] = value;
  item["flags"] = test.flags;
  return item;
}

int run_vartest(const fs::path& returns_path, double alpha, int window,
                const std::string& method, const std::string& side, const fs::path& out_dir,
                const Log& log) {
  risk::VarConfig config;
  config.alpha = alpha;
  config.window = window;
  try {
    config.method = risk::var_method_from_string(method);
    config.side = risk::side_from_string(side);
    risk::validate(config);
  } catch (const Error& e) {
    throw ConfigError("vartest flags", e.what());
  }

  const ReturnSeries returns = read_returns_csv(returns_path);
  const risk::VarSeries var = risk::rolling_var(returns, config);
  const risk::HitSequence hits = risk::hit_sequence(returns, var, config.side);
  log.info(std::to_string(hits.count()) + " violations over " + std::to_string(var.size()) +
           " evaluated days");

  ordered_json doc;
  doc["alpha"] = config.alpha;
  doc["window"] = config.window;
  doc["method"] = risk::to_string(config.method);
  doc["side"] = risk::to_string(config.side);
  doc["observations"] = var.size();
  doc["violations"] = hits.count();
  doc["degenerate_window"] = var.degenerate_window;
  doc["tests"] = ordered_json::array();

  const auto guarded = [&doc, &log](const std::string& name, auto&& run) {
    try {
      doc["tests"].push_back(test_to_json(run()));
    } catch (const Error& e) {
      // A test that cannot run on this sample still gets its block, so the
      // output always carries four entries in a fixed order.
      ordered_json item;
      item["name"] = name;
      item["error"] = e.what();
      doc["tests"].push_back(std::move(item));
      log.info("test '" + name + "' unavailable: " + e.what());
    }
  };
  guarded("uc", [&] { return vartests::uc_test(hits); });
  guarded("portmanteau", [&] { return vartests::independence_portmanteau(hits); });
  guarded("markov", [&] { return vartests::markov_test(hits); });
  guarded("geometric", [&] { return vartests::geometric_var_test(hits, var); });

  {
    auto out = open_output(out_dir, "tests.json");
    out << doc.dump(2) << '\n';
  }
  {
    auto out = open_output(out_dir, "var.csv");
    risk::write_var_csv(out, returns, var, hits);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

const json& report_key(const json& doc, const std::string& key) {
  const json* value = find_key(doc, key);
  if (value == nullptr) throw ConfigError("report." + key, "missing key");
  return *value;
}

int run_report(const fs::path& input, const fs::path& out_dir, const Log& log) {
  const json doc = load_json_file(input);
  require_object(doc, input.string());

  std::ostringstream text;
  text << "run summary\n";
  text << "===========\n";
  if (find_key(doc, "start_date") != nullptr) {
    text << "period            " << as_string(report_key(doc, "start_date"), "report.start_date")
         << " .. " << as_string(report_key(doc, "end_date"), "report.end_date") << " ("
         << as_integer(report_key(doc, "days"), "report.days") << " trading days)\n";
  }
  text << "initial capital   "
       << format_short(as_number(report_key(doc, "initial_capital"), "report.initial_capital"))
       << '\n';
  text << "final equity      "
       << format_short(as_number(report_key(doc, "final_equity"), "report.final_equity"))
       << '\n';
  text << "total commission  "
       << format_short(as_number(report_key(doc, "total_commission"), "report.total_commission"))
       << "\n\n";

  text << "metrics\n";
  const json& metrics = report_key(doc, "metrics");
  require_object(metrics, "report.metrics");
  for (const auto& [key, value] : metrics.items()) {
    text << "  " << key;
    for (std::size_t pad = key.size(); pad < 18; ++pad) text << ' ';
    text << format_short(as_number(value, "report.metrics." + key)) << '\n';
  }
  const auto flag_line = [&text, &doc](const std::string& key, const std::string& label) {
    const json& flags = report_key(doc, key);
    text << label;
    if (flags.empty()) {
      text << "none";
    } else {
      for (std::size_t i = 0; i < flags.size(); ++i)
        text << (i == 0 ? "" : ", ") << flags[i].get<std::string>();
    }
    text << '\n';
  };
  flag_line("metric_flags", "metric flags      ");
  flag_line("flags", "run flags         ");

  const json& var = report_key(doc, "var");
  text << "\nvar coverage      alpha "
       << format_short(as_number(report_key(var, "alpha"), "report.var.alpha")) << ", window "
       << as_integer(report_key(var, "window"), "report.var.window") << ", "
       << as_string(report_key(var, "method"), "report.var.method") << ", "
       << as_integer(report_key(var, "observations"), "report.var.observations")
       << " observations, "
       << as_integer(report_key(var, "violations"), "report.var.violations") << " violations\n";

  const json& table = report_key(doc, "max_var_by_size");
  if (!table.empty()) {
    text << "\nmax var by size\n";
    for (const auto& entry : table) {
      text << "  size " << format_short(as_number(report_key(entry, "size_pct"), "size_pct"))
           << "  max var "
           << format_short(as_number(report_key(entry, "max_var"), "max_var")) << '\n';
    }
  }

  const json& tests = report_key(doc, "tests");
  if (!tests.empty()) {
    text << "\ncoverage tests\n";
    for (const auto& test : tests) {
      const std::string name = as_string(report_key(test, "name"), "tests.name");
      text << "  " << name;
      for (std::size_t pad = name.size(); pad < 14; ++pad) text << ' ';
      text << "statistic " << format_short(as_number(report_key(test, "statistic"), "statistic"))
           << "  df " << as_integer(report_key(test, "df"), "df") << "  p "
           << format_short(as_number(report_key(test, "p_value"), "p_value")) << "  reject "
           << (report_key(test, "reject_5pct").get<bool>() ? "yes" : "no") << '\n';
    }
  }

  auto out = open_output(out_dir, "summary.txt");
  out << text.str();
  log.info("wrote '" + (out_dir / "summary.txt").string() + "'");
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Log log;
  log.err = &err;
  if (const char* env = std::getenv("SIZEBENCH_LOG")) {
    const std::string level = env;
    if (level == "error")
      log.level = 0;
    else if (level == "info")
      log.level = 1;
    else if (level == "debug")
      log.level = 2;
    else {
      err << "error: SIZEBENCH_LOG must be one of error, info, debug (got '" << level << "')\n";
      return 1;
    }
  }

  CLI::App app{"Research bench for position sizing, VaR backtesting and factor analysis"};
  app.name("sizebench");
  app.require_subcommand(1);

  std::string spec_path, config_path, input_path, out_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> screen_inputs;
  std::string windows = "5,10,20";
  std::string returns_kind = "log";
  std::string kinds = "all";
  double alpha = 0.05;
  int window = 250;
  std::string method = "parametric";
  std::string side = "long";

  CLI::App* generate =
      app.add_subcommand("generate", "Generate synthetic daily bars from a regime spec");
  generate->add_option("--spec", spec_path, "Regime spec JSON: {tickers: [{ticker, segments: [{days, drift, vol}], ...}]}")
      ->required();
  generate->add_option("--seed", seed, "Base seed; each ticker draws an independent stream")
      ->required();
  generate->add_option("--out", out_dir, "Output directory, one <ticker>.csv per entry")
      ->required();

  CLI::App* screen = app.add_subcommand(
      "screen", "Normality screen of signal-filtered returns against the standard normal");
  screen->add_option("--input", screen_inputs, "Daily bar CSV (repeatable)")->required();
  screen->add_option("--windows", windows, "Comma-separated rolling window sizes")
      ->capture_default_str();
  screen->add_option("--returns-kind", returns_kind, "Return kind: log or simple")
      ->capture_default_str();
  screen->add_option("--out", out_dir, "Output directory for screen.csv")->required();

  CLI::App* indicators_cmd =
      app.add_subcommand("indicators", "Compute technical indicators, one CSV per kind");
  indicators_cmd->add_option("--input", input_path, "Daily bar CSV")->required();
  indicators_cmd
      ->add_option("--kinds", kinds, "Comma-separated indicator kinds, or 'all'")
      ->capture_default_str();
  indicators_cmd->add_option("--out", out_dir, "Output directory, one <kind>.csv each")
      ->required();

  CLI::App* factor = app.add_subcommand(
      "factor", "Cross-sectional factor analytics: IC series, quantile buckets, QQ pairs");
  factor->add_option("--config", config_path, "Run config JSON (see backtest)")->required();
  factor->add_option("--out", out_dir,
                     "Output directory for factor.csv, ic.csv, quantile_stats.csv, ic_qq.csv")
      ->required();

  CLI::App* backtest =
      app.add_subcommand("backtest", "Run the daily long/short backtest from a run config");
  backtest
      ->add_option("--config", config_path,
                   "Run config JSON: {universe, policy, capital, commission_bps, rebalance, "
                   "var, seed, ...}; unknown keys are rejected")
      ->required();
  backtest
      ->add_option("--out", out_dir,
                   "Output directory for report.json, equity.csv, exposures.csv, "
                   "rolling_vol.csv, return_quantiles.csv, var.csv")
      ->required();

  CLI::App* vartest = app.add_subcommand(
      "vartest", "Rolling VaR plus the coverage test battery on a returns CSV");
  vartest->add_option("--returns", input_path, "Returns CSV with a 'date,<value>' header")
      ->required();
  vartest->add_option("--alpha", alpha, "VaR tail probability")->capture_default_str();
  vartest->add_option("--window", window, "Rolling estimation window in days")
      ->capture_default_str();
  vartest->add_option("--method", method, "Threshold method: parametric or historical")
      ->capture_default_str();
  vartest->add_option("--side", side, "Breach side: long or short")->capture_default_str();
  vartest->add_option("--out", out_dir, "Output directory for tests.json and var.csv")
      ->required();

  CLI::App* report =
      app.add_subcommand("report", "Render a backtest report.json as a plain-text summary");
  report->add_option("--input", input_path, "report.json produced by the backtest subcommand")
      ->required();
  report->add_option("--out", out_dir, "Output directory for summary.txt")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("sizebench");
  for (const std::string& arg : args) argv.push_back(arg.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (generate->parsed()) return run_generate(spec_path, seed, out_dir, log);
    if (screen->parsed()) {
      std::vector<fs::path> inputs(screen_inputs.begin(), screen_inputs.end());
      return run_screen(inputs, windows, returns_kind, out_dir, log);
    }
    if (indicators_cmd->parsed()) return run_indicators(input_path, kinds, out_dir, log);
    if (factor->parsed()) return run_factor(config_path, out_dir, log);
    if (backtest->parsed()) return run_backtest_command(config_path, out_dir, log);
    if (vartest->parsed())
      return run_vartest(input_path, alpha, window, method, side, out_dir, log);
    if (report->parsed()) return run_report(input_path, out_dir, log);
    throw UnknownSubcommandError("no subcommand selected");
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const UnknownSubcommandError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace sizebench::cli
