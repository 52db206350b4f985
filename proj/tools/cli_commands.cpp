#include "cli_commands.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <json.hpp>

#include "ivbound/benchmarks.hpp"
#include "ivbound/bounds.hpp"
#include "ivbound/dataset_io.hpp"
#include "ivbound/errors.hpp"
#include "ivbound/eval.hpp"
#include "ivbound/lp.hpp"
#include "ivbound/prior_gen.hpp"
#include "ivbound/rct2iv.hpp"
#include "ivbound/rng.hpp"

namespace ivbound::cli {

using nlohmann::json;

namespace {

// Whole-task worker pool with deterministic result ordering: task i writes
// slot i, regardless of which worker ran it.
void run_parallel(int count, int jobs, const std::function<void(int)>& task) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  const int n_workers = std::min(jobs, count);
  for (int w = 0; w < n_workers; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          task(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

json interval_json(double lower, double upper) {
  return json{{"lower", lower}, {"upper", upper}};
}

json summary_json(const MetricSummary& s) {
  json out;
  out["mean"] = s.mean;
  if (std::isnan(s.ste)) {
    out["ste"] = nullptr;
  } else {
    out["ste"] = s.ste;
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << "\n";
}

void emit_report(const RunContext& ctx, const std::filesystem::path& path, const json& report,
                 const std::string& csv) {
  if (ctx.format == "csv") {
    write_text(path, csv);
  } else {
    write_text(path, report.dump(2));
  }
  std::cout << "report: " << path.string() << "\n";
}

std::filesystem::path resolve_report_path(const RunContext& ctx,
                                          const std::filesystem::path& given,
                                          const std::string& fallback) {
  if (!given.empty()) return given;
  return ctx.out_dir / (fallback + (ctx.format == "csv" ? ".csv" : ".json"));
}

std::string label_summary(const IvDataset& ds) {
  if (!ds.labels) return "unlabeled";
  std::string out = "sate=" + format_double(ds.labels->sate);
  if (ds.labels->lower && ds.labels->upper) {
    out += " bounds=[" + format_double(*ds.labels->lower) + ", " +
           format_double(*ds.labels->upper) + "]";
  }
  return out;
}

GibbsConfig gibbs_with_seed(const GibbsConfig& base, std::uint64_t seed) {
  GibbsConfig cfg = base;
  cfg.seed = seed;
  return cfg;
}

// Estimates an interval for one dataset; the shared core of estimate/eval.
struct MethodRun {
  Interval interval{0.0, 0.0};
  std::size_t crossed_rows = 0;
};

MethodRun run_plugin(const IvDataset& ds, const std::string& model, const Stratification& strat,
                     const std::string& binarize) {
  const CondProbModelKind kind = condprob_kind_from_string(model);
  if (ds.binary_outcome()) {
    const auto sb = plugin_bounds(ds, kind, strat);
    return {sb.interval, sb.crossed_rows};
  }
  if (binarize.rfind("grid:", 0) == 0) {
    const int grid = std::stoi(binarize.substr(5));
    const auto sb = continuous_outcome_bounds(
        ds, [&](const IvDataset& b) { return fit_condprob_model(b, kind, strat); }, grid);
    return {sb.interval, sb.crossed_rows};
  }
  if (binarize == "median") {
    std::vector<double> ys(ds.y);
    std::nth_element(ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(ys.size() / 2), ys.end());
    const auto sb = plugin_bounds(binarize_at(ds, ys[ys.size() / 2]), kind, strat);
    return {sb.interval, sb.crossed_rows};
  }
  if (binarize.rfind("threshold:", 0) == 0) {
    const auto sb = plugin_bounds(binarize_at(ds, std::stod(binarize.substr(10))), kind, strat);
    return {sb.interval, sb.crossed_rows};
  }
  throw ConfigError(
      "plugin on a continuous outcome needs --binarize median|threshold:V|grid:J");
}

Interval run_bayes(const IvDataset& ds, const GibbsConfig& gibbs, double alpha,
                   const Stratification& strat, const std::string& binarize, int thresholds) {
  if (ds.binary_outcome()) return quantile_interval(gibbs_posterior(ds, gibbs, strat), alpha);
  if (binarize.rfind("grid:", 0) == 0)
    return gibbs_threshold_interval(ds, gibbs, alpha, std::stoi(binarize.substr(5)), strat);
  if (binarize == "median") {
    std::vector<double> ys(ds.y);
    std::nth_element(ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(ys.size() / 2), ys.end());
    return quantile_interval(gibbs_posterior(binarize_at(ds, ys[ys.size() / 2]), gibbs, strat),
                             alpha);
  }
  if (binarize.rfind("threshold:", 0) == 0)
    return quantile_interval(
        gibbs_posterior(binarize_at(ds, std::stod(binarize.substr(10))), gibbs, strat), alpha);
  if (thresholds >= 2) return gibbs_threshold_interval(ds, gibbs, alpha, thresholds, strat);
  throw ConfigError("bayes on a continuous outcome needs --binarize median|threshold:V|grid:J");
}

}  // namespace

Stratification parse_strat_spec(const std::string& spec) {
  Stratification strat;
  if (spec.empty()) return strat;
  std::size_t start = 0;
  while (start < spec.size()) {
    std::size_t end = spec.find(',', start);
    if (end == std::string::npos) end = spec.size();
    const std::string item = spec.substr(start, end - start);
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("bad stratification term '" + item + "', expected col:bins");
    try {
      strat.columns.push_back({static_cast<std::size_t>(std::stoul(item.substr(0, colon))),
                               std::stoi(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw ConfigError("bad stratification term '" + item + "', expected col:bins");
    }
    start = end + 1;
  }
  return strat;
}

int run_gen(const RunContext& ctx, const GenOptions& opt) {
  std::filesystem::create_directories(ctx.out_dir);
  std::vector<std::string> manifest(static_cast<std::size_t>(opt.count));

  const auto generate_one = [&](int i) {
    const std::uint64_t idx = static_cast<std::uint64_t>(i);
    StoredDataset stored;
    std::string stem;
    if (opt.target == "prior") {
      PriorDgpConfig cfg;
      cfg.n = opt.n;
      cfg.d_min = opt.d_min;
      cfg.d_max = opt.d_max;
      cfg.recenter.gamma = opt.gamma;
      cfg.recenter.enabled = !opt.no_recenter;
      const auto dgp = draw_dgp(stream_seed(ctx.seed, "gen-prior", idx, "dgp"), cfg);
      stored = sample_dataset(dgp, stream_seed(ctx.seed, "gen-prior", idx, "sample"));
      stem = "prior_" + std::to_string(i);
    } else if (opt.target == "binary") {
      BinaryBenchConfig cfg;
      cfg.n = opt.n;
      cfg.d_min = opt.d_min;
      cfg.d_max = opt.d_max;
      cfg.seed = stream_seed(ctx.seed, "gen-binary", idx, "dgp");
      stored = gen_binary_benchmark(cfg);
      stem = "binary_" + std::to_string(i);
    } else if (opt.target == "covfree") {
      CovfreeBenchConfig cfg;
      cfg.n = opt.n;
      cfg.alpha = opt.alpha;
      cfg.min_set_width = opt.min_set_width;
      cfg.complier_mass = opt.complier_mass;
      cfg.seed = stream_seed(ctx.seed, "gen-covfree", idx, "dgp");
      stored = gen_covfree_benchmark(cfg);
      stem = "covfree_" + std::to_string(i);
    } else if (opt.target == "calib") {
      CalibDgpConfig cfg;
      cfg.family = calib_family_from_string(opt.family);
      cfg.n = opt.n;
      cfg.d = opt.d;
      cfg.seed = stream_seed(ctx.seed, "gen-calib", idx, "dgp");
      stored.data = gen_calib_dgp(cfg).data;
      stem = "calib_" + opt.family + "_" + std::to_string(i);
    } else {
      throw ConfigError("unknown gen target: " + opt.target);
    }
    if (!opt.with_strata) stored.strata_probs.reset();
    const auto path = ctx.out_dir / (stem + ".csv");
    save_dataset(stored, path);
    manifest[static_cast<std::size_t>(i)] = path.string() + "  " + label_summary(stored.data);
  };

  run_parallel(opt.count, ctx.jobs, generate_one);
  for (const auto& line : manifest) std::cout << line << "\n";
  return 0;
}

int run_convert(const RunContext& ctx, const ConvertOptions& opt) {
  std::filesystem::create_directories(ctx.out_dir);
  const CsvTable csv = read_csv_table(opt.input);

  std::vector<double> betas = opt.beta_sweep.empty() ? std::vector<double>{opt.beta}
                                                     : opt.beta_sweep;
  std::vector<std::string> manifest(betas.size());

  const auto convert_one = [&](int i) {
    const double beta = betas[static_cast<std::size_t>(i)];
    const std::uint64_t seed =
        stream_seed(ctx.seed, "convert", static_cast<std::uint64_t>(i), "run");
    ConversionResult result;
    if (opt.preset == "jobs") {
      result = jobs_pipeline(csv, beta, seed);
    } else if (opt.preset == "star") {
      const StarContrast contrast = opt.star_contrast == "aide" ? StarContrast::aide_vs_regular
                                                                : StarContrast::small_vs_regular;
      const StarOutcome outcome =
          opt.star_outcome == "math" ? StarOutcome::math : StarOutcome::reading;
      result = star_pipeline(csv, contrast, outcome, beta, seed);
    } else if (opt.preset == "custom") {
      std::ifstream in(opt.config_path);
      if (!in) throw ConfigError("cannot open conversion config: " + opt.config_path.string());
      const std::string text((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
      ConversionConfig cfg = conversion_config_from_json(text);
      cfg.beta = beta;
      cfg.seed = seed;
      RctTable table;
      // Custom conversions expect the treatment in `treat` and outcome in `y`.
      const auto treat_col = csv.column_index("treat");
      const auto y_col = csv.column_index("y");
      if (!treat_col || !y_col)
        throw DataError("custom conversion needs 'treat' and 'y' columns");
      for (std::size_t c = 0; c < csv.columns.size(); ++c) {
        if (c == *treat_col || c == *y_col) continue;
        table.columns.push_back(csv.columns[c]);
      }
      table.n = csv.n_rows;
      for (std::size_t r = 0; r < csv.n_rows; ++r) {
        for (std::size_t c = 0; c < csv.columns.size(); ++c) {
          if (c == *treat_col || c == *y_col) continue;
          table.x.push_back(csv.at(r, c));
        }
        table.t_rct.push_back(csv.at(r, *treat_col) >= 0.5 ? 1 : 0);
        table.y.push_back(csv.at(r, *y_col));
      }
      result = convert(balance_arms(table, seed), cfg);
    } else {
      throw ConfigError("unknown preset: " + opt.preset);
    }

    const std::string tag = opt.preset + "_beta" + format_double(beta);
    const auto data_path = ctx.out_dir / (tag + ".csv");
    save_dataset({result.dataset, std::nullopt}, data_path);

    json report;
    report["n_input"] = result.report.n_input;
    report["n_accepted"] = result.report.n_accepted;
    report["acceptance_rate"] = result.report.acceptance_rate;
    report["rho_zt"] = result.report.rho_zt;
    report["pate_label_raw"] = result.report.pate_label;
    report["preservation_gap_raw"] = result.report.preservation_gap;
    report["b_z"] = result.report.b_z;
    report["b_t"] = result.report.b_t;
    report["beta"] = beta;
    json buckets = json::array();
    for (const auto& b : result.report.propensity_buckets) {
      buckets.push_back(
          {{"mean_pt", b.mean_pt}, {"empirical_t1", b.empirical_t1}, {"count", b.count}});
    }
    report["propensity_buckets"] = buckets;
    const auto report_path = ctx.out_dir / (tag + ".report.json");
    write_text(report_path, report.dump(2));
    manifest[static_cast<std::size_t>(i)] =
        data_path.string() + "  rho_zt=" + format_double(result.report.rho_zt);
  };

  run_parallel(static_cast<int>(betas.size()), ctx.jobs, convert_one);
  for (const auto& line : manifest) std::cout << line << "\n";
  return 0;
}

int run_bounds(const RunContext& ctx, const BoundsOptions& opt) {
  const StoredDataset stored = load_dataset(opt.input);
  const IvDataset& ds = stored.data;

  double lower = 0.0;
  double upper = 0.0;
  std::size_t crossed = 0;
  std::string source;

  if (stored.strata_probs) {
    source = "sidecar-strata";
    const auto& probs = *stored.strata_probs;
    for (const auto& row : probs) {
      const StrataDist q(std::span<const double>(row.data(), row.size()), kEstimatedSumTol);
      const auto p = strata_to_condprobs(q);
      if (opt.method == "lp") {
        const auto [mn, mx] = solve_min_max(p);
        if (mn.status != LpStatus::optimal) throw NumericError("bounds: LP infeasible on sidecar strata");
        lower += mn.value;
        upper += mx.value;
      } else {
        const auto cb = conditional_bounds(p);
        lower += cb.lower;
        upper += cb.upper;
      }
    }
    lower /= static_cast<double>(probs.size());
    upper /= static_cast<double>(probs.size());
  } else {
    source = "estimated-" + opt.model;
    if (!ds.binary_outcome())
      throw ConfigError("bounds on a continuous outcome: use estimate --method plugin --binarize");
    const auto model = fit_condprob_model(ds, condprob_kind_from_string(opt.model));
    if (opt.method == "lp") {
      if (model->covariate_free()) {
        const auto [mn, mx] = solve_min_max(model->score(ds.row(0)));
        if (mn.status != LpStatus::optimal) {
          lower = -1.0;
          upper = 1.0;
          crossed = ds.n;
        } else {
          lower = mn.value;
          upper = mx.value;
        }
      } else {
        for (std::size_t i = 0; i < ds.n; ++i) {
          const auto [mn, mx] = solve_min_max(model->score(ds.row(i)));
          if (mn.status != LpStatus::optimal) {
            lower += -1.0;
            upper += 1.0;
            ++crossed;
          } else {
            lower += mn.value;
            upper += mx.value;
          }
        }
        lower /= static_cast<double>(ds.n);
        upper /= static_cast<double>(ds.n);
      }
    } else {
      const auto sb = sate_bounds(ds, *model);
      lower = sb.interval.lower();
      upper = sb.interval.upper();
      crossed = sb.crossed_rows;
    }
  }

  json report;
  report["method"] = opt.method;
  report["source"] = source;
  report["interval"] = interval_json(lower, upper);
  report["crossed_rows"] = crossed;
  report["n"] = ds.n;
  report["input"] = opt.input.string();
  std::string csv = "method,source,lower,upper,crossed_rows\n" + opt.method + "," + source + "," +
                    format_double(lower) + "," + format_double(upper) + "," +
                    std::to_string(crossed) + "\n";
  emit_report(ctx, resolve_report_path(ctx, opt.report_path, "bounds"), report, csv);
  std::cout << "bounds [" << format_double(lower) << ", " << format_double(upper) << "]\n";
  return 0;
}

int run_estimate(const RunContext& ctx, const EstimateOptions& opt) {
  const StoredDataset stored = load_dataset(opt.input);
  const IvDataset& ds = stored.data;
  const Stratification strat = parse_strat_spec(opt.strat_spec);

  json report;
  report["input"] = opt.input.string();
  report["method"] = opt.method;
  report["n"] = ds.n;
  std::string csv_row;

  if (opt.method == "plugin") {
    const auto run = run_plugin(ds, opt.model, strat, opt.binarize);
    report["model"] = opt.model;
    report["interval"] = interval_json(run.interval.lower(), run.interval.upper());
    report["crossed_rows"] = run.crossed_rows;
    csv_row = "plugin," + format_double(run.interval.lower()) + "," +
              format_double(run.interval.upper());
    std::cout << "interval [" << format_double(run.interval.lower()) << ", "
              << format_double(run.interval.upper()) << "]\n";
  } else if (opt.method == "bayes") {
    const GibbsConfig gibbs =
        gibbs_with_seed(opt.gibbs, stream_seed(ctx.seed, "estimate", 0, "gibbs"));
    if (!ds.binary_outcome() && opt.binarize.empty())
      throw ConfigError("bayes on a continuous outcome needs --binarize median|threshold:V|grid:J");
    Interval interval{0.0, 0.0};
    if (ds.binary_outcome() && opt.emit_histogram) {
      const auto hist = gibbs_posterior(ds, gibbs, strat);
      interval = quantile_interval(hist, opt.alpha);
      report["histogram"] = {{"bins", hist.bins()},
                             {"n_samples", hist.n_samples},
                             {"mass", hist.bin_mass}};
    } else {
      interval = run_bayes(ds, gibbs, opt.alpha, strat, opt.binarize, 0);
    }
    report["alpha"] = opt.alpha;
    report["interval"] = interval_json(interval.lower(), interval.upper());
    report["chains"] = gibbs.n_chains;
    report["prior_concentration"] = gibbs.prior_concentration;
    csv_row = "bayes," + format_double(interval.lower()) + "," + format_double(interval.upper());
    std::cout << "interval [" << format_double(interval.lower()) << ", "
              << format_double(interval.upper()) << "]\n";
  } else {
    throw ConfigError("unknown estimate method: " + opt.method);
  }

  const std::string csv = "method,lower,upper\n" + csv_row + "\n";
  emit_report(ctx, resolve_report_path(ctx, opt.report_path, "estimate"), report, csv);
  return 0;
}

int run_eval(const RunContext& ctx, const EvalOptions& opt) {
  std::filesystem::create_directories(ctx.out_dir);
  const Stratification strat = parse_strat_spec(opt.strat_spec);

  const auto make_dataset = [&](int seed_idx) -> IvDataset {
    const std::uint64_t seed =
        stream_seed(ctx.seed, "eval", static_cast<std::uint64_t>(seed_idx), "dgp");
    if (opt.benchmark == "binary") {
      BinaryBenchConfig cfg;
      cfg.n = opt.n;
      cfg.seed = seed;
      return gen_binary_benchmark(cfg).data;
    }
    if (opt.benchmark == "covfree") {
      CovfreeBenchConfig cfg;
      cfg.n = opt.n;
      cfg.seed = seed;
      return gen_covfree_benchmark(cfg).data;
    }
    if (opt.benchmark == "prior") {
      PriorDgpConfig cfg;
      cfg.n = opt.n;
      const auto dgp = draw_dgp(seed, cfg);
      return sample_dataset(dgp, stream_seed(ctx.seed, "eval", static_cast<std::uint64_t>(seed_idx),
                                             "sample"))
          .data;
    }
    if (opt.benchmark.rfind("calib-", 0) == 0) {
      CalibDgpConfig cfg;
      cfg.family = calib_family_from_string(opt.benchmark.substr(6));
      cfg.n = opt.n;
      cfg.d = opt.d;
      cfg.seed = seed;
      return gen_calib_dgp(cfg).data;
    }
    throw ConfigError("unknown benchmark: " + opt.benchmark);
  };

  std::vector<EvalRecord> records;
  for (int s = 0; s < opt.seeds; ++s) {
    const IvDataset ds = make_dataset(s);
    if (!ds.labels) throw NumericError("eval: benchmark produced an unlabeled dataset");
    const bool has_bounds = ds.labels->lower && ds.labels->upper;

    for (const auto& method : opt.methods) {
      EvalRecord record;
      record.method = method;
      record.seed = stream_seed(ctx.seed, "eval", static_cast<std::uint64_t>(s), "dgp");
      Interval interval{0.0, 0.0};
      // Timing includes fitting and excludes dataset generation and I/O.
      if (method == "plugin") {
        const auto run_once = [&] {
          interval = run_plugin(ds, opt.model, strat, "grid:64").interval;
        };
        record.time_per_1k_s = timed_seconds_per_1k(run_once, ds.n);
      } else if (method == "bayes") {
        const GibbsConfig gibbs = gibbs_with_seed(
            opt.gibbs, stream_seed(ctx.seed, "eval", static_cast<std::uint64_t>(s), "gibbs"));
        const auto run_once = [&] {
          interval = run_bayes(ds, gibbs, opt.alpha_bayes, strat, "", 8);
        };
        record.time_per_1k_s = timed_seconds_per_1k(run_once, ds.n);
      } else {
        throw ConfigError("unknown method: " + method);
      }
      if (has_bounds) {
        record.validity = validity_true_bounds(interval,
                                               Interval(*ds.labels->lower, *ds.labels->upper));
        record.validity_kind = "true-bounds";
      } else {
        record.validity = validity_label(interval, ds.labels->sate);
        record.validity_kind = "label";
      }
      record.norm_width = norm_width(interval, 0.0, 1.0);
      record.lower = interval.lower();
      record.upper = interval.upper();
      records.push_back(std::move(record));
    }
  }

  const auto rows = aggregate(records);
  json report;
  report["benchmark"] = opt.benchmark;
  report["n"] = opt.n;
  report["seeds"] = opt.seeds;
  json aggregate_rows = json::array();
  std::string csv =
      "method,n_seeds,validity_mean,validity_ste,width_mean,width_ste,time_per_1k_mean,"
      "time_per_1k_ste\n";
  for (const auto& row : rows) {
    aggregate_rows.push_back({{"method", row.method},
                              {"n_seeds", row.n_seeds},
                              {"validity", summary_json(row.validity)},
                              {"width", summary_json(row.width)},
                              {"time_per_1k_s", summary_json(row.time_per_1k)}});
    csv += row.method + "," + std::to_string(row.n_seeds) + "," +
           format_double(row.validity.mean) + "," + format_double(row.validity.ste) + "," +
           format_double(row.width.mean) + "," + format_double(row.width.ste) + "," +
           format_double(row.time_per_1k.mean) + "," + format_double(row.time_per_1k.ste) + "\n";
    std::printf("%-10s validity %.2f +- %.2f  width %.3f +- %.3f  time/1k %.3fs\n",
                row.method.c_str(), row.validity.mean, row.validity.ste, row.width.mean,
                row.width.ste, row.time_per_1k.mean);
  }
  report["aggregate"] = aggregate_rows;
  json record_rows = json::array();
  for (const auto& r : records) {
    record_rows.push_back({{"method", r.method},
                           {"seed", r.seed},
                           {"validity", r.validity},
                           {"validity_kind", r.validity_kind},
                           {"norm_width", r.norm_width},
                           {"time_per_1k_s", r.time_per_1k_s},
                           {"interval", interval_json(r.lower, r.upper)}});
  }
  report["records"] = record_rows;
  emit_report(ctx, resolve_report_path(ctx, opt.report_path, "eval"), report, csv);
  return 0;
}

int run_sweep(const RunContext& ctx, const SweepOptions& opt) {
  std::filesystem::create_directories(ctx.out_dir);

  if (opt.kind == "strength") {
    const auto provider = [&](std::uint64_t seed) {
      return jobs_rct_table(make_synthetic_nsw_csv(opt.table_n, seed), seed);
    };
    const auto builder = [](double beta, std::uint64_t seed) { return jobs_preset(beta, seed); };
    const auto points = strength_sweep(provider, builder, opt.betas, opt.seeds, ctx.seed);
    json report;
    report["kind"] = "strength";
    json rows = json::array();
    std::string csv = "beta,rho_zt,analytic_width_mean,analytic_width_ste\n";
    for (const auto& p : points) {
      rows.push_back({{"beta", p.beta},
                      {"rho_zt", p.rho_zt_mean},
                      {"analytic_width", summary_json(p.analytic_width)}});
      csv += format_double(p.beta) + "," + format_double(p.rho_zt_mean) + "," +
             format_double(p.analytic_width.mean) + "," + format_double(p.analytic_width.ste) +
             "\n";
      std::printf("beta %-5g rho %.3f  width %.4f +- %.4f\n", p.beta, p.rho_zt_mean,
                  p.analytic_width.mean, p.analytic_width.ste);
    }
    report["points"] = rows;
    emit_report(ctx, resolve_report_path(ctx, opt.report_path, "sweep_strength"), report, csv);
    return 0;
  }

  if (opt.kind == "sensitivity") {
    std::vector<double> grid = opt.grid;
    if (grid.empty()) {
      grid = opt.axis == "n" ? std::vector<double>{256, 512, 1024, 2048, 4096}
                             : std::vector<double>{2, 4, 8, 16, 32};
    }
    const GibbsConfig gibbs_base = opt.gibbs;
    const double alpha = opt.alpha;
    IntervalEstimator estimator;
    SizedDgpSampler sampler;
    if (opt.axis == "n") {
      estimator = [gibbs_base, alpha](const IvDataset& ds, std::uint64_t seed) {
        return quantile_interval(gibbs_posterior(ds, gibbs_with_seed(gibbs_base, seed)), alpha);
      };
      sampler = [](double n, std::uint64_t seed) {
        CovfreeBenchConfig cfg;
        cfg.n = static_cast<std::size_t>(n);
        cfg.complier_mass = 0.7;
        cfg.seed = seed;
        return gen_covfree_benchmark(cfg).data;
      };
    } else if (opt.axis == "d") {
      estimator = [gibbs_base, alpha](const IvDataset& ds, std::uint64_t seed) {
        Stratification strat;
        strat.columns = {{0, 2}};
        return quantile_interval(gibbs_posterior(ds, gibbs_with_seed(gibbs_base, seed), strat),
                                 alpha);
      };
      sampler = [&](double d, std::uint64_t seed) {
        MixedComplianceConfig cfg;
        cfg.n = opt.n;
        cfg.d = static_cast<std::size_t>(d);
        cfg.seed = seed;
        return gen_mixed_compliance_benchmark(cfg).data;
      };
    } else {
      throw ConfigError("sweep sensitivity --axis must be n or d");
    }
    const auto cells = sensitivity_sweep(estimator, sampler, grid, opt.seeds, ctx.seed);
    json report;
    report["kind"] = "sensitivity";
    report["axis"] = opt.axis;
    report["alpha"] = alpha;
    json rows = json::array();
    std::string csv = "axis_value,coverage,width_mean,width_ste\n";
    for (const auto& c : cells) {
      rows.push_back({{"axis_value", c.axis_value},
                      {"coverage", c.coverage},
                      {"width", summary_json(c.width)}});
      csv += format_double(c.axis_value) + "," + format_double(c.coverage) + "," +
             format_double(c.width.mean) + "," + format_double(c.width.ste) + "\n";
      std::printf("%s=%-6g coverage %.3f  width %.3f +- %.3f\n", opt.axis.c_str(), c.axis_value,
                  c.coverage, c.width.mean, c.width.ste);
    }
    report["cells"] = rows;
    emit_report(ctx, resolve_report_path(ctx, opt.report_path, "sweep_sensitivity"), report, csv);
    return 0;
  }

  if (opt.kind == "calibration") {
    std::vector<double> levels;
    for (int i = 0; i < opt.levels; ++i)
      levels.push_back(0.01 + (0.995 - 0.01) * i / (opt.levels - 1));
    const GibbsConfig gibbs_base = opt.gibbs;
    const int thresholds = opt.thresholds;
    const Stratification strat = {};
    HistogramEstimator estimator = [gibbs_base, thresholds, strat](const IvDataset& ds,
                                                                   std::uint64_t seed) {
      const GibbsConfig gibbs = gibbs_with_seed(gibbs_base, seed);
      if (ds.binary_outcome()) return gibbs_posterior(ds, gibbs, strat);
      return gibbs_threshold_histogram(ds, gibbs, thresholds, strat);
    };
    DgpSampler sampler;
    if (opt.family == "covfree") {
      sampler = [&](std::uint64_t seed) {
        CovfreeBenchConfig cfg;
        cfg.n = opt.n;
        cfg.seed = seed;
        return gen_covfree_benchmark(cfg).data;
      };
    } else {
      sampler = [&](std::uint64_t seed) {
        CalibDgpConfig cfg;
        cfg.family = calib_family_from_string(opt.family);
        cfg.n = opt.n;
        cfg.d = opt.d;
        cfg.seed = seed;
        return gen_calib_dgp(cfg).data;
      };
    }
    const auto points = calibration_curve(estimator, sampler, levels, opt.k_datasets, ctx.seed);
    json report;
    report["kind"] = "calibration";
    report["family"] = opt.family;
    report["k_datasets"] = opt.k_datasets;
    json rows = json::array();
    std::string csv = "level,coverage\n";
    for (const auto& p : points) {
      rows.push_back({{"level", p.level}, {"coverage", p.coverage}});
      csv += format_double(p.level) + "," + format_double(p.coverage) + "\n";
    }
    report["points"] = rows;
    emit_report(ctx, resolve_report_path(ctx, opt.report_path, "sweep_calibration"), report, csv);
    std::printf("calibration curve over %zu levels written\n", points.size());
    return 0;
  }

  throw ConfigError("unknown sweep kind: " + opt.kind);
}

}  // namespace ivbound::cli
