#include "ivbound/rct2iv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ivbound/errors.hpp"
#include "ivbound/rng.hpp"

namespace ivbound {

using nlohmann::json;

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

struct ColumnStats {
  double mean = 0.0;
  double sd = 1.0;
};

ColumnStats column_stats(const RctTable& table, std::size_t col) {
  ColumnStats st;
  const double n = static_cast<double>(table.n);
  double mean = 0.0;
  for (std::size_t i = 0; i < table.n; ++i) mean += table.at(i, col);
  mean /= n;
  double var = 0.0;
  for (std::size_t i = 0; i < table.n; ++i) {
    const double d = table.at(i, col) - mean;
    var += d * d;
  }
  st.mean = mean;
  st.sd = std::sqrt(var / n);
  return st;
}

struct ResolvedTerm {
  PropensityTerm::Kind kind;
  std::size_t a = 0;
  std::size_t b = 0;
  double coef = 0.0;
  ColumnStats stats_a;
  ColumnStats stats_b;
};

std::vector<ResolvedTerm> resolve_terms(const PropensitySpec& spec, const RctTable& table,
                                        const std::set<std::string>& allowed, const char* what) {
  std::vector<ResolvedTerm> out;
  for (const auto& term : spec.terms) {
    ResolvedTerm r;
    r.kind = term.kind;
    r.coef = term.coef;
    if (!allowed.count(term.col_a)) {
      throw DataError(std::string(what) + ": column '" + term.col_a +
                      "' is not in the allowed covariate set");
    }
    r.a = table.require_column(term.col_a);
    r.stats_a = column_stats(table, r.a);
    if (term.kind == PropensityTerm::Kind::product) {
      if (!allowed.count(term.col_b)) {
        throw DataError(std::string(what) + ": column '" + term.col_b +
                        "' is not in the allowed covariate set");
      }
      r.b = table.require_column(term.col_b);
      r.stats_b = column_stats(table, r.b);
    }
    out.push_back(r);
  }
  return out;
}

double zscore(double v, const ColumnStats& st) {
  return st.sd == 0.0 ? 0.0 : (v - st.mean) / st.sd;
}

double eval_score(const RctTable& table, std::size_t row, const std::vector<ResolvedTerm>& terms) {
  double acc = 0.0;
  for (const auto& t : terms) {
    const double a = zscore(table.at(row, t.a), t.stats_a);
    switch (t.kind) {
      case PropensityTerm::Kind::linear: acc += t.coef * a; break;
      case PropensityTerm::Kind::square: acc += t.coef * a * a; break;
      case PropensityTerm::Kind::tanh_linear: acc += t.coef * std::tanh(a); break;
      case PropensityTerm::Kind::product:
        acc += t.coef * a * zscore(table.at(row, t.b), t.stats_b);
        break;
    }
  }
  return acc;
}

// Monotone-in-b mean propensity; bisection hits the target mean.
template <typename MeanFn>
double calibrate_intercept(const MeanFn& mean_at, double target) {
  double lo = -40.0, hi = 40.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mean_at(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13) break;
  }
  return 0.5 * (lo + hi);
}

std::string kind_to_string(PropensityTerm::Kind k) {
  switch (k) {
    case PropensityTerm::Kind::linear: return "linear";
    case PropensityTerm::Kind::square: return "square";
    case PropensityTerm::Kind::product: return "product";
    case PropensityTerm::Kind::tanh_linear: return "tanh_linear";
  }
  return "?";
}

PropensityTerm::Kind kind_from_string(const std::string& s) {
  if (s == "linear") return PropensityTerm::Kind::linear;
  if (s == "square") return PropensityTerm::Kind::square;
  if (s == "product") return PropensityTerm::Kind::product;
  if (s == "tanh_linear") return PropensityTerm::Kind::tanh_linear;
  throw ConfigError("unknown propensity term kind: " + s);
}

json spec_to_json(const PropensitySpec& spec) {
  json terms = json::array();
  for (const auto& t : spec.terms) {
    json jt;
    jt["kind"] = kind_to_string(t.kind);
    jt["col"] = t.col_a;
    if (t.kind == PropensityTerm::Kind::product) jt["col_b"] = t.col_b;
    jt["coef"] = t.coef;
    terms.push_back(jt);
  }
  return json{{"terms", terms}, {"intercept", spec.intercept},
              {"clip", {spec.clip_lo, spec.clip_hi}}};
}

PropensitySpec spec_from_json(const json& j) {
  PropensitySpec spec;
  for (const auto& jt : j.at("terms")) {
    PropensityTerm t;
    t.kind = kind_from_string(jt.at("kind").get<std::string>());
    t.col_a = jt.at("col").get<std::string>();
    if (jt.contains("col_b")) t.col_b = jt["col_b"].get<std::string>();
    t.coef = jt.at("coef").get<double>();
    spec.terms.push_back(t);
  }
  spec.intercept = j.value("intercept", 0.0);
  if (j.contains("clip")) {
    spec.clip_lo = j["clip"][0].get<double>();
    spec.clip_hi = j["clip"][1].get<double>();
  }
  return spec;
}

}  // namespace

std::size_t RctTable::require_column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw DataError("missing column: " + name);
}

ConversionConfig conversion_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("conversion config: ") + e.what());
  }
  ConversionConfig cfg;
  cfg.observed_cols = j.at("observed").get<std::vector<std::string>>();
  cfg.hidden_cols = j.at("hidden").get<std::vector<std::string>>();
  cfg.pz = spec_from_json(j.at("pz"));
  cfg.pt = spec_from_json(j.at("pt"));
  cfg.beta = j.value("beta", 1.0);
  cfg.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("target_mean_z")) cfg.target_mean_z = j["target_mean_z"].get<double>();
  if (j.contains("target_mean_t")) cfg.target_mean_t = j["target_mean_t"].get<double>();
  return cfg;
}

std::string conversion_config_to_json(const ConversionConfig& cfg) {
  json j;
  j["observed"] = cfg.observed_cols;
  j["hidden"] = cfg.hidden_cols;
  j["pz"] = spec_to_json(cfg.pz);
  j["pt"] = spec_to_json(cfg.pt);
  j["beta"] = cfg.beta;
  j["seed"] = cfg.seed;
  if (cfg.target_mean_z) j["target_mean_z"] = *cfg.target_mean_z;
  if (cfg.target_mean_t) j["target_mean_t"] = *cfg.target_mean_t;
  return j.dump(2);
}

RctTable balance_arms(const RctTable& table, std::uint64_t seed) {
  std::vector<std::size_t> arm0, arm1;
  for (std::size_t i = 0; i < table.n; ++i) (table.t_rct[i] ? arm1 : arm0).push_back(i);
  if (arm0.empty() || arm1.empty()) throw DataError("balance_arms: single-arm input");
  RandomStream stream(seed);

  std::vector<std::size_t> keep;
  if (arm0.size() == arm1.size()) {
    keep.resize(table.n);
    for (std::size_t i = 0; i < table.n; ++i) keep[i] = i;
  } else {
    auto& larger = arm0.size() > arm1.size() ? arm0 : arm1;
    const auto& smaller = arm0.size() > arm1.size() ? arm1 : arm0;
    const auto chosen = stream.sample_without_replacement(larger.size(), smaller.size());
    std::vector<std::size_t> kept_larger;
    kept_larger.reserve(chosen.size());
    for (std::size_t k : chosen) kept_larger.push_back(larger[k]);
    keep = smaller;
    keep.insert(keep.end(), kept_larger.begin(), kept_larger.end());
    std::sort(keep.begin(), keep.end());
  }

  RctTable out;
  out.columns = table.columns;
  out.n = keep.size();
  const std::size_t w = table.columns.size();
  out.x.reserve(out.n * w);
  for (std::size_t i : keep) {
    for (std::size_t j = 0; j < w; ++j) out.x.push_back(table.at(i, j));
    out.t_rct.push_back(table.t_rct[i]);
    out.y.push_back(table.y[i]);
  }
  return out;
}

namespace {

struct PreparedConversion {
  std::vector<ResolvedTerm> z_terms;
  std::vector<ResolvedTerm> t_terms;
  double b_z = 0.0;
  double b_t = 0.0;
  std::vector<double> s_z;  // scores without intercepts
  std::vector<double> s_t;
  std::vector<double> p_z;  // clipped instrument propensities
};

PreparedConversion prepare(const RctTable& table, const ConversionConfig& cfg) {
  if (table.n == 0) throw DataError("convert: empty table");
  for (const auto& c : cfg.observed_cols) table.require_column(c);
  for (const auto& c : cfg.hidden_cols) table.require_column(c);
  std::set<std::string> observed(cfg.observed_cols.begin(), cfg.observed_cols.end());
  for (const auto& c : cfg.hidden_cols) {
    if (observed.count(c)) throw ConfigError("convert: column '" + c + "' is both observed and hidden");
  }
  std::set<std::string> all = observed;
  all.insert(cfg.hidden_cols.begin(), cfg.hidden_cols.end());

  PreparedConversion prep;
  prep.z_terms = resolve_terms(cfg.pz, table, observed, "pz");
  prep.t_terms = resolve_terms(cfg.pt, table, all, "pt");

  prep.s_z.resize(table.n);
  prep.s_t.resize(table.n);
  for (std::size_t i = 0; i < table.n; ++i) {
    prep.s_z[i] = eval_score(table, i, prep.z_terms) + cfg.pz.intercept;
    prep.s_t[i] = eval_score(table, i, prep.t_terms) + cfg.pt.intercept;
  }

  const double target_z = cfg.target_mean_z.value_or(0.5);
  prep.b_z = calibrate_intercept(
      [&](double b) {
        double m = 0.0;
        for (double s : prep.s_z) m += clip(sigmoid(s + b), cfg.pz.clip_lo, cfg.pz.clip_hi);
        return m / static_cast<double>(table.n);
      },
      target_z);

  prep.p_z.resize(table.n);
  for (std::size_t i = 0; i < table.n; ++i)
    prep.p_z[i] = clip(sigmoid(prep.s_z[i] + prep.b_z), cfg.pz.clip_lo, cfg.pz.clip_hi);

  // The treatment intercept is calibrated against the analytic expectation
  // over the instrument so it does not depend on the realized z draws.
  const double target_t = cfg.target_mean_t.value_or(0.5);
  prep.b_t = calibrate_intercept(
      [&](double b) {
        double m = 0.0;
        for (std::size_t i = 0; i < table.n; ++i) {
          const double p1 = clip(sigmoid(prep.s_t[i] + cfg.beta + b), cfg.pt.clip_lo, cfg.pt.clip_hi);
          const double p0 = clip(sigmoid(prep.s_t[i] + b), cfg.pt.clip_lo, cfg.pt.clip_hi);
          m += prep.p_z[i] * p1 + (1.0 - prep.p_z[i]) * p0;
        }
        return m / static_cast<double>(table.n);
      },
      target_t);
  return prep;
}

}  // namespace

ConversionResult convert(const RctTable& table, const ConversionConfig& cfg) {
  const PreparedConversion prep = prepare(table, cfg);
  RandomStream root(cfg.seed);
  RandomStream z_stream = root.split("instrument");
  RandomStream t_stream = root.split("treatment");

  // The instrument draws consume only observed-column information, so tables
  // differing in hidden columns receive identical z sequences.
  std::vector<std::uint8_t> z(table.n);
  for (std::size_t i = 0; i < table.n; ++i) z[i] = z_stream.bernoulli(prep.p_z[i]) ? 1 : 0;

  std::vector<double> p_t(table.n);
  std::vector<std::uint8_t> accept(table.n);
  for (std::size_t i = 0; i < table.n; ++i) {
    p_t[i] = clip(sigmoid(prep.s_t[i] + cfg.beta * z[i] + prep.b_t), cfg.pt.clip_lo, cfg.pt.clip_hi);
    const int t_synth = t_stream.bernoulli(p_t[i]) ? 1 : 0;
    accept[i] = t_synth == table.t_rct[i] ? 1 : 0;
  }

  ConversionResult result;
  ConversionReport& report = result.report;
  report.n_input = table.n;
  report.b_z = prep.b_z;
  report.b_t = prep.b_t;

  // RCT difference-in-means on the full input table (raw outcome units).
  {
    double sum1 = 0.0, sum0 = 0.0;
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t i = 0; i < table.n; ++i) {
      if (table.t_rct[i]) {
        sum1 += table.y[i];
        ++n1;
      } else {
        sum0 += table.y[i];
        ++n0;
      }
    }
    if (n1 == 0 || n0 == 0) throw DataError("convert: single-arm input");
    report.pate_label = sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);
  }

  std::vector<std::size_t> observed_idx;
  for (const auto& c : cfg.observed_cols) observed_idx.push_back(table.require_column(c));

  IvDataset& ds = result.dataset;
  ds.d = observed_idx.size();
  ds.seed = cfg.seed;
  ds.provenance = "rct2iv";
  for (std::size_t i = 0; i < table.n; ++i) {
    if (!accept[i]) continue;
    for (std::size_t j : observed_idx) ds.x.push_back(table.at(i, j));
    ds.z.push_back(z[i]);
    ds.t.push_back(table.t_rct[i]);
    ds.y.push_back(table.y[i]);
    result.accepted_p_t.push_back(p_t[i]);
    result.accepted_t.push_back(table.t_rct[i]);
    ++ds.n;
  }
  if (ds.n == 0) throw DataError("convert: no rows accepted");
  report.n_accepted = ds.n;
  report.acceptance_rate = static_cast<double>(ds.n) / static_cast<double>(table.n);

  {
    std::vector<double> zv(ds.n), tv(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) {
      zv[i] = ds.z[i];
      tv[i] = ds.t[i];
    }
    report.rho_zt = pearson(zv, tv);
  }

  // Inverse-propensity estimate of the accepted-population effect using the
  // known synthetic propensities; the gap against the RCT label is the
  // preservation diagnostic.
  {
    double w1 = 0.0, s1 = 0.0, w0 = 0.0, s0 = 0.0;
    for (std::size_t i = 0; i < ds.n; ++i) {
      const double p = result.accepted_p_t[i];
      if (result.accepted_t[i]) {
        w1 += 1.0 / p;
        s1 += ds.y[i] / p;
      } else {
        w0 += 1.0 / (1.0 - p);
        s0 += ds.y[i] / (1.0 - p);
      }
    }
    if (w1 > 0.0 && w0 > 0.0) {
      report.preservation_gap = std::abs(s1 / w1 - s0 / w0 - report.pate_label);
    }
  }

  report.propensity_buckets = propensity_preservation_check(result.accepted_p_t, result.accepted_t);

  ds.rescale_outcome_to_unit();
  DatasetLabels labels;
  labels.sate = report.pate_label / ds.y_scale.range();
  ds.labels = labels;
  return result;
}

std::vector<PropensityBucket> propensity_preservation_check(const std::vector<double>& p_t,
                                                            const std::vector<std::uint8_t>& t,
                                                            int n_buckets) {
  if (p_t.size() != t.size() || p_t.empty())
    throw std::invalid_argument("propensity_preservation_check: size mismatch");
  std::vector<std::size_t> order(p_t.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return p_t[a] < p_t[b] || (p_t[a] == p_t[b] && a < b);
  });

  std::vector<PropensityBucket> buckets;
  const std::size_t n = order.size();
  for (int b = 0; b < n_buckets; ++b) {
    const std::size_t lo = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(n_buckets);
    const std::size_t hi = n * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(n_buckets);
    if (hi <= lo) continue;
    PropensityBucket bucket;
    bucket.count = hi - lo;
    for (std::size_t k = lo; k < hi; ++k) {
      bucket.mean_pt += p_t[order[k]];
      bucket.empirical_t1 += t[order[k]];
    }
    bucket.mean_pt /= static_cast<double>(bucket.count);
    bucket.empirical_t1 /= static_cast<double>(bucket.count);
    buckets.push_back(bucket);
  }
  return buckets;
}

CondProbs analytic_converted_condprobs(const RctTable& table, const ConversionConfig& cfg,
                                       double threshold) {
  const PreparedConversion prep = prepare(table, cfg);
  std::array<double, 8> mass{};
  for (std::size_t i = 0; i < table.n; ++i) {
    const int y = table.y[i] >= threshold ? 1 : 0;
    const int t = table.t_rct[i];
    for (int z = 0; z < 2; ++z) {
      const double wz = z ? prep.p_z[i] : 1.0 - prep.p_z[i];
      const double pt =
          clip(sigmoid(prep.s_t[i] + cfg.beta * z + prep.b_t), cfg.pt.clip_lo, cfg.pt.clip_hi);
      const double acc = t ? pt : 1.0 - pt;
      mass[CondProbs::flat_index(y, t, z)] += wz * acc;
    }
  }
  double slice[2] = {0.0, 0.0};
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int t = 0; t < 2; ++t) slice[z] += mass[CondProbs::flat_index(y, t, z)];
  std::array<double, 8> p{};
  for (int z = 0; z < 2; ++z) {
    if (slice[z] <= 0.0) throw NumericError("analytic_converted_condprobs: empty z slice");
    for (int y = 0; y < 2; ++y)
      for (int t = 0; t < 2; ++t) {
        const auto k = CondProbs::flat_index(y, t, z);
        p[k] = mass[k] / slice[z];
      }
  }
  return CondProbs(p, kEstimatedSumTol);
}

// ---- Presets ----------------------------------------------------------------

ConversionConfig jobs_preset(double beta, std::uint64_t seed) {
  ConversionConfig cfg;
  cfg.observed_cols = {"age", "education", "black", "hispanic", "married", "nodegree"};
  cfg.hidden_cols = {"re74", "re75"};
  cfg.pz.terms = {
      {PropensityTerm::Kind::linear, "age", "", 0.5},
      {PropensityTerm::Kind::square, "age", "", -0.3},
      {PropensityTerm::Kind::tanh_linear, "education", "", 0.6},
      {PropensityTerm::Kind::linear, "married", "", 0.4},
      {PropensityTerm::Kind::product, "black", "married", 0.3},
      {PropensityTerm::Kind::linear, "nodegree", "", -0.4},
  };
  cfg.pt.terms = {
      {PropensityTerm::Kind::linear, "re74", "", -0.9},
      {PropensityTerm::Kind::linear, "re75", "", -0.9},
      {PropensityTerm::Kind::tanh_linear, "age", "", 0.3},
      {PropensityTerm::Kind::linear, "education", "", 0.2},
      {PropensityTerm::Kind::linear, "nodegree", "", -0.3},
  };
  cfg.beta = beta;
  cfg.seed = seed;
  return cfg;
}

RctTable jobs_rct_table(const CsvTable& csv, std::uint64_t seed) {
  const std::vector<std::string> required = {"age",      "education", "black", "hispanic", "married",
                                             "nodegree", "re74",      "re75",  "re78",     "treat"};
  std::vector<std::string> missing;
  for (const auto& c : required) {
    if (!csv.column_index(c)) missing.push_back(c);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "jobs_pipeline: missing columns:";
    for (const auto& c : missing) msg << " " << c;
    throw DataError(msg.str());
  }

  RctTable table;
  table.columns = {"age", "education", "black", "hispanic", "married", "nodegree", "re74", "re75"};
  table.n = csv.n_rows;
  const auto idx = [&](const std::string& name) { return *csv.column_index(name); };
  for (std::size_t i = 0; i < csv.n_rows; ++i) {
    for (const auto& c : table.columns) {
      double v = csv.at(i, idx(c));
      if (c == "re74" || c == "re75") v = std::log1p(v);
      table.x.push_back(v);
    }
    table.t_rct.push_back(csv.at(i, idx("treat")) >= 0.5 ? 1 : 0);
    table.y.push_back(std::log1p(csv.at(i, idx("re78"))));
  }
  return balance_arms(table, seed);
}

ConversionResult jobs_pipeline(const CsvTable& csv, double beta, std::uint64_t seed) {
  RandomStream root(seed);
  const RctTable balanced = jobs_rct_table(csv, root.split("balance").seed());
  ConversionConfig cfg = jobs_preset(beta, root.split("convert").seed());
  ConversionResult result = convert(balanced, cfg);
  result.dataset.provenance = "jobs";
  return result;
}

ConversionConfig star_preset(double beta, std::uint64_t seed) {
  ConversionConfig cfg;
  cfg.observed_cols = {"gender",        "birth_quarter", "ethnicity",
                       "entry_grade",   "teacher_degree", "career_ladder"};
  cfg.hidden_cols = {"school_type", "free_lunch", "teacher_ethnicity", "teacher_experience"};
  cfg.pz.terms = {
      {PropensityTerm::Kind::linear, "gender", "", 0.3},
      {PropensityTerm::Kind::tanh_linear, "birth_quarter", "", 0.4},
      {PropensityTerm::Kind::linear, "ethnicity", "", -0.3},
      {PropensityTerm::Kind::square, "entry_grade", "", 0.2},
      {PropensityTerm::Kind::linear, "teacher_degree", "", 0.4},
      {PropensityTerm::Kind::linear, "career_ladder", "", 0.2},
  };
  cfg.pt.terms = {
      {PropensityTerm::Kind::linear, "free_lunch", "", -0.8},
      {PropensityTerm::Kind::linear, "school_type", "", 0.5},
      {PropensityTerm::Kind::linear, "teacher_experience", "", 0.4},
      {PropensityTerm::Kind::tanh_linear, "teacher_ethnicity", "", 0.3},
      {PropensityTerm::Kind::linear, "gender", "", 0.2},
  };
  cfg.beta = beta;
  cfg.seed = seed;
  return cfg;
}

RctTable star_rct_table(const CsvTable& csv, StarContrast contrast, StarOutcome outcome) {
  const std::vector<std::string> required = {
      "student_id", "grade",          "class_type",    "reading",
      "math",       "gender",         "birth_quarter", "ethnicity",
      "teacher_degree", "career_ladder", "school_type", "free_lunch",
      "teacher_ethnicity", "teacher_experience"};
  std::vector<std::string> missing;
  for (const auto& c : required) {
    if (!csv.column_index(c)) missing.push_back(c);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "star_pipeline: missing columns:";
    for (const auto& c : missing) msg << " " << c;
    throw DataError(msg.str());
  }
  const auto idx = [&](const std::string& name) { return *csv.column_index(name); };

  // Entry-grade snapshot: earliest grade with an observed class type per student.
  std::map<long long, std::size_t> snapshot;
  for (std::size_t i = 0; i < csv.n_rows; ++i) {
    const double ct = csv.at(i, idx("class_type"));
    if (!(ct >= 1.0 && ct <= 3.0)) continue;
    const long long sid = static_cast<long long>(csv.at(i, idx("student_id")));
    const auto it = snapshot.find(sid);
    if (it == snapshot.end() || csv.at(i, idx("grade")) < csv.at(it->second, idx("grade"))) {
      snapshot[sid] = i;
    }
  }

  const int treat_code = contrast == StarContrast::small_vs_regular ? 1 : 3;
  const int control_code = 2;
  const std::string score_col = outcome == StarOutcome::math ? "math" : "reading";

  struct Row {
    std::size_t csv_row;
    int grade;
    std::uint8_t t;
    double score;
  };
  std::vector<Row> rows;
  for (const auto& [sid, i] : snapshot) {
    const int ct = static_cast<int>(csv.at(i, idx("class_type")));
    if (ct != treat_code && ct != control_code) continue;
    const double score = csv.at(i, idx(score_col));
    if (std::isnan(score)) continue;
    rows.push_back({i, static_cast<int>(csv.at(i, idx("grade"))), ct == treat_code ? std::uint8_t{1} : std::uint8_t{0}, score});
  }
  if (rows.empty()) throw DataError("star_pipeline: no rows for the requested contrast");
  {
    bool has1 = false, has0 = false;
    for (const auto& r : rows) (r.t ? has1 : has0) = true;
    if (!has1 || !has0) throw DataError("star_pipeline: empty contrast arm");
  }

  // Standardize the score within entry grade.
  std::map<int, std::pair<double, double>> grade_stats;  // grade -> (mean, sd)
  {
    std::map<int, std::vector<double>> by_grade;
    for (const auto& r : rows) by_grade[r.grade].push_back(r.score);
    for (const auto& [g, vals] : by_grade) {
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(vals.size()));
      grade_stats[g] = {mean, sd == 0.0 ? 1.0 : sd};
    }
  }

  RctTable table;
  table.columns = {"gender",       "birth_quarter",    "ethnicity",          "entry_grade",
                   "teacher_degree", "career_ladder",  "school_type",        "free_lunch",
                   "teacher_ethnicity", "teacher_experience"};
  table.n = rows.size();
  for (const auto& r : rows) {
    const auto i = r.csv_row;
    table.x.push_back(csv.at(i, idx("gender")));
    table.x.push_back(csv.at(i, idx("birth_quarter")));
    table.x.push_back(csv.at(i, idx("ethnicity")));
    table.x.push_back(static_cast<double>(r.grade));
    table.x.push_back(csv.at(i, idx("teacher_degree")));
    table.x.push_back(csv.at(i, idx("career_ladder")));
    table.x.push_back(csv.at(i, idx("school_type")));
    table.x.push_back(csv.at(i, idx("free_lunch")));
    table.x.push_back(csv.at(i, idx("teacher_ethnicity")));
    table.x.push_back(csv.at(i, idx("teacher_experience")));
    table.t_rct.push_back(r.t);
    const auto& [mean, sd] = grade_stats[r.grade];
    table.y.push_back((r.score - mean) / sd);
  }
  return table;
}

ConversionResult star_pipeline(const CsvTable& csv, StarContrast contrast, StarOutcome outcome,
                               double beta, std::uint64_t seed) {
  const RctTable table = star_rct_table(csv, contrast, outcome);
  RandomStream root(seed);
  const RctTable balanced = balance_arms(table, root.split("balance").seed());
  ConversionConfig cfg = star_preset(beta, root.split("convert").seed());
  ConversionResult result = convert(balanced, cfg);
  result.dataset.provenance =
      std::string("star-") + (contrast == StarContrast::small_vs_regular ? "small" : "aide") + "-" +
      (outcome == StarOutcome::math ? "math" : "reading");
  return result;
}

// ---- Synthetic fixtures ------------------------------------------------------

SyntheticRct make_synthetic_rct(std::size_t n, std::uint64_t seed) {
  if (n < 2 || n % 2 != 0)
    throw std::invalid_argument("make_synthetic_rct: n must be even and >= 2");
  RandomStream s(seed);
  SyntheticRct out;
  RctTable& table = out.table;
  table.columns = {"c0", "c1", "c2", "c3"};
  table.n = n;

  std::vector<std::uint8_t> arm(n, 0);
  for (std::size_t i = 0; i < n / 2; ++i) arm[i] = 1;
  s.shuffle(arm);

  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = s.normal();
    const double x1 = s.uniform(-1.0, 1.0);
    const double x2 = s.bernoulli(0.4) ? 1.0 : 0.0;
    const double x3 = s.normal();
    table.x.insert(table.x.end(), {x0, x1, x2, x3});
    const double y0 = 0.5 * x0 + 0.3 * std::tanh(x1) + 0.2 * x2 + s.normal(0.0, 0.5);
    const double tau = 0.4 + 0.3 * x1;  // heterogeneous effect
    const double y1 = y0 + tau;
    out.y0.push_back(y0);
    out.y1.push_back(y1);
    table.t_rct.push_back(arm[i]);
    table.y.push_back(arm[i] ? y1 : y0);
  }
  return out;
}

CsvTable make_synthetic_nsw_csv(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_synthetic_nsw_csv: n too small");
  RandomStream s(seed);
  CsvTable csv;
  csv.columns = {"age", "education", "black", "hispanic", "married",
                 "nodegree", "re74", "re75", "re78", "treat"};
  csv.n_rows = n;

  std::vector<std::uint8_t> arm(n, 0);
  for (std::size_t i = 0; i < n / 2; ++i) arm[i] = 1;
  s.shuffle(arm);

  for (std::size_t i = 0; i < n; ++i) {
    const double age = std::clamp(std::round(s.normal(25.0, 7.0)), 17.0, 55.0);
    const double education = std::clamp(std::round(s.normal(10.0, 2.0)), 3.0, 16.0);
    const double black = s.bernoulli(0.8) ? 1.0 : 0.0;
    const double hispanic = (black == 0.0 && s.bernoulli(0.5)) ? 1.0 : 0.0;
    const double married = s.bernoulli(0.17) ? 1.0 : 0.0;
    const double nodegree = education < 12.0 ? (s.bernoulli(0.92) ? 1.0 : 0.0)
                                             : (s.bernoulli(0.08) ? 1.0 : 0.0);
    const double re74 = s.bernoulli(0.7) ? 0.0 : std::exp(s.normal(8.0, 1.0));
    double re75;
    if (re74 > 0.0) {
      re75 = s.bernoulli(0.2) ? 0.0 : std::exp(0.8 * std::log(re74) + s.normal(0.0, 0.5));
    } else {
      re75 = s.bernoulli(0.85) ? 0.0 : std::exp(s.normal(7.5, 1.0));
    }
    // Outcome on the log1p scale: baseline from demographics and pre-program
    // earnings, plus a constant training effect for the treated arm.
    const double log_y0 = std::max(
        0.0, 1.5 + 0.05 * age + 0.25 * education + 0.4 * (re74 > 0.0) + 0.3 * (re75 > 0.0) +
                 s.normal(0.0, 1.5));
    const double log_y = log_y0 + 0.4 * arm[i];
    const double re78 = std::expm1(log_y);

    csv.cells.insert(csv.cells.end(), {age, education, black, hispanic, married, nodegree, re74,
                                       re75, re78, static_cast<double>(arm[i])});
  }
  return csv;
}

CsvTable make_synthetic_star_csv(std::size_t n_students, std::uint64_t seed) {
  RandomStream s(seed);
  CsvTable csv;
  csv.columns = {"student_id", "grade",          "class_type",    "reading",
                 "math",       "gender",         "birth_quarter", "ethnicity",
                 "teacher_degree", "career_ladder", "school_type", "free_lunch",
                 "teacher_ethnicity", "teacher_experience"};

  for (std::size_t sid = 0; sid < n_students; ++sid) {
    const double r = s.uniform();
    const int entry = r < 0.6 ? 0 : r < 0.8 ? 1 : r < 0.9 ? 2 : 3;
    const int class_type = s.uniform_int(1, 3);
    const double gender = s.bernoulli(0.5) ? 1.0 : 0.0;
    const double birth_quarter = s.uniform_int(1, 4);
    const double ethnicity = s.bernoulli(0.35) ? 1.0 : 0.0;
    const double school_type = s.uniform_int(1, 4);
    const double free_lunch = s.bernoulli(school_type == 1.0 ? 0.7 : 0.35) ? 1.0 : 0.0;
    const double teacher_degree = s.bernoulli(0.4) ? 1.0 : 0.0;
    const double career_ladder = s.bernoulli(0.3) ? 1.0 : 0.0;
    const double teacher_ethnicity = s.bernoulli(0.2) ? 1.0 : 0.0;
    const double teacher_experience = std::round(std::exp(s.normal(2.0, 0.6)));
    const double ability = s.normal(0.0, 30.0) - 15.0 * free_lunch;

    for (int grade = entry; grade <= 3; ++grade) {
      if (grade > entry && s.bernoulli(0.2)) break;  // attrition
      const double small_boost = class_type == 1 ? 10.0 : 0.0;
      const double base = 470.0 + 18.0 * grade + ability + small_boost;
      const double reading = s.bernoulli(0.05) ? std::nan("") : base + s.normal(0.0, 25.0);
      const double math = s.bernoulli(0.05) ? std::nan("") : base + 5.0 + s.normal(0.0, 25.0);
      csv.cells.insert(csv.cells.end(),
                       {static_cast<double>(sid), static_cast<double>(grade),
                        static_cast<double>(class_type), reading, math, gender, birth_quarter,
                        ethnicity, teacher_degree, career_ladder, school_type, free_lunch,
                        teacher_ethnicity, teacher_experience});
      ++csv.n_rows;
    }
  }
  return csv;
}

}  // namespace ivbound
