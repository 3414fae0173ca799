#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "preddiff/preddiff.hpp"

namespace preddiff::cli {
namespace {

struct Options {
  std::string data;
  std::string model;
  std::string task;
  std::string sets;
  std::string imputer = "train";
  std::string match = "exact";
  std::size_t n_imputations = 200;
  std::optional<std::uint64_t> seed;
  std::size_t bootstrap = 0;
  double level = 0.95;
  std::string out;
  std::string format = "csv";
  std::string classes = "all";
  std::string rows = "all";
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::size_t> n_train;
  bool no_laplace = false;
  std::optional<double> temperature;
  double timeout = 30.0;

  std::vector<std::string> pairs;
  std::string reference;
  std::string value = "interventional";
  std::string label_column;
  std::string fault = "none";
};

/// One line of a long-format report.
struct Row {
  std::size_t sample = 0;
  std::string set;
  std::string partner;
  std::size_t cls = 0;
  std::string kind;
  double estimate = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::size_t n_imputations = 0;
  std::uint64_t model_calls = 0;
};

struct Report {
  std::string command;
  std::uint64_t seed = 0;
  std::uint64_t model_calls = 0;
  std::string imputer;
  std::size_t n_imputations = 0;
  std::vector<Row> rows;
};

struct Context {
  Dataset data;
  std::shared_ptr<const Model> model;
  Task task;
  std::vector<NamedSet> sets;
  std::shared_ptr<const Imputer> imputer;
  std::vector<std::size_t> samples;
  std::uint64_t seed = 0;
};

std::uint64_t resolve_seed(const Options& o) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("PREDDIFF_SEED"); env && *env) {
    std::uint64_t value = 0;
    const std::string_view text(env);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      throw ConfigError("PREDDIFF_SEED is not an unsigned integer: " + std::string(text));
    }
    return value;
  }
  return 0;
}

std::vector<double> parse_numbers(std::string_view text, std::string_view what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string_view item = detail::trim(text.substr(start, comma - start));
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size()) {
      throw ConfigError("bad number '" + std::string(item) + "' in " + std::string(what));
    }
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

std::shared_ptr<const Model> build_model(const Options& o, const Dataset& data) {
  const std::string& spec = o.model;
  std::shared_ptr<const Model> model;
  if (spec.rfind("builtin:", 0) == 0) {
    const std::string name = spec.substr(8);
    if (name == "or" || name == "and" || name == "xor") {
      model = std::make_shared<GateModel>(parse_gate(name));
    } else if (name == "synthetic") {
      model = std::make_shared<SyntheticTargetModel>();
    } else if (name.rfind("linear:", 0) == 0) {
      std::string params = name.substr(7);
      double intercept = 0.0;
      if (const auto colon = params.find(':'); colon != std::string::npos) {
        const auto b0 = parse_numbers(params.substr(colon + 1), "linear intercept");
        if (b0.size() != 1) throw ConfigError("linear model takes one intercept");
        intercept = b0[0];
        params.resize(colon);
      }
      const auto betas = parse_numbers(params, "linear coefficients");
      model = std::make_shared<LinearModel>(
          Eigen::Map<const Vector>(betas.data(), static_cast<Eigen::Index>(betas.size())),
          intercept);
    } else {
      throw ConfigError("unknown builtin model: " + name +
                        " (expected or, and, xor, synthetic or linear:b1,b2,...[:b0])");
    }
  } else if (spec.rfind("bridge:", 0) == 0) {
    BridgeOptions bo;
    bo.timeout = std::chrono::milliseconds(static_cast<long long>(o.timeout * 1000.0));
    bo.expect_features = data.n_cols();
    model = BridgeModel::spawn(spec.substr(7), o.workers, bo);
  } else {
    throw ConfigError("model must be builtin:<name> or bridge:<command>, got '" + spec + "'");
  }

  if (model->n_features() != data.n_cols()) {
    throw SchemaError("model expects " + std::to_string(model->n_features()) +
                      " features but the data has " + std::to_string(data.n_cols()) +
                      " columns");
  }
  if (model->task() == TaskKind::classification_logits) {
    if (!o.temperature) {
      throw ConfigError(
          "model emits logits; pass --temperature (fit one with the calibrate command)");
    }
    model = apply_temperature(model, *o.temperature);
  } else if (o.temperature) {
    throw ConfigError("--temperature applies to logit models only");
  }
  if (!o.task.empty()) {
    TaskKind wanted = TaskKind::regression;
    try {
      wanted = parse_task_kind(o.task);
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    const bool wants_classification = wanted != TaskKind::regression;
    if (wants_classification != (model->task() != TaskKind::regression)) {
      throw ConfigError("--task " + o.task + " does not match the model, which is " +
                        std::string(to_string(model->task())));
    }
  }
  return model;
}

std::shared_ptr<const Imputer> build_imputer(const Options& o, const Dataset& data,
                                             std::optional<MatchMode> forced = std::nullopt) {
  if (o.imputer == "train") return std::make_shared<TrainSetImputer>(data);
  if (o.imputer == "gaussian") {
    return std::make_shared<GaussianImputer>(fit_conditional_gaussian(data));
  }
  if (o.imputer == "exhaustive") {
    MatchMode mode = MatchMode::exact_match;
    if (o.match == "marginal") {
      mode = MatchMode::marginal;
    } else if (o.match != "exact") {
      throw ConfigError("--match must be exact or marginal");
    }
    return std::make_shared<ExhaustiveImputer>(data, forced.value_or(mode));
  }
  throw ConfigError("--imputer must be train, gaussian or exhaustive");
}

std::vector<std::size_t> parse_rows(const std::string& spec, std::size_t n_rows) {
  std::vector<std::size_t> out;
  if (spec == "all") {
    for (std::size_t i = 0; i < n_rows; ++i) out.push_back(i);
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  const auto number = [&](std::string_view t) {
    std::size_t v = 0;
    t = detail::trim(t);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
      throw ConfigError("bad row selection: " + spec);
    }
    if (v >= n_rows) {
      throw ConfigError("row " + std::to_string(v) + " out of range for " +
                        std::to_string(n_rows) + " rows");
    }
    return v;
  };
  while (std::getline(ss, item, ',')) {
    if (const auto dots = item.find(".."); dots != std::string::npos) {
      const std::size_t a = number(std::string_view(item).substr(0, dots));
      const std::size_t b = number(std::string_view(item).substr(dots + 2));
      if (b < a) throw ConfigError("bad row range: " + item);
      for (std::size_t i = a; i <= b; ++i) out.push_back(i);
    } else {
      out.push_back(number(item));
    }
  }
  if (out.empty()) throw ConfigError("row selection is empty");
  return out;
}

Context load_context(const Options& o, std::optional<MatchMode> forced_mode = std::nullopt) {
  if (o.data.empty()) throw ConfigError("--data is required");
  if (o.model.empty()) throw ConfigError("--model is required");
  if (o.n_imputations == 0) throw ConfigError("--n-imputations must be positive");
  if (!(o.level > 0.0 && o.level < 1.0)) throw ConfigError("--level must lie in (0, 1)");
  if (o.format != "csv" && o.format != "json") throw ConfigError("--format must be csv or json");
  Context c;
  c.seed = resolve_seed(o);
  c.data = load_dataset(o.data);
  if (c.data.n_rows() == 0) throw ConfigError("dataset has no rows");
  c.sets = o.sets.empty() ? singleton_sets(c.data.column_names())
                          : load_sets(o.sets, c.data.column_names());
  c.samples = parse_rows(o.rows, c.data.n_rows());
  c.imputer = build_imputer(o, c.data, forced_mode);
  c.model = build_model(o, c.data);
  if (c.model->task() == TaskKind::regression) {
    c.task = Task::regression();
  } else {
    c.task = Task::classification(c.model->n_outputs(), o.n_train.value_or(c.data.n_rows()),
                                  !o.no_laplace);
  }
  return c;
}

EstimatorOptions estimator_options(const Options& o, const Context& c, std::size_t row) {
  EstimatorOptions e;
  e.n_imputations = o.n_imputations;
  e.seed = derive_seed(c.seed, row);
  e.bootstrap = o.bootstrap;
  e.level = o.level;
  return e;
}

/// Classes to report for one sample given its prediction.
std::vector<std::size_t> select_classes(const std::string& spec, const Vector& prediction) {
  const auto k = static_cast<std::size_t>(prediction.size());
  std::vector<std::size_t> out;
  if (spec == "all") {
    for (std::size_t i = 0; i < k; ++i) out.push_back(i);
  } else if (spec == "predicted") {
    Eigen::Index best = 0;
    prediction.maxCoeff(&best);
    out.push_back(static_cast<std::size_t>(best));
  } else {
    for (double v : parse_numbers(spec, "--classes")) {
      if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)) ||
          static_cast<std::size_t>(v) >= k) {
        throw ConfigError("--classes entry " + format_number(v) + " is not a class index below " +
                          std::to_string(k));
      }
      out.push_back(static_cast<std::size_t>(v));
    }
  }
  return out;
}

void add_rows(std::vector<Row>& out, std::size_t sample, const std::string& set,
              const std::string& partner, const EffectReport& e,
              const std::vector<std::size_t>& classes) {
  for (std::size_t k : classes) {
    const auto kk = static_cast<Eigen::Index>(k);
    Row r;
    r.sample = sample;
    r.set = set;
    r.partner = partner;
    r.cls = k;
    r.kind = std::string(to_string(e.kind));
    r.estimate = e.estimate(kk);
    if (e.has_interval()) {
      r.ci_low = e.ci_low(kk);
      r.ci_high = e.ci_high(kk);
    }
    r.n_imputations = e.n_imputations;
    r.model_calls = e.model_calls;
    out.push_back(std::move(r));
  }
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, n));
  if (threads == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Shortest round-trip text; negative zero prints as 0.
std::string number_text(double v) { return format_number(v == 0.0 ? 0.0 : v); }

std::string optional_number(const std::optional<double>& v) {
  return v ? number_text(*v) : std::string();
}

void write_report(const Report& report, const Options& o, std::ostream& out) {
  if (o.format == "json") {
    nlohmann::ordered_json j;
    j["command"] = report.command;
    j["seed"] = report.seed;
    j["model_calls"] = report.model_calls;
    if (!report.imputer.empty()) {
      j["imputer"] = report.imputer;
      j["n_imputations"] = report.n_imputations;
    }
    auto& rows = j["rows"] = nlohmann::ordered_json::array();
    for (const Row& r : report.rows) {
      nlohmann::ordered_json row;
      row["sample"] = r.sample;
      row["set"] = r.set;
      if (!r.partner.empty()) row["partner"] = r.partner;
      row["class"] = r.cls;
      row["kind"] = r.kind;
      row["estimate"] = r.estimate == 0.0 ? 0.0 : r.estimate;
      if (r.ci_low) {
        row["ci_low"] = *r.ci_low;
        row["ci_high"] = *r.ci_high;
      }
      row["n_imputations"] = r.n_imputations;
      row["model_calls"] = r.model_calls;
      rows.push_back(std::move(row));
    }
    out << j.dump(2) << '\n';
    return;
  }
  out << "# preddiff " << report.command << '\n'
      << "# seed=" << report.seed << '\n'
      << "# model_calls=" << report.model_calls << '\n';
  if (!report.imputer.empty()) {
    out << "# imputer=" << report.imputer << " n_imputations=" << report.n_imputations << '\n';
  }
  out << "sample,set,partner,class,kind,estimate,ci_low,ci_high,n_imputations,model_calls\n";
  for (const Row& r : report.rows) {
    out << r.sample << ',' << csv_field(r.set) << ',' << csv_field(r.partner) << ',' << r.cls
        << ',' << r.kind << ',' << number_text(r.estimate) << ',' << optional_number(r.ci_low)
        << ',' << optional_number(r.ci_high) << ',' << r.n_imputations << ','
        << r.model_calls << '\n';
  }
}

template <class Writer>
void emit(const Options& o, std::ostream& out, Writer&& writer) {
  if (o.out.empty() || o.out == "-") {
    writer(out);
    return;
  }
  std::ofstream file(o.out, std::ios::binary);
  if (!file) throw ConfigError("cannot write output file: " + o.out);
  writer(file);
  if (!file) throw ConfigError("failed writing output file: " + o.out);
}

Report new_report(const std::string& command, const Options& o, const Context& c) {
  Report r;
  r.command = command;
  r.seed = c.seed;
  r.imputer = std::string(c.imputer->name());
  if (c.imputer->name() == "exhaustive") {
    r.imputer += "-" + std::string(to_string(
                           static_cast<const ExhaustiveImputer&>(*c.imputer).mode()));
  }
  r.n_imputations = c.imputer->is_exact() ? 0 : o.n_imputations;
  return r;
}

int cmd_relevance(const Options& o, std::ostream& out) {
  const Context c = load_context(o);
  std::vector<FeatureSet> sets;
  for (const auto& s : c.sets) sets.push_back(s.set);
  std::vector<std::vector<Row>> per_sample(c.samples.size());
  parallel_for(c.samples.size(), o.workers, [&](std::size_t i) {
    const std::size_t row = c.samples[i];
    Vector prediction;
    const auto reports = relevances(*c.model, c.task, c.data.row(row), sets, *c.imputer,
                                    estimator_options(o, c, row), &prediction);
    const auto classes = select_classes(o.classes, prediction);
    for (std::size_t s = 0; s < reports.size(); ++s) {
      add_rows(per_sample[i], row, c.sets[s].name, "", reports[s], classes);
    }
  });
  Report report = new_report("relevance", o, c);
  for (auto& rows : per_sample) {
    for (auto& r : rows) report.rows.push_back(std::move(r));
  }
  report.model_calls = c.model->calls();
  emit(o, out, [&](std::ostream& s) { write_report(report, o, s); });
  return 0;
}

const NamedSet& find_set(const std::vector<NamedSet>& sets, const std::string& name) {
  for (const auto& s : sets) {
    if (s.name == name) return s;
  }
  throw ConfigError("unknown feature set: " + name);
}

int cmd_interaction(const Options& o, std::ostream& out) {
  if (o.pairs.empty() == o.reference.empty()) {
    throw ConfigError("give either --pairs or --reference");
  }
  const Context c = load_context(o);
  std::vector<std::pair<const NamedSet*, const NamedSet*>> named;
  if (!o.reference.empty()) {
    const NamedSet& ref = find_set(c.sets, o.reference);
    for (const auto& s : c.sets) {
      if (&s != &ref) named.emplace_back(&ref, &s);
    }
    if (named.empty()) throw ConfigError("reference mode needs at least two feature sets");
  } else {
    for (const std::string& p : o.pairs) {
      const auto colon = p.find(':');
      if (colon == std::string::npos) throw ConfigError("pair must look like a:b, got " + p);
      named.emplace_back(&find_set(c.sets, p.substr(0, colon)),
                         &find_set(c.sets, p.substr(colon + 1)));
    }
  }
  std::vector<std::pair<FeatureSet, FeatureSet>> pairs;
  for (const auto& [y, z] : named) {
    if (!disjoint(y->set, z->set)) {
      throw ConfigError("feature sets " + y->name + " and " + z->name + " overlap");
    }
    pairs.emplace_back(y->set, z->set);
  }

  std::vector<std::vector<Row>> per_sample(c.samples.size());
  parallel_for(c.samples.size(), o.workers, [&](std::size_t i) {
    const std::size_t row = c.samples[i];
    Vector prediction;
    const auto reports = joint_effects(*c.model, c.task, c.data.row(row), pairs, *c.imputer,
                                       estimator_options(o, c, row), &prediction);
    const auto classes = select_classes(o.classes, prediction);
    auto& rows = per_sample[i];
    for (std::size_t p = 0; p < reports.size(); ++p) {
      const std::string& y = named[p].first->name;
      const std::string& z = named[p].second->name;
      const InteractionReport& r = reports[p];
      add_rows(rows, row, y, z, r.main_y, classes);
      add_rows(rows, row, z, y, r.main_z, classes);
      add_rows(rows, row, y, z, r.joint, classes);
      if (r.shielded_joint) {
        add_rows(rows, row, y, z, *r.shielded_main_y, classes);
        add_rows(rows, row, z, y, *r.shielded_main_z, classes);
        add_rows(rows, row, y, z, *r.shielded_joint, classes);
      }
      add_rows(rows, row, y + "+" + z, "", r.combined, classes);
    }
  });
  Report report = new_report("interaction", o, c);
  for (auto& rows : per_sample) {
    for (auto& r : rows) report.rows.push_back(std::move(r));
  }
  report.model_calls = c.model->calls();
  emit(o, out, [&](std::ostream& s) { write_report(report, o, s); });
  return 0;
}

int cmd_oracle(const Options& o, std::ostream& out) {
  std::optional<MatchMode> mode;
  ValueKind kind = ValueKind::regression_interventional;
  if (o.value == "interventional") {
    mode = MatchMode::marginal;
  } else if (o.value == "observational") {
    kind = ValueKind::regression_observational;
    mode = MatchMode::exact_match;
  } else {
    throw ConfigError("--value must be interventional or observational");
  }
  if (o.imputer == "train" && kind == ValueKind::regression_observational) {
    throw ConfigError("the train imputer is marginal; use gaussian or exhaustive for observational values");
  }
  if (o.imputer == "gaussian" && kind == ValueKind::regression_interventional) {
    throw ConfigError("the gaussian imputer is conditional; use train or exhaustive for interventional values");
  }
  const Context c = load_context(o, mode);
  check_oracle_size(c.sets.size());
  if (c.task.is_classification()) kind = ValueKind::classification_log;
  std::vector<FeatureSet> sets;
  for (const auto& s : c.sets) sets.push_back(s.set);

  std::vector<std::vector<Row>> per_sample(c.samples.size());
  parallel_for(c.samples.size(), o.workers, [&](std::size_t i) {
    const std::size_t row = c.samples[i];
    const Sample x = c.data.row(row);
    const EstimatorOptions eo = estimator_options(o, c, row);
    Vector prediction;
    const auto rel = relevances(*c.model, c.task, x, sets, *c.imputer, eo, &prediction);
    EstimatorOptions table_opts = eo;
    table_opts.seed = derive_seed(eo.seed, 0x0ac1e);
    const auto tables =
        build_value_tables(*c.model, c.task, x, sets, *c.imputer, kind, table_opts);
    auto& rows = per_sample[i];
    const auto push = [&](const std::string& set, const std::string& partner, std::size_t k,
                          const char* what, double value) {
      Row r;
      r.sample = row;
      r.set = set;
      r.partner = partner;
      r.cls = k;
      r.kind = what;
      r.estimate = value;
      rows.push_back(std::move(r));
    };
    for (std::size_t k : select_classes(o.classes, prediction)) {
      for (std::size_t s = 0; s < sets.size(); ++s) {
        const double phi = exact_shapley(tables[k], s);
        const double m = rel[s].estimate(static_cast<Eigen::Index>(k));
        push(c.sets[s].name, "", k, "shapley", phi);
        push(c.sets[s].name, "", k, "relevance", m);
        push(c.sets[s].name, "", k, "difference", phi - m);
      }
      for (std::size_t a = 0; a < sets.size(); ++a) {
        for (std::size_t b = a + 1; b < sets.size(); ++b) {
          push(c.sets[a].name, c.sets[b].name, k, "interaction-index",
               shapley_interaction_index(tables[k], a, b));
        }
      }
    }
  });
  Report report = new_report("oracle", o, c);
  for (auto& rows : per_sample) {
    for (auto& r : rows) report.rows.push_back(std::move(r));
  }
  report.model_calls = c.model->calls();
  emit(o, out, [&](std::ostream& s) { write_report(report, o, s); });
  return 0;
}

int cmd_calibrate(const Options& o, std::ostream& out) {
  if (o.data.empty()) throw ConfigError("--data is required");
  if (o.label_column.empty()) throw ConfigError("--label-column is required");
  if (o.format != "csv" && o.format != "json") throw ConfigError("--format must be csv or json");
  const CsvTable table = read_csv_file(o.data);
  const auto it = std::find(table.header.begin(), table.header.end(), o.label_column);
  if (it == table.header.end()) throw SchemaError("unknown column: " + o.label_column);
  const auto label_col = static_cast<std::size_t>(it - table.header.begin());
  const std::size_t k = table.header.size() - 1;
  if (k < 2) throw SchemaError("calibration needs at least two logit columns");

  RowMatrix logits(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(k));
  std::vector<std::size_t> labels;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Eigen::Index c_out = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const double v = parse_number(table.rows[r][c], r + 1, table.header[c]);
      if (c == label_col) {
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
          throw SchemaError("label in record " + std::to_string(r + 1) +
                            " is not a class index");
        }
        labels.push_back(static_cast<std::size_t>(v));
      } else {
        logits(static_cast<Eigen::Index>(r), c_out++) = v;
      }
    }
  }
  const TemperatureFit fit = fit_temperature(logits, labels);
  const double nll_unscaled = temperature_nll(logits, labels, 1.0);
  const std::string flag = "--temperature " + format_number(fit.temperature);
  emit(o, out, [&](std::ostream& s) {
    if (o.format == "json") {
      nlohmann::ordered_json j;
      j["command"] = "calibrate";
      j["temperature"] = fit.temperature;
      j["nll"] = fit.nll;
      j["nll_unscaled"] = nll_unscaled;
      j["at_bound"] = fit.at_bound;
      j["model_flag"] = flag;
      s << j.dump(2) << '\n';
    } else {
      s << "# preddiff calibrate\n"
        << "temperature,nll,nll_unscaled,at_bound,model_flag\n"
        << format_number(fit.temperature) << ',' << format_number(fit.nll) << ','
        << format_number(nll_unscaled) << ',' << (fit.at_bound ? "true" : "false") << ','
        << flag << '\n';
    }
  });
  return 0;
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  ValidationFault fault = ValidationFault::none;
  if (o.fault == "sign-flip") {
    fault = ValidationFault::sign_flip_joint;
  } else if (o.fault != "none") {
    throw ConfigError("--inject-fault must be none or sign-flip");
  }
  const ValidationReport report = run_golden_checks(fault);
  double worst = 0.0;
  for (const auto& c : report.checks) worst = std::max(worst, c.residual());
  nlohmann::ordered_json j;
  j["command"] = "validate";
  j["passed"] = report.passed();
  j["checks"] = report.checks.size();
  j["max_residual"] = worst;
  auto& failed = j["failures"] = nlohmann::ordered_json::array();
  for (const auto& c : report.failures()) {
    failed.push_back({{"cell", c.cell},
                      {"expected", c.expected},
                      {"actual", c.actual},
                      {"residual", c.residual()}});
    err << "FAIL " << c.cell << ": expected " << format_number(c.expected) << ", got "
        << format_number(c.actual) << " (residual " << format_number(c.residual()) << ")\n";
  }
  emit(o, out, [&](std::ostream& s) { s << j.dump(2) << '\n'; });
  return report.passed() ? 0 : 1;
}

void add_engine_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--data", o.data, "CSV dataset with a header row")->required();
  cmd->add_option("--model", o.model,
                  "builtin:or|and|xor|synthetic|linear:b1,b2,...[:b0] or bridge:<command>")
      ->required();
  cmd->add_option("--task", o.task, "regression or classification; must match the model");
  cmd->add_option("--sets", o.sets, "feature-set definitions; default one set per column");
  cmd->add_option("--imputer", o.imputer, "train, gaussian or exhaustive")
      ->check(CLI::IsMember({"train", "gaussian", "exhaustive"}));
  cmd->add_option("--match", o.match, "exhaustive imputer mode: exact or marginal")
      ->check(CLI::IsMember({"exact", "marginal"}));
  cmd->add_option("--n-imputations", o.n_imputations, "imputations per m-value");
  cmd->add_option("--seed", o.seed, "base seed (falls back to PREDDIFF_SEED, then 0)");
  cmd->add_option("--bootstrap", o.bootstrap, "bootstrap replicates; 0 disables intervals");
  cmd->add_option("--level", o.level, "bootstrap interval level");
  cmd->add_option("--out", o.out, "report file; default standard output");
  cmd->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--classes", o.classes, "all, predicted or a list of class indices");
  cmd->add_option("--rows", o.rows, "samples to explain: all or a list like 0,3,5..9");
  cmd->add_option("--workers", o.workers, "parallel workers");
  cmd->add_option("--n-train", o.n_train, "training-set size N for the Laplace correction");
  cmd->add_flag("--no-laplace", o.no_laplace, "disable the Laplace correction");
  cmd->add_option("--temperature", o.temperature, "temperature for a logit model");
  cmd->add_option("--timeout", o.timeout, "bridge timeout in seconds");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PredDiff relevances and interactions for black-box models", "preddiff"};
  app.require_subcommand(1);
  Options o;

  auto* relevance = app.add_subcommand("relevance", "relevance of every feature set");
  add_engine_options(relevance, o);
  auto* interaction = app.add_subcommand("interaction", "raw and shielded joint effects");
  add_engine_options(interaction, o);
  interaction->add_option("--pairs", o.pairs, "set pairs as a:b")->delimiter(',');
  interaction->add_option("--reference", o.reference, "one set against all others");
  auto* oracle = app.add_subcommand("oracle", "exact Shapley values beside the engine");
  add_engine_options(oracle, o);
  oracle->add_option("--value", o.value, "interventional or observational");
  auto* calibrate = app.add_subcommand("calibrate", "fit a softmax temperature to logits");
  calibrate->add_option("--data", o.data, "CSV of logit columns and a label column")->required();
  calibrate->add_option("--label-column", o.label_column, "name of the label column")->required();
  calibrate->add_option("--out", o.out, "report file; default standard output");
  calibrate->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  auto* validate = app.add_subcommand("validate", "golden end-to-end checks");
  validate->add_option("--inject-fault", o.fault, "test hook: none or sign-flip");
  validate->add_option("--out", o.out, "report file; default standard output");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*relevance) return cmd_relevance(o, out);
    if (*interaction) return cmd_interaction(o, out);
    if (*oracle) return cmd_oracle(o, out);
    if (*calibrate) return cmd_calibrate(o, out);
    if (*validate) return cmd_validate(o, out, err);
  } catch (const ConfigError& e) {
    err << "preddiff: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const SchemaError& e) {
    err << "preddiff: schema error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "preddiff: error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "preddiff: internal error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace preddiff::cli
