#include "hiso/run_spec.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "hiso/error.hpp"

namespace hiso {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) throw ConfigError(prefix + item.key(), "unknown field");
  }
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_double(const json& obj, const char* key, const std::string& path, double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(path, "expected a number");
  return v->get<double>();
}

std::uint64_t get_uint(const json& obj, const char* key, const std::string& path, std::uint64_t fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (v->is_number_unsigned()) return v->get<std::uint64_t>();
  if (v->is_number_integer()) {
    // Signed storage happens for values built in code; only the sign matters.
    if (v->get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v->get<std::int64_t>());
    throw ConfigError(path, "expected a nonnegative integer");
  }
  throw ConfigError(path, "expected an unsigned integer");
}

bool get_bool(const json& obj, const char* key, const std::string& path, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(path, "expected true or false");
  return v->get<bool>();
}

template <typename T>
std::optional<std::vector<T>> get_list(const json& obj, const char* key, const std::string& path) {
  const json* v = find(obj, key);
  if (!v) return std::nullopt;
  if (!v->is_array()) throw ConfigError(path, "expected a list");
  std::vector<T> out;
  for (const json& e : *v) {
    if constexpr (std::is_integral_v<T>) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < 0) {
        throw ConfigError(path, "expected nonnegative integers");
      }
    } else {
      if (!e.is_number()) throw ConfigError(path, "expected numbers");
    }
    out.push_back(e.get<T>());
  }
  return out;
}

std::variant<QuadraticSpec, LogisticSpec> parse_task(const json& t, std::size_t clients) {
  if (!t.is_object()) throw ConfigError("task", "expected an object");
  const json* kind = find(t, "kind");
  if (!kind || !kind->is_string()) throw ConfigError("task.kind", "expected \"quadratic\" or \"logistic\"");
  if (*kind == "quadratic") {
    reject_unknown(t, "task.", {"kind", "dim", "log_variance", "dispersion", "x0_scale", "rotate", "seed"});
    QuadraticSpec q;
    q.clients = clients;
    q.dim = static_cast<Eigen::Index>(get_uint(t, "dim", "task.dim", 10));
    q.log_variance = get_double(t, "log_variance", "task.log_variance", q.log_variance);
    q.dispersion = get_double(t, "dispersion", "task.dispersion", q.dispersion);
    q.x0_scale = get_double(t, "x0_scale", "task.x0_scale", q.x0_scale);
    q.rotate = get_bool(t, "rotate", "task.rotate", q.rotate);
    q.seed = Seed{get_uint(t, "seed", "task.seed", q.seed.value)};
    if (q.dim < 1) throw ConfigError("task.dim", "must be >= 1");
    if (q.log_variance < 0.0) throw ConfigError("task.log_variance", "must be >= 0");
    if (q.dispersion < 0.0) throw ConfigError("task.dispersion", "must be >= 0");
    return q;
  }
  if (*kind == "logistic") {
    reject_unknown(t, "task.", {"kind", "samples", "dim", "alpha", "separation", "l2", "batch_size", "seed"});
    LogisticSpec l;
    l.clients = clients;
    l.samples = get_uint(t, "samples", "task.samples", l.samples);
    l.dim = static_cast<Eigen::Index>(get_uint(t, "dim", "task.dim", static_cast<std::uint64_t>(l.dim)));
    l.alpha = get_double(t, "alpha", "task.alpha", l.alpha);
    l.separation = get_double(t, "separation", "task.separation", l.separation);
    l.l2 = get_double(t, "l2", "task.l2", l.l2);
    l.batch_size = get_uint(t, "batch_size", "task.batch_size", l.batch_size);
    l.seed = Seed{get_uint(t, "seed", "task.seed", l.seed.value)};
    if (l.dim < 1) throw ConfigError("task.dim", "must be >= 1");
    if (l.samples < clients) throw ConfigError("task.samples", "fewer samples than clients");
    if (!(l.alpha > 0.0)) throw ConfigError("task.alpha", "must be > 0");
    if (l.l2 < 0.0) throw ConfigError("task.l2", "must be >= 0");
    if (l.batch_size < 1) throw ConfigError("task.batch_size", "must be >= 1");
    return l;
  }
  throw ConfigError("task.kind", "expected \"quadratic\" or \"logistic\"");
}

}  // namespace

std::size_t SweepGrid::size() const {
  std::size_t n = 1;
  if (nu) n *= nu->size();
  if (tau) n *= tau->size();
  if (perturbations) n *= perturbations->size();
  if (eta) n *= eta->size();
  return n;
}

RunSpec parse_run_spec(const json& doc) {
  if (!doc.is_object()) throw ConfigError("<root>", "expected a JSON object");
  reject_unknown(doc, "", {"task", "method", "M", "m", "tau", "P", "eta", "mu", "R", "hessian",
                           "sampling_seed", "perturbation_seed", "quantize_wire", "cost",
                           "output_dir", "dump_hessian", "verify", "sweep"});
  RunSpec spec;
  RoundConfig& c = spec.round;
  if (const json* m = find(doc, "method")) {
    if (!m->is_string()) throw ConfigError("method", "expected a string");
    c.method = parse_method(m->get<std::string>());
  }
  c.clients = get_uint(doc, "M", "M", c.clients);
  c.sampled = get_uint(doc, "m", "m", c.sampled);
  c.steps = get_uint(doc, "tau", "tau", c.steps);
  c.perturbations = get_uint(doc, "P", "P", c.perturbations);
  c.eta = get_double(doc, "eta", "eta", c.eta);
  c.smoothing.mu = get_double(doc, "mu", "mu", c.smoothing.mu);
  c.rounds = get_uint(doc, "R", "R", c.rounds);
  c.sampling_seed = Seed{get_uint(doc, "sampling_seed", "sampling_seed", c.sampling_seed.value)};
  c.perturbation_root = Seed{get_uint(doc, "perturbation_seed", "perturbation_seed", c.perturbation_root.value)};
  c.quantize_wire = get_bool(doc, "quantize_wire", "quantize_wire", c.quantize_wire);
  if (const json* h = find(doc, "hessian")) {
    if (!h->is_object()) throw ConfigError("hessian", "expected an object");
    reject_unknown(*h, "hessian.", {"nu", "epsilon", "beta_lower", "beta_upper"});
    c.hessian.nu = get_double(*h, "nu", "hessian.nu", c.hessian.nu);
    c.hessian.epsilon = get_double(*h, "epsilon", "hessian.epsilon", c.hessian.epsilon);
    c.hessian.beta_lower = get_double(*h, "beta_lower", "hessian.beta_lower", c.hessian.beta_lower);
    c.hessian.beta_upper = get_double(*h, "beta_upper", "hessian.beta_upper", c.hessian.beta_upper);
  }
  if (const json* w = find(doc, "cost")) {
    if (!w->is_object()) throw ConfigError("cost", "expected an object");
    reject_unknown(*w, "cost.", {"bytes_per_scalar", "bytes_per_seed"});
    c.cost.bytes_per_scalar = static_cast<std::uint32_t>(get_uint(*w, "bytes_per_scalar", "cost.bytes_per_scalar", 4));
    c.cost.bytes_per_seed = static_cast<std::uint32_t>(get_uint(*w, "bytes_per_seed", "cost.bytes_per_seed", 0));
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    // Map the in-memory field names onto config keys where they differ.
    const std::string& f = e.field();
    if (f == "nu" || f == "epsilon" || f == "beta_lower" || f == "beta_upper") {
      throw ConfigError("hessian." + f, e.what());
    }
    if (f == "bytes_per_scalar") throw ConfigError("cost.bytes_per_scalar", e.what());
    throw;
  }

  const json* t = find(doc, "task");
  if (!t) throw ConfigError("task", "missing");
  spec.task = parse_task(*t, c.clients);

  if (const json* out = find(doc, "output_dir")) {
    if (!out->is_string()) throw ConfigError("output_dir", "expected a string");
    spec.output_dir = out->get<std::string>();
  }
  spec.dump_hessian = get_bool(doc, "dump_hessian", "dump_hessian", false);
  if (const json* v = find(doc, "verify")) {
    if (!v->is_object()) throw ConfigError("verify", "expected an object");
    reject_unknown(*v, "verify.", {"equivalence"});
    spec.verify_equivalence = get_bool(*v, "equivalence", "verify.equivalence", false);
  }
  if (const json* s = find(doc, "sweep")) {
    if (!s->is_object()) throw ConfigError("sweep", "expected an object");
    reject_unknown(*s, "sweep.", {"nu", "tau", "P", "eta", "budget", "threshold_fraction"});
    SweepGrid g;
    g.nu = get_list<double>(*s, "nu", "sweep.nu");
    g.tau = get_list<std::size_t>(*s, "tau", "sweep.tau");
    g.perturbations = get_list<std::size_t>(*s, "P", "sweep.P");
    g.eta = get_list<double>(*s, "eta", "sweep.eta");
    g.budget = get_uint(*s, "budget", "sweep.budget", g.budget);
    g.threshold_fraction = get_double(*s, "threshold_fraction", "sweep.threshold_fraction", g.threshold_fraction);
    if (!(g.threshold_fraction > 0.0)) throw ConfigError("sweep.threshold_fraction", "must be > 0");
    spec.sweep = g;
  }
  return spec;
}

RunSpec load_run_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_run_spec(doc);
}

json to_json(const RunSpec& spec) {
  const RoundConfig& c = spec.round;
  json doc = {
      {"method", to_string(c.method)},
      {"M", c.clients},
      {"m", c.sampled},
      {"tau", c.steps},
      {"P", c.perturbations},
      {"eta", c.eta},
      {"mu", c.smoothing.mu},
      {"R", c.rounds},
      {"hessian", {{"nu", c.hessian.nu}, {"epsilon", c.hessian.epsilon},
                   {"beta_lower", c.hessian.beta_lower}, {"beta_upper", c.hessian.beta_upper}}},
      {"sampling_seed", c.sampling_seed.value},
      {"perturbation_seed", c.perturbation_root.value},
      {"quantize_wire", c.quantize_wire},
      {"cost", {{"bytes_per_scalar", c.cost.bytes_per_scalar}, {"bytes_per_seed", c.cost.bytes_per_seed}}},
      {"output_dir", spec.output_dir},
      {"dump_hessian", spec.dump_hessian},
      {"verify", {{"equivalence", spec.verify_equivalence}}},
  };
  if (const auto* q = std::get_if<QuadraticSpec>(&spec.task)) {
    doc["task"] = {{"kind", "quadratic"}, {"dim", q->dim}, {"log_variance", q->log_variance},
                   {"dispersion", q->dispersion}, {"x0_scale", q->x0_scale}, {"rotate", q->rotate},
                   {"seed", q->seed.value}};
  } else {
    const auto& l = std::get<LogisticSpec>(spec.task);
    doc["task"] = {{"kind", "logistic"}, {"samples", l.samples}, {"dim", l.dim}, {"alpha", l.alpha},
                   {"separation", l.separation}, {"l2", l.l2}, {"batch_size", l.batch_size},
                   {"seed", l.seed.value}};
  }
  if (spec.sweep) {
    json s = {{"budget", spec.sweep->budget}, {"threshold_fraction", spec.sweep->threshold_fraction}};
    if (spec.sweep->nu) s["nu"] = *spec.sweep->nu;
    if (spec.sweep->tau) s["tau"] = *spec.sweep->tau;
    if (spec.sweep->perturbations) s["P"] = *spec.sweep->perturbations;
    if (spec.sweep->eta) s["eta"] = *spec.sweep->eta;
    doc["sweep"] = s;
  }
  return doc;
}

std::unique_ptr<Task> make_task(const RunSpec& spec) {
  if (const auto* q = std::get_if<QuadraticSpec>(&spec.task)) {
    return std::make_unique<QuadraticTask>(QuadraticTask::make(*q));
  }
  return std::make_unique<LogisticTask>(LogisticTask::make(std::get<LogisticSpec>(spec.task)));
}

}  // namespace hiso
