#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qdcascade/config_io.hpp"
#include "qdcascade/metrics.hpp"
#include "qdcascade/purcell.hpp"

namespace qdc {

inline constexpr const char* kCodeVersion = "qdcascade 0.1.0";
inline constexpr int kResultsSchema = 1;

// Axis paths that are not config fields. They are applied after all plain
// axes, in this order: kappa_over_g, cavity_detuning, purcell_factor.
inline constexpr const char* kKappaOverG = "kappa_over_g";
inline constexpr const char* kCavityDetuning = "cavity_detuning";  // E_cavity - (E_XX - E_X)
inline constexpr const char* kPurcellFactor = "purcell_factor";

enum class PurcellRule { SolveKappa, SolveG };

struct SweepAxis {
  std::string path;
  std::vector<double> values;
};

struct SweepSpec {
  std::string name;
  SystemConfig base;
  std::vector<SweepAxis> axes;
  PurcellRule purcell_rule = PurcellRule::SolveKappa;

  std::size_t n_points() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.values.size();
    return n;
  }
};

inline bool is_pseudo_axis(const std::string& p) {
  return p == kKappaOverG || p == kCavityDetuning || p == kPurcellFactor;
}

namespace detail {

inline std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string p;
  while (std::getline(ss, p, '.')) parts.push_back(p);
  return parts;
}

// Sets a numeric leaf of the canonical config JSON; the leaf must exist.
inline void set_json_path(json& j, const std::string& path, double value) {
  json* node = &j;
  for (const auto& part : split_path(path)) {
    if (!node->is_object() || !node->contains(part))
      throw ValidationError(std::vector<InvalidField>{{path, "axis path does not name a configuration field"}});
    node = &(*node)[part];
  }
  if (node->is_boolean())
    *node = value != 0.0;
  else if (node->is_number_integer())
    *node = static_cast<int>(std::lround(value));
  else if (node->is_number() || node->is_null())
    *node = value;
  else
    throw ValidationError(std::vector<InvalidField>{{path, "axis path must name a numeric or boolean field"}});
}

}  // namespace detail

inline std::vector<double> linspace(double start, double stop, std::size_t num) {
  std::vector<double> v(num);
  for (std::size_t k = 0; k < num; ++k)
    v[k] = num == 1 ? start : start + (stop - start) * static_cast<double>(k) / static_cast<double>(num - 1);
  return v;
}

inline SweepSpec sweep_from_json(const json& j) {
  std::vector<InvalidField> errors;
  if (!j.is_object()) throw ValidationError(std::vector<InvalidField>{{"<root>", "sweep spec must be an object"}});
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "name" && it.key() != "base" && it.key() != "axes" && it.key() != "purcell_rule" &&
        it.key() != "comment")
      errors.push_back({it.key(), "unknown key"});
  SweepSpec s;
  if (j.contains("name") && j["name"].is_string()) s.name = j["name"].get<std::string>();
  if (j.contains("base")) {
    try {
      s.base = config_from_json(j["base"]);
    } catch (const ValidationError& e) {
      for (const auto& f : e.fields()) errors.push_back({"base." + f.path, f.reason});
    }
  }
  if (j.contains("purcell_rule")) {
    const json& r = j["purcell_rule"];
    if (r == "solve_kappa")
      s.purcell_rule = PurcellRule::SolveKappa;
    else if (r == "solve_g")
      s.purcell_rule = PurcellRule::SolveG;
    else
      errors.push_back({"purcell_rule", "expected solve_kappa or solve_g"});
  }
  if (j.contains("axes")) {
    const json& axes = j["axes"];
    if (!axes.is_array()) errors.push_back({"axes", "expected an array"});
    else {
      if (axes.size() > 2) errors.push_back({"axes", "at most two axes are supported"});
      const json base_json = to_json(s.base);
      for (std::size_t k = 0; k < axes.size(); ++k) {
        const std::string where = "axes[" + std::to_string(k) + "]";
        const json& a = axes[k];
        if (!a.is_object() || !a.contains("path") || !a["path"].is_string()) {
          errors.push_back({where, "axis needs a string path"});
          continue;
        }
        SweepAxis ax;
        ax.path = a["path"].get<std::string>();
        if (!is_pseudo_axis(ax.path)) {
          json probe = base_json;
          try {
            detail::set_json_path(probe, ax.path, 0.0);
          } catch (const ValidationError&) {
            errors.push_back({where + ".path", "'" + ax.path + "' does not resolve in the configuration"});
          }
        }
        for (auto it = a.begin(); it != a.end(); ++it)
          if (it.key() != "path" && it.key() != "values" && it.key() != "linspace")
            errors.push_back({where + "." + it.key(), "unknown key"});
        if (a.contains("values") && a["values"].is_array()) {
          for (const auto& v : a["values"]) {
            if (!v.is_number()) errors.push_back({where + ".values", "values must be numbers"});
            else ax.values.push_back(v.get<double>());
          }
        } else if (a.contains("linspace") && a["linspace"].is_object()) {
          const json& l = a["linspace"];
          if (!l.contains("start") || !l.contains("stop") || !l.contains("num") || !l["num"].is_number_integer() ||
              l["num"].get<long>() < 1)
            errors.push_back({where + ".linspace", "needs start, stop and integer num >= 1"});
          else
            ax.values = linspace(l["start"].get<double>(), l["stop"].get<double>(), l["num"].get<std::size_t>());
        } else {
          errors.push_back({where, "axis needs values or linspace"});
        }
        if (ax.values.empty()) errors.push_back({where, "axis has no values"});
        s.axes.push_back(std::move(ax));
      }
    }
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return s;
}

inline json to_json(const SweepSpec& s) {
  json axes = json::array();
  for (const auto& a : s.axes) axes.push_back({{"path", a.path}, {"values", a.values}});
  return json{{"name", s.name},
              {"base", to_json(s.base)},
              {"axes", axes},
              {"purcell_rule", s.purcell_rule == PurcellRule::SolveKappa ? "solve_kappa" : "solve_g"}};
}

inline std::string spec_hash(const SweepSpec& s) { return hex64(fnv1a(to_json(s).dump())); }

inline SweepSpec load_sweep_spec(const std::string& path) { return sweep_from_json(read_json_file(path)); }

// Axis values of point `index`; the first axis varies slowest.
inline std::vector<double> axis_values(const SweepSpec& s, std::size_t index) {
  std::vector<double> v(s.axes.size());
  for (std::size_t k = s.axes.size(); k-- > 0;) {
    const std::size_t n = s.axes[k].values.size();
    v[k] = s.axes[k].values[index % n];
    index /= n;
  }
  return v;
}

inline SystemConfig point_config(const SweepSpec& s, std::size_t index) {
  const auto vals = axis_values(s, index);
  json j = to_json(s.base);
  for (std::size_t k = 0; k < s.axes.size(); ++k)
    if (!is_pseudo_axis(s.axes[k].path)) detail::set_json_path(j, s.axes[k].path, vals[k]);
  SystemConfig c = config_from_json(j);
  auto pseudo = [&](const char* name) -> std::optional<double> {
    for (std::size_t k = 0; k < s.axes.size(); ++k)
      if (s.axes[k].path == name) return vals[k];
    return std::nullopt;
  };
  if (auto r = pseudo(kKappaOverG)) c.cavity.hbar_kappa = *r * c.cavity.hbar_g;
  if (auto d = pseudo(kCavityDetuning)) {
    const double transition = c.electronic.E_X - c.electronic.E_Bind;  // E_XX - E_X
    c.cavity.E_cavity = transition + *d;
  }
  if (auto f = pseudo(kPurcellFactor)) {
    if (s.purcell_rule == PurcellRule::SolveKappa)
      c.cavity.hbar_kappa = kappa_for_purcell(*f, c.cavity.hbar_g, c.electronic.hbar_gamma_rad);
    else
      c.cavity.hbar_g = coupling_for_purcell(*f, c.cavity.hbar_kappa, c.electronic.hbar_gamma_rad);
  }
  return c;
}

struct SweepRecord {
  std::size_t index = 0;
  std::vector<double> axis_values;
  std::string config_hash;
  double F_P = std::numeric_limits<double>::quiet_NaN();
  double hbar_g = std::numeric_limits<double>::quiet_NaN();
  double hbar_kappa = std::numeric_limits<double>::quiet_NaN();
  std::optional<PhotonMetrics> metrics;
  std::string error;
  double wall_time = 0.0;
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepRecord> records;  // in point order
  std::size_t evaluated = 0;         // points computed by this call
};

struct SweepOptions {
  unsigned workers = 1;
  // Stop after this many new points (used to simulate an interrupted run).
  std::optional<std::size_t> max_points;
  BundleOptions bundle;
};

inline SweepRecord evaluate_point(const SweepSpec& s, std::size_t index, const BundleOptions& bo) {
  SweepRecord r;
  r.index = index;
  r.axis_values = axis_values(s, index);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const SystemConfig c = point_config(s, index);
    r.config_hash = config_hash(c);
    const ValidatedConfig vc = validate(c);
    if (c.cavity.enabled) {  // left NaN for a free dot
      r.hbar_g = c.cavity.hbar_g;
      r.hbar_kappa = c.cavity.hbar_kappa;
      r.F_P = purcell_factor(c.cavity.hbar_g, c.cavity.hbar_kappa, c.electronic.hbar_gamma_rad,
                             vc.E_cavity - (vc.E_XX - vc.config.electronic.E_X));
    }
    r.metrics = metrics_bundle(vc, bo);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

namespace detail {

inline json nan_safe(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
inline double from_nan_safe(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline json record_to_json(const SweepRecord& r) {
  json j{{"index", r.index},
         {"axis_values", r.axis_values},
         {"config_hash", r.config_hash},
         {"F_P", nan_safe(r.F_P)},
         {"hbar_g", nan_safe(r.hbar_g)},
         {"hbar_kappa", nan_safe(r.hbar_kappa)},
         {"wall_time", r.wall_time}};
  if (r.metrics) {
    const auto& m = *r.metrics;
    j["metrics"] = {{"I_X", m.I_X},         {"I_XX", m.I_XX},         {"V_X", m.V_X},
                    {"V_XX", m.V_XX},       {"C", m.C},               {"G2bar_X", m.G2bar_X},
                    {"G2bar_XX", m.G2bar_XX}, {"fom", m.fom},         {"tail_population", m.tail_population},
                    {"tail_warning", m.tail_warning}};
  } else {
    j["error"] = r.error;
  }
  return j;
}

inline SweepRecord record_from_json(const json& j) {
  SweepRecord r;
  r.index = j.at("index").get<std::size_t>();
  r.axis_values = j.at("axis_values").get<std::vector<double>>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.F_P = from_nan_safe(j.at("F_P"));
  r.hbar_g = from_nan_safe(j.at("hbar_g"));
  r.hbar_kappa = from_nan_safe(j.at("hbar_kappa"));
  r.wall_time = j.at("wall_time").get<double>();
  if (j.contains("metrics")) {
    const json& m = j["metrics"];
    PhotonMetrics pm;
    pm.I_X = m.at("I_X").get<double>();
    pm.I_XX = m.at("I_XX").get<double>();
    pm.V_X = m.at("V_X").get<double>();
    pm.V_XX = m.at("V_XX").get<double>();
    pm.C = m.at("C").get<double>();
    pm.G2bar_X = m.at("G2bar_X").get<double>();
    pm.G2bar_XX = m.at("G2bar_XX").get<double>();
    pm.fom = m.at("fom").get<double>();
    pm.tail_population = m.at("tail_population").get<double>();
    pm.tail_warning = m.at("tail_warning").get<bool>();
    r.metrics = pm;
  } else {
    r.error = j.at("error").get<std::string>();
  }
  return r;
}

inline std::string fmt(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_safe(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ch == ',' ? ';' : ' ';
  return s;
}

}  // namespace detail

inline void write_results_csv(std::ostream& os, const SweepResult& res) {
  os << "index";
  for (const auto& a : res.spec.axes) os << "," << a.path;
  os << ",F_P,hbar_g,hbar_kappa,I_X,I_XX,V_X,V_XX,C,G2bar_X,G2bar_XX,fom,tail_warning,error,config_hash\n";
  for (const auto& r : res.records) {
    os << r.index;
    for (double v : r.axis_values) os << "," << detail::fmt(v);
    os << "," << detail::fmt(r.F_P) << "," << detail::fmt(r.hbar_g) << "," << detail::fmt(r.hbar_kappa);
    if (r.metrics) {
      const auto& m = *r.metrics;
      for (double v : {m.I_X, m.I_XX, m.V_X, m.V_XX, m.C, m.G2bar_X, m.G2bar_XX, m.fom}) os << "," << detail::fmt(v);
      os << "," << (m.tail_warning ? 1 : 0) << ",";
    } else {
      os << ",,,,,,,,,," << detail::csv_safe(r.error);
    }
    os << "," << r.config_hash << "\n";
  }
}

namespace detail {

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir) { return dir / "checkpoint.jsonl"; }

struct Checkpoint {
  std::string spec_hash;
  std::size_t n_points = 0;
  std::vector<SweepRecord> records;
};

inline Checkpoint read_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(checkpoint_path(dir));
  if (!in) throw IoError("no checkpoint in " + dir.string());
  Checkpoint cp;
  std::string line;
  if (!std::getline(in, line)) throw CorruptCheckpoint("missing header", -1);
  try {
    const json h = json::parse(line);
    cp.spec_hash = h.at("spec_hash").get<std::string>();
    cp.n_points = h.at("n_points").get<std::size_t>();
  } catch (const json::exception& e) {
    throw CorruptCheckpoint(std::string("bad header: ") + e.what(), -1);
  }
  long k = 0;
  while (std::getline(in, line)) {
    try {
      cp.records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw CorruptCheckpoint(e.what(), k);
    }
    if (cp.records.back().index >= cp.n_points) throw CorruptCheckpoint("point index out of range", k);
    ++k;
  }
  return cp;
}

inline void write_outputs(const std::filesystem::path& dir, const SweepResult& res, double total_wall) {
  {
    std::ofstream out(dir / "results.csv");
    if (!out) throw IoError("cannot write results.csv");
    write_results_csv(out, res);
    if (!out) throw IoError("failed writing results.csv");
  }
  json times = json::array();
  std::size_t failed = 0;
  for (const auto& r : res.records) {
    times.push_back(r.wall_time);
    if (!r.metrics) ++failed;
  }
  const json manifest{{"spec_hash", spec_hash(res.spec)},
                      {"code_version", kCodeVersion},
                      {"results_schema", kResultsSchema},
                      {"n_points", res.spec.n_points()},
                      {"completed", res.records.size()},
                      {"failed", failed},
                      {"evaluated_this_run", res.evaluated},
                      {"wall_time_this_run", total_wall},
                      {"point_wall_times", times}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest.json");
  out << manifest.dump(2) << "\n";
}

// Evaluates `pending` point indices with a worker pool; records are appended
// to the checkpoint strictly in index order.
inline std::size_t run_points(const SweepSpec& spec, const std::vector<std::size_t>& pending,
                              const SweepOptions& opt, std::ofstream& ckpt, std::vector<SweepRecord>& out) {
  std::size_t todo = pending.size();
  if (opt.max_points) todo = std::min(todo, *opt.max_points);
  if (todo == 0) return 0;
  std::vector<std::optional<SweepRecord>> slots(todo);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::condition_variable cv;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= todo) return;
      SweepRecord r = evaluate_point(spec, pending[k], opt.bundle);
      {
        std::lock_guard<std::mutex> lock(mu);
        slots[k] = std::move(r);
      }
      cv.notify_one();
    }
  };
  const unsigned nw = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(todo)));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < nw; ++w) pool.emplace_back(worker);
  for (std::size_t k = 0; k < todo; ++k) {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return slots[k].has_value(); });
    SweepRecord r = std::move(*slots[k]);
    slots[k].reset();
    lock.unlock();
    ckpt << record_to_json(r).dump() << "\n";
    ckpt.flush();
    if (!ckpt) {
      for (auto& t : pool) t.join();
      throw IoError("failed writing checkpoint");
    }
    out.push_back(std::move(r));
  }
  for (auto& t : pool) t.join();
  return todo;
}

}  // namespace detail

// Runs every point of a fresh sweep into out_dir (created if needed).
inline SweepResult run_sweep(const SweepSpec& spec, const std::filesystem::path& out_dir,
                             const SweepOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  {
    std::ofstream sj(out_dir / "spec.json");
    if (!sj) throw IoError("cannot write spec.json");
    sj << to_json(spec).dump(2) << "\n";
  }
  std::ofstream ckpt(detail::checkpoint_path(out_dir), std::ios::trunc);
  if (!ckpt) throw IoError("cannot write checkpoint");
  ckpt << json{{"spec_hash", spec_hash(spec)}, {"n_points", spec.n_points()}}.dump() << "\n";
  ckpt.flush();

  SweepResult res;
  res.spec = spec;
  std::vector<std::size_t> pending(spec.n_points());
  for (std::size_t k = 0; k < pending.size(); ++k) pending[k] = k;
  res.evaluated = detail::run_points(spec, pending, opt, ckpt, res.records);
  if (res.records.size() == spec.n_points())
    detail::write_outputs(out_dir, res, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return res;
}

// Completes a sweep from out_dir/spec.json and its checkpoint.
inline SweepResult resume(const std::filesystem::path& out_dir, const SweepOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const SweepSpec spec = load_sweep_spec((out_dir / "spec.json").string());
  detail::Checkpoint cp = detail::read_checkpoint(out_dir);
  if (cp.spec_hash != spec_hash(spec)) throw CorruptCheckpoint("spec hash does not match spec.json", -1);
  if (cp.n_points != spec.n_points()) throw CorruptCheckpoint("point count does not match spec.json", -1);

  std::vector<char> done(spec.n_points(), 0);
  for (std::size_t k = 0; k < cp.records.size(); ++k) {
    const SweepRecord& r = cp.records[k];
    if (done[r.index]) throw CorruptCheckpoint("duplicate point " + std::to_string(r.index), long(k));
    if (r.axis_values != axis_values(spec, r.index))
      throw CorruptCheckpoint("axis values of point " + std::to_string(r.index) + " do not match", long(k));
    done[r.index] = 1;
  }
  std::vector<std::size_t> pending;
  for (std::size_t k = 0; k < done.size(); ++k)
    if (!done[k]) pending.push_back(k);

  SweepResult res;
  res.spec = spec;
  res.records = std::move(cp.records);
  std::ofstream ckpt(detail::checkpoint_path(out_dir), std::ios::app);
  if (!ckpt) throw IoError("cannot append to checkpoint");
  res.evaluated = detail::run_points(spec, pending, opt, ckpt, res.records);
  std::sort(res.records.begin(), res.records.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  if (res.records.size() == spec.n_points())
    detail::write_outputs(out_dir, res, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return res;
}

}  // namespace qdc
