#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdcascade/config.hpp"
#include "qdcascade/errors.hpp"

namespace qdc {

using json = nlohmann::json;

namespace detail {

// Reads one JSON object, recording type errors and unknown keys by path.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path, std::vector<InvalidField>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) {
      errors_.push_back({path_.empty() ? "<root>" : path_, "expected an object"});
      ok_ = false;
    }
  }

  ~ObjectReader() {
    if (!ok_) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) errors_.push_back({sub(it.key()), "unknown key"});
  }

  void number(const char* key, double& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number()) return bad(key, "expected a number");
    out = v->get<double>();
  }
  void optional_number(const char* key, std::optional<double>& out) {
    const json* v = find(key);
    if (!v) return;
    if (v->is_null()) return out.reset();
    if (!v->is_number()) return bad(key, "expected a number or null");
    out = v->get<double>();
  }
  void integer(const char* key, int& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number_integer()) return bad(key, "expected an integer");
    out = v->get<int>();
  }
  void boolean(const char* key, bool& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_boolean()) return bad(key, "expected true or false");
    out = v->get<bool>();
  }
  template <class E>
  void enumeration(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
    const json* v = find(key);
    if (!v) return;
    if (v->is_string())
      for (const auto& [name, value] : names)
        if (v->get<std::string>() == name) {
          out = value;
          return;
        }
    std::string allowed;
    for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    bad(key, "expected one of: " + allowed);
  }
  const json* object(const char* key) { return find(key); }
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json* find(const char* key) {
    if (!ok_) return nullptr;
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  void bad(const char* key, const std::string& reason) { errors_.push_back({sub(key), reason}); }

  const json& j_;
  std::string path_;
  std::vector<InvalidField>& errors_;
  std::set<std::string> seen_;
  bool ok_ = true;
};

}  // namespace detail

inline constexpr std::initializer_list<std::pair<const char*, InitialState>> kInitialStateNames = {
    {"ground", InitialState::Ground},
    {"biexciton", InitialState::Biexciton},
    {"exciton_h", InitialState::ExcitonH}};

inline const char* to_string(InitialState s) {
  for (const auto& [n, v] : kInitialStateNames)
    if (v == s) return n;
  return "?";
}

inline const char* to_string(ConcurrenceOrder o) {
  return o == ConcurrenceOrder::Cascade ? "cascade" : "reversed";
}

// Missing keys keep their defaults; unknown keys and wrong types are errors.
inline SystemConfig config_from_json(const json& j) {
  SystemConfig c;
  std::vector<InvalidField> errors;
  {
    detail::ObjectReader root(j, "", errors);
    if (const json* s = root.object("electronic")) {
      detail::ObjectReader r(*s, "electronic", errors);
      r.number("E_X", c.electronic.E_X);
      r.number("E_FSP", c.electronic.E_FSP);
      r.number("E_Bind", c.electronic.E_Bind);
      r.number("hbar_gamma_rad", c.electronic.hbar_gamma_rad);
      r.number("xx_rate_ratio", c.electronic.xx_rate_ratio);
    }
    if (const json* s = root.object("cavity")) {
      detail::ObjectReader r(*s, "cavity", errors);
      r.boolean("enabled", c.cavity.enabled);
      r.optional_number("E_cavity", c.cavity.E_cavity);
      r.number("hbar_g", c.cavity.hbar_g);
      r.number("hbar_kappa", c.cavity.hbar_kappa);
      r.integer("n_max", c.cavity.n_max);
    }
    if (const json* s = root.object("pulse")) {
      detail::ObjectReader r(*s, "pulse", errors);
      r.boolean("enabled", c.pulse.enabled);
      r.number("area", c.pulse.area);
      r.number("width_tau", c.pulse.width_tau);
      r.number("center_t0", c.pulse.center_t0);
      r.optional_number("laser_energy", c.pulse.laser_energy);
      r.number("polarization_angle_deg", c.pulse.polarization_angle_deg);
    }
    if (const json* s = root.object("grid")) {
      detail::ObjectReader r(*s, "grid", errors);
      r.number("t_end", c.grid.t_end);
      r.number("fine_window", c.grid.fine_window);
      r.number("dt_fine", c.grid.dt_fine);
      r.number("dt_coarse", c.grid.dt_coarse);
    }
    if (const json* s = root.object("dephasing")) {
      detail::ObjectReader r(*s, "dephasing", errors);
      r.boolean("enabled", c.dephasing.enabled);
      r.number("hbar_gamma_deph", c.dephasing.hbar_gamma_deph);
    }
    root.enumeration("initial_state", c.initial_state, kInitialStateNames);
    if (const json* s = root.object("options")) {
      detail::ObjectReader r(*s, "options", errors);
      r.boolean("x_channel_includes_cavity", c.options.x_channel_includes_cavity);
      r.boolean("freeze_pulse_in_tau", c.options.freeze_pulse_in_tau);
      r.enumeration("concurrence_order", c.options.concurrence_order,
                    {{"cascade", ConcurrenceOrder::Cascade}, {"reversed", ConcurrenceOrder::Reversed}});
    }
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return c;
}

inline json to_json(const SystemConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{
      {"electronic",
       {{"E_X", c.electronic.E_X},
        {"E_FSP", c.electronic.E_FSP},
        {"E_Bind", c.electronic.E_Bind},
        {"hbar_gamma_rad", c.electronic.hbar_gamma_rad},
        {"xx_rate_ratio", c.electronic.xx_rate_ratio}}},
      {"cavity",
       {{"enabled", c.cavity.enabled},
        {"E_cavity", opt(c.cavity.E_cavity)},
        {"hbar_g", c.cavity.hbar_g},
        {"hbar_kappa", c.cavity.hbar_kappa},
        {"n_max", c.cavity.n_max}}},
      {"pulse",
       {{"enabled", c.pulse.enabled},
        {"area", c.pulse.area},
        {"width_tau", c.pulse.width_tau},
        {"center_t0", c.pulse.center_t0},
        {"laser_energy", opt(c.pulse.laser_energy)},
        {"polarization_angle_deg", c.pulse.polarization_angle_deg}}},
      {"grid",
       {{"t_end", c.grid.t_end},
        {"fine_window", c.grid.fine_window},
        {"dt_fine", c.grid.dt_fine},
        {"dt_coarse", c.grid.dt_coarse}}},
      {"dephasing", {{"enabled", c.dephasing.enabled}, {"hbar_gamma_deph", c.dephasing.hbar_gamma_deph}}},
      {"initial_state", to_string(c.initial_state)},
      {"options",
       {{"x_channel_includes_cavity", c.options.x_channel_includes_cavity},
        {"freeze_pulse_in_tau", c.options.freeze_pulse_in_tau},
        {"concurrence_order", to_string(c.options.concurrence_order)}}}};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline SystemConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

inline void save_config(const std::string& path, const SystemConfig& c) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << to_json(c).dump(2) << "\n";
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Hash of the canonical JSON form (keys sorted, every field present).
inline std::string config_hash(const SystemConfig& c) { return hex64(fnv1a(to_json(c).dump())); }

}  // namespace qdc
