#include "mesopt/scenario.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mesopt {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view level_name(Level level) {
  switch (level) {
    case Level::Prosumer: return "prosumer";
    case Level::District: return "district";
    case Level::City: return "city";
  }
  return "?";
}

namespace {

std::string join(const std::vector<std::string>& lines, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += sep;
    out += lines[i];
  }
  return out;
}

// ---------------------------------------------------------------- schema

class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& message) { errors.push_back(path + ": " + message); }

  bool object(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    for (const auto& [key, _] : j.items()) {
      bool known = false;
      for (auto a : allowed) known = known || a == key;
      if (!known) fail(path + "." + key, "unknown field");
    }
    return true;
  }

  const json* field(const json& obj, const std::string& path, std::string_view key, bool required) {
    auto it = obj.find(std::string(key));
    if (it == obj.end() || it->is_null()) {
      if (required) fail(path + "." + std::string(key), "required field is missing");
      return nullptr;
    }
    return &*it;
  }

  std::optional<std::string> string(const json& obj, const std::string& path, std::string_view key,
                                    bool required = false) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_string() || v->get_ref<const std::string&>().empty()) {
      fail(path + "." + std::string(key), "expected a non-empty string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<double> number(const json& obj, const std::string& path, std::string_view key,
                               bool required = false, double lo = -kInf, double hi = kInf) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    return number_value(*v, path + "." + std::string(key), lo, hi);
  }

  std::optional<double> number_value(const json& v, const std::string& where, double lo = -kInf,
                                     double hi = kInf) {
    if (!v.is_number()) {
      fail(where, "expected a number");
      return std::nullopt;
    }
    double x = v.get<double>();
    if (!(x >= lo && x <= hi)) {
      fail(where, "value " + format_real(x) + " outside [" + format_real(lo) + ", " + format_real(hi) + "]");
      return std::nullopt;
    }
    return x;
  }

  /// A number or the string "unlimited".
  std::optional<double> amount(const json& obj, const std::string& path, std::string_view key,
                               bool required = false) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (v->is_string() && v->get_ref<const std::string&>() == "unlimited") return kInf;
    if (!v->is_number()) {
      fail(path + "." + std::string(key), "expected a number or \"unlimited\"");
      return std::nullopt;
    }
    return number_value(*v, path + "." + std::string(key), 0.0);
  }

  std::optional<std::size_t> count(const json& obj, const std::string& path, std::string_view key,
                                   bool required = false, std::size_t min = 0) {
    const json* v = field(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer() || v->get<long long>() < static_cast<long long>(min)) {
      fail(path + "." + std::string(key), "expected an integer >= " + std::to_string(min));
      return std::nullopt;
    }
    return v->get<std::size_t>();
  }

  std::optional<bool> boolean(const json& obj, const std::string& path, std::string_view key) {
    const json* v = field(obj, path, key, false);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      fail(path + "." + std::string(key), "expected true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  template <class T>
  std::optional<T> choice(const json& obj, const std::string& path, std::string_view key,
                          std::optional<T> (*parse)(std::string_view), std::string_view expected,
                          bool required = false) {
    auto s = string(obj, path, key, required);
    if (!s) return std::nullopt;
    auto v = parse(*s);
    if (!v) fail(path + "." + std::string(key), "'" + *s + "' is not one of " + std::string(expected));
    return v;
  }

  const json* array(const json& obj, const std::string& path, std::string_view key, bool required = false) {
    const json* v = field(obj, path, key, required);
    if (!v) return nullptr;
    if (!v->is_array()) {
      fail(path + "." + std::string(key), "expected an array");
      return nullptr;
    }
    return v;
  }
};

std::optional<Level> parse_level(std::string_view s) {
  for (Level l : {Level::Prosumer, Level::District, Level::City})
    if (level_name(l) == s) return l;
  return std::nullopt;
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "sizing") return Mode::Sizing;
  if (s == "operation") return Mode::Operation;
  return std::nullopt;
}

constexpr std::string_view kCarriers = "electricity, heat, cooling, gas, hydrogen";
constexpr std::string_view kArchetypes = "Generator, Storage, Converter, GridConnection, Demand";
constexpr std::string_view kObjectives = "Annuity, OperatingCost, CO2, SelfConsumption, Custom";

/// Remembers what the cross-reference pass needs to check.
struct References {
  std::vector<std::pair<std::string, std::string>> profiles;  // (path, profile name)
  bool needs_interest = false;
  std::string interest_user;
};

class ScenarioParser {
 public:
  ScenarioParser(Reader& r, References& refs, const std::map<std::string, json>& templates)
      : r_(r), refs_(refs), templates_(templates) {}

  std::optional<ObjectiveSpec> objective(const json& j, const std::string& path) {
    if (!r_.object(j, path, {"kind", "terms"})) return std::nullopt;
    auto kind = r_.choice<ObjectiveKind>(j, path, "kind", parse_objective_kind, kObjectives, true);
    if (!kind) return std::nullopt;
    ObjectiveSpec spec;
    spec.kind = *kind;
    if (const json* terms = r_.field(j, path, "terms", *kind == ObjectiveKind::Custom)) {
      if (*kind != ObjectiveKind::Custom) r_.fail(path + ".terms", "only used by kind Custom");
      else if (!terms->is_object() || terms->empty())
        r_.fail(path + ".terms", "expected a non-empty object of quantity weights");
      else
        for (const auto& [q, w] : terms->items())
          if (auto x = r_.number_value(w, path + ".terms." + q)) spec.custom_terms[q] = *x;
    }
    bool annuity = *kind == ObjectiveKind::Annuity || spec.custom_terms.count("annuity");
    if (annuity && !refs_.needs_interest) {
      refs_.needs_interest = true;
      refs_.interest_user = path;
    }
    return spec;
  }

  std::optional<ComponentSpec> component(const json& given, const std::string& path) {
    if (!given.is_object()) {
      r_.fail(path, "expected an object");
      return std::nullopt;
    }
    json j = given;
    if (auto it = given.find("template"); it != given.end()) {
      if (!it->is_string()) {
        r_.fail(path + ".template", "expected a string");
        return std::nullopt;
      }
      auto t = templates_.find(it->get<std::string>());
      if (t == templates_.end()) {
        r_.fail(path + ".template", "unknown template '" + it->get<std::string>() + "'");
        return std::nullopt;
      }
      j = t->second;
      for (const auto& [k, v] : given.items())
        if (k != "template") j[k] = v;
    }
    if (!r_.object(j, path, {"name", "type", "carrier", "carrier_in", "carrier_out", "capacity", "max_capacity",
                             "efficiency", "charge_efficiency", "discharge_efficiency", "conversion_ratio",
                             "power_limit", "exclusive_charging", "capex_per_unit", "opex_per_unit_energy",
                             "co2_per_unit_energy", "lifetime_years", "profile", "bidirectional", "mode",
                             "description"}))
      return std::nullopt;
    const std::size_t before = r_.errors.size();
    ComponentSpec s;
    s.name = r_.string(j, path, "name", true).value_or("");
    if (auto a = r_.choice<Archetype>(j, path, "type", parse_archetype, kArchetypes, true)) s.archetype = *a;
    auto carrier = r_.choice<Carrier>(j, path, "carrier", parse_carrier, kCarriers);
    s.carrier_in = r_.choice<Carrier>(j, path, "carrier_in", parse_carrier, kCarriers);
    s.carrier_out = r_.choice<Carrier>(j, path, "carrier_out", parse_carrier, kCarriers);
    if (carrier) {
      if (s.carrier_in || s.carrier_out) r_.fail(path + ".carrier", "give either carrier or carrier_in/carrier_out");
      switch (s.archetype) {
        case Archetype::Generator: s.carrier_out = carrier; break;
        case Archetype::Converter: r_.fail(path + ".carrier", "converters need carrier_in and carrier_out"); break;
        default: s.carrier_in = carrier;
      }
    }
    s.capacity = r_.amount(j, path, "capacity");
    s.max_capacity = r_.amount(j, path, "max_capacity");
    s.efficiency = r_.number(j, path, "efficiency", false, 0.0).value_or(s.efficiency);
    s.charge_efficiency = r_.number(j, path, "charge_efficiency", false, 0.0).value_or(s.charge_efficiency);
    s.discharge_efficiency = r_.number(j, path, "discharge_efficiency", false, 0.0).value_or(s.discharge_efficiency);
    s.conversion_ratio = r_.number(j, path, "conversion_ratio", false, 0.0).value_or(s.conversion_ratio);
    s.power_limit = r_.number(j, path, "power_limit", false, 0.0);
    s.exclusive_charging = r_.boolean(j, path, "exclusive_charging").value_or(false);
    s.capex_per_unit = r_.number(j, path, "capex_per_unit", false, 0.0).value_or(0.0);
    s.opex_per_unit_energy = r_.number(j, path, "opex_per_unit_energy", false).value_or(0.0);
    s.co2_per_unit_energy = r_.number(j, path, "co2_per_unit_energy", false).value_or(0.0);
    if (auto n = r_.count(j, path, "lifetime_years", false, 1)) s.lifetime_years = static_cast<int>(*n);
    s.profile = r_.string(j, path, "profile");
    s.bidirectional = r_.boolean(j, path, "bidirectional").value_or(false);
    s.mode = r_.choice<Mode>(j, path, "mode", parse_mode, "sizing, operation");
    if (r_.errors.size() != before) return std::nullopt;
    for (const auto& m : validate_spec(s)) r_.fail(path, m);
    if (s.profile) refs_.profiles.emplace_back(path + ".profile", *s.profile);
    return s;
  }

  std::vector<ComponentSpec> components(const json& obj, const std::string& path, std::string_view key,
                                        bool required) {
    std::vector<ComponentSpec> out;
    if (const json* arr = r_.array(obj, path, key, required))
      for (std::size_t i = 0; i < arr->size(); ++i)
        if (auto c = component((*arr)[i], path + "." + std::string(key) + "[" + std::to_string(i) + "]"))
          out.push_back(std::move(*c));
    return out;
  }

  ProsumerTopology topology(const json& j, const std::string& path) {
    ProsumerTopology t;
    if (!r_.object(j, path, {"name", "components", "buses", "links", "frozen"})) return t;
    t.name = r_.string(j, path, "name", true).value_or("");
    t.components = components(j, path, "components", true);
    if (const json* buses = r_.array(j, path, "buses"))
      for (std::size_t i = 0; i < buses->size(); ++i) {
        std::string p = path + ".buses[" + std::to_string(i) + "]";
        if (!r_.object((*buses)[i], p, {"name", "carrier"})) continue;
        auto name = r_.string((*buses)[i], p, "name", true);
        auto c = r_.choice<Carrier>((*buses)[i], p, "carrier", parse_carrier, kCarriers, true);
        if (name && c) t.buses.push_back({*name, *c});
      }
    if (const json* links = r_.array(j, path, "links"))
      for (std::size_t i = 0; i < links->size(); ++i) {
        std::string p = path + ".links[" + std::to_string(i) + "]";
        if (!r_.object((*links)[i], p, {"from", "to", "directed"})) continue;
        auto from = r_.string((*links)[i], p, "from", true);
        auto to = r_.string((*links)[i], p, "to", true);
        bool directed = r_.boolean((*links)[i], p, "directed").value_or(true);
        if (from && to) t.links.push_back({endpoint(*from), endpoint(*to), directed});
      }
    return t;
  }

  std::optional<std::map<std::string, double>> frozen(const json& j, const std::string& path) {
    const json* f = r_.field(j, path, "frozen", false);
    if (!f) return std::nullopt;
    if (!f->is_object()) {
      r_.fail(path + ".frozen", "expected an object of capacities");
      return std::nullopt;
    }
    std::map<std::string, double> out;
    for (const auto& [k, v] : f->items())
      if (auto x = r_.number_value(v, path + ".frozen." + k, 0.0)) out[k] = *x;
    return out;
  }

  DistrictModel district(const json& j, const std::string& path) {
    DistrictModel d;
    if (!r_.object(j, path, {"name", "members", "central", "grids", "peak_import_limit"})) return d;
    d.name = r_.string(j, path, "name", true).value_or("");
    if (const json* members = r_.array(j, path, "members", true)) {
      if (members->empty()) r_.fail(path + ".members", "a district needs at least one member");
      for (std::size_t i = 0; i < members->size(); ++i) {
        std::string p = path + ".members[" + std::to_string(i) + "]";
        DistrictMember m;
        m.topology = topology((*members)[i], p);
        if ((*members)[i].is_object()) m.frozen = frozen((*members)[i], p);
        d.members.push_back(std::move(m));
      }
    }
    d.central = components(j, path, "central", false);
    if (const json* grids = r_.array(j, path, "grids"))
      for (std::size_t i = 0; i < grids->size(); ++i) {
        std::string p = path + ".grids[" + std::to_string(i) + "]";
        if (!r_.object((*grids)[i], p, {"carrier", "import_capacity", "export_capacity"})) continue;
        DistrictGrid g;
        if (auto c = r_.choice<Carrier>((*grids)[i], p, "carrier", parse_carrier, kCarriers, true)) g.carrier = *c;
        g.import_capacity = r_.amount((*grids)[i], p, "import_capacity").value_or(kInf);
        g.export_capacity = r_.amount((*grids)[i], p, "export_capacity").value_or(kInf);
        d.grids.push_back(g);
      }
    d.peak_import_limit = r_.number(j, path, "peak_import_limit", false, 0.0);
    return d;
  }

  CityModel city(const json& j, const std::string& path) {
    CityModel c;
    if (!r_.object(j, path, {"name", "districts", "flexibility_kw", "links", "plants", "slack"})) return c;
    c.name = r_.string(j, path, "name", true).value_or("");
    if (const json* ds = r_.array(j, path, "districts", true)) {
      if (ds->empty()) r_.fail(path + ".districts", "a city needs at least one district");
      for (std::size_t i = 0; i < ds->size(); ++i)
        c.districts.push_back(district((*ds)[i], path + ".districts[" + std::to_string(i) + "]"));
    }
    if (const json* f = r_.field(j, path, "flexibility_kw", false)) {
      if (!f->is_object()) r_.fail(path + ".flexibility_kw", "expected an object keyed by district");
      else
        for (const auto& [k, v] : f->items())
          if (auto x = r_.number_value(v, path + ".flexibility_kw." + k, 0.0)) c.flexibility_kw[k] = *x;
    }
    if (const json* links = r_.array(j, path, "links"))
      for (std::size_t i = 0; i < links->size(); ++i) {
        std::string p = path + ".links[" + std::to_string(i) + "]";
        if (!r_.object((*links)[i], p, {"from", "to", "carrier", "capacity_kw", "bidirectional"})) continue;
        Interconnection l;
        l.from = r_.string((*links)[i], p, "from", true).value_or("");
        l.to = r_.string((*links)[i], p, "to", true).value_or("");
        l.carrier = r_.choice<Carrier>((*links)[i], p, "carrier", parse_carrier, kCarriers).value_or(Carrier::Electricity);
        l.capacity_kw = r_.amount((*links)[i], p, "capacity_kw", true).value_or(0.0);
        l.bidirectional = r_.boolean((*links)[i], p, "bidirectional").value_or(false);
        c.links.push_back(std::move(l));
      }
    if (const json* plants = r_.array(j, path, "plants"))
      for (std::size_t i = 0; i < plants->size(); ++i) {
        std::string p = path + ".plants[" + std::to_string(i) + "]";
        if (!r_.object((*plants)[i], p, {"node", "component"})) continue;
        auto node = r_.string((*plants)[i], p, "node", true);
        const json* comp = r_.field((*plants)[i], p, "component", true);
        if (!comp) continue;
        auto spec = component(*comp, p + ".component");
        if (node && spec) c.plants.push_back({*node, std::move(*spec)});
      }
    if (const json* slack = r_.array(j, path, "slack"))
      for (std::size_t i = 0; i < slack->size(); ++i) {
        std::string p = path + ".slack[" + std::to_string(i) + "]";
        if (!r_.object((*slack)[i], p, {"carrier", "import_capacity", "export_capacity"})) continue;
        SlackGrid g;
        if (auto car = r_.choice<Carrier>((*slack)[i], p, "carrier", parse_carrier, kCarriers, true)) g.carrier = *car;
        g.import_capacity = r_.amount((*slack)[i], p, "import_capacity").value_or(kInf);
        g.export_capacity = r_.amount((*slack)[i], p, "export_capacity").value_or(kInf);
        c.slack.push_back(g);
      }
    return c;
  }

  std::map<Carrier, PriceSeries> prices(const json& j, const std::string& path, std::string_view key) {
    std::map<Carrier, PriceSeries> out;
    const json* p = r_.field(j, path, key, false);
    if (!p) return out;
    const std::string where = path + "." + std::string(key);
    if (!p->is_object()) {
      r_.fail(where, "expected an object keyed by carrier");
      return out;
    }
    for (const auto& [name, v] : p->items()) {
      auto c = parse_carrier(name);
      if (!c) {
        r_.fail(where + "." + name, "unknown carrier");
        continue;
      }
      if (v.is_string()) {
        out[*c] = {0.0, v.get<std::string>()};
        refs_.profiles.emplace_back(where + "." + name, v.get<std::string>());
      } else if (auto x = r_.number_value(v, where + "." + name)) {
        out[*c] = {*x, std::nullopt};
      }
    }
    return out;
  }

 private:
  static Endpoint endpoint(const std::string& text) {
    auto dot = text.find('.');
    if (dot == std::string::npos) return {text, ""};
    return {text.substr(0, dot), text.substr(dot + 1)};
  }

  Reader& r_;
  References& refs_;
  const std::map<std::string, json>& templates_;
};

// ---------------------------------------------------------------- files

json parse_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ":" + std::to_string(column) +
                                           ": malformed JSON (" + e.what() + ")");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) fields.push_back(cur);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

/// Columns of a profile CSV (first column "timestamp", ignored).
std::vector<std::pair<std::string, std::vector<double>>> read_profile_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
  std::vector<std::pair<std::string, std::vector<double>>> cols;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (cols.empty()) {
      if (fields.size() < 2 || trim(fields[0]) != "timestamp")
        throw Error(ErrorCode::ParseError, where() + ": header must start with 'timestamp' and name one or more columns");
      for (std::size_t i = 1; i < fields.size(); ++i) cols.push_back({trim(fields[i]), {}});
      continue;
    }
    if (fields.size() != cols.size() + 1)
      throw Error(ErrorCode::ParseError, where() + ": expected " + std::to_string(cols.size() + 1) + " fields, found " +
                                             std::to_string(fields.size()));
    for (std::size_t i = 1; i < fields.size(); ++i) {
      std::string f = trim(fields[i]);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw Error(ErrorCode::ParseError, where() + ": '" + f + "' in column '" + cols[i - 1].first + "' is not a number");
      cols[i - 1].second.push_back(v);
    }
  }
  if (cols.empty()) throw Error(ErrorCode::ParseError, path.string() + ": empty profile file");
  return cols;
}

std::optional<std::chrono::sys_seconds> parse_timestamp(const std::string& text) {
  int y, mo, d, h = 0, mi = 0, s = 0;
  char tail = 0;
  int n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s, &tail);
  if (n != 6 && n != 3) return std::nullopt;
  if (n == 3 && text.size() != 10) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(mo), std::chrono::day(d)};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0) return std::nullopt;
  return std::chrono::sys_days(ymd) + std::chrono::hours(h) + std::chrono::minutes(mi) + std::chrono::seconds(s);
}

std::string format_timestamp(std::chrono::sys_seconds tp) {
  auto day = std::chrono::floor<std::chrono::days>(tp);
  std::chrono::year_month_day ymd(day);
  std::chrono::hh_mm_ss hms(tp - day);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

std::vector<std::string> timestamps(const ScenarioConfig& config) {
  auto start = parse_timestamp(config.start).value_or(std::chrono::sys_seconds{});
  std::vector<std::string> out;
  out.reserve(config.horizon.steps);
  for (std::size_t t = 0; t < config.horizon.steps; ++t)
    out.push_back(format_timestamp(
        start + std::chrono::seconds(std::llround(static_cast<double>(t) * config.horizon.dt_hours * 3600.0))));
  return out;
}

}  // namespace

// ---------------------------------------------------------------- loading

ScenarioConfig load_scenario(const fs::path& path) {
  const fs::path source = fs::absolute(path).lexically_normal();
  if (!fs::exists(source)) throw Error(ErrorCode::MissingFile, "scenario file '" + source.string() + "' does not exist");
  const fs::path base = source.parent_path();
  json doc = parse_json_file(source);

  Reader r;
  References refs;
  ScenarioConfig cfg;
  cfg.source = source;
  const std::string root = "$";
  if (!r.object(doc, root, {"name", "description", "level", "mode", "horizon", "objective", "pareto", "cost",
                            "aggregation", "solver", "reference", "profiles", "library", "prosumer", "district",
                            "city"}))
    throw Error(ErrorCode::SchemaError, source.string() + ": " + join(r.errors, "; "));

  std::vector<std::string> missing;
  auto resolve = [&](const std::string& rel) { return (base / rel).lexically_normal(); };

  std::map<std::string, json> templates;
  if (const json* libs = r.array(doc, root, "library"))
    for (std::size_t i = 0; i < libs->size(); ++i) {
      std::string p = "$.library[" + std::to_string(i) + "]";
      if (!(*libs)[i].is_string()) {
        r.fail(p, "expected a file name");
        continue;
      }
      fs::path file = resolve((*libs)[i].get<std::string>());
      if (!fs::exists(file)) {
        missing.push_back(file.string());
        continue;
      }
      json lib = parse_json_file(file);
      std::string lp = file.filename().string();
      if (!r.object(lib, lp, {"components", "description"})) continue;
      if (const json* comps = r.array(lib, lp, "components", true))
        for (std::size_t k = 0; k < comps->size(); ++k) {
          const json& c = (*comps)[k];
          std::string cp = lp + ".components[" + std::to_string(k) + "]";
          if (!c.is_object() || !c.contains("name") || !c["name"].is_string()) {
            r.fail(cp, "a template needs a name");
            continue;
          }
          if (!templates.emplace(c["name"].get<std::string>(), c).second)
            r.fail(cp, "duplicate template '" + c["name"].get<std::string>() + "'");
        }
    }

  ScenarioParser parse(r, refs, templates);
  cfg.name = r.string(doc, root, "name", true).value_or("");
  if (auto l = r.choice<Level>(doc, root, "level", parse_level, "prosumer, district, city", true)) cfg.level = *l;
  cfg.mode = r.choice<Mode>(doc, root, "mode", parse_mode, "sizing, operation").value_or(Mode::Operation);

  if (const json* h = r.field(doc, root, "horizon", true); h && r.object(*h, "$.horizon", {"steps", "dt_hours", "start"})) {
    cfg.horizon.steps = r.count(*h, "$.horizon", "steps", true, 1).value_or(1);
    cfg.horizon.dt_hours = r.number(*h, "$.horizon", "dt_hours", false, 1e-9).value_or(1.0);
    if (auto s = r.string(*h, "$.horizon", "start")) {
      if (parse_timestamp(*s)) cfg.start = *s;
      else r.fail("$.horizon.start", "expected an ISO-8601 timestamp like 2020-01-01T00:00:00");
    }
  }

  if (const json* o = r.field(doc, root, "objective", true))
    if (auto spec = parse.objective(*o, "$.objective")) cfg.objective = *spec;

  if (const json* p = r.field(doc, root, "pareto", false); p && r.object(*p, "$.pareto", {"objective", "points"})) {
    ParetoSettings ps;
    if (const json* o = r.field(*p, "$.pareto", "objective", true))
      if (auto spec = parse.objective(*o, "$.pareto.objective")) ps.second = *spec;
    ps.points = r.count(*p, "$.pareto", "points", false, 2).value_or(5);
    cfg.pareto = ps;
  }

  bool has_interest = false;
  if (const json* c = r.field(doc, root, "cost", false);
      c && r.object(*c, "$.cost", {"interest_rate", "import_price", "export_remuneration", "co2_factor"})) {
    if (auto i = r.number(*c, "$.cost", "interest_rate", false, 0.0, 1.0)) {
      cfg.cost.interest_rate = *i;
      has_interest = true;
    }
    cfg.cost.import_price = parse.prices(*c, "$.cost", "import_price");
    cfg.cost.export_remuneration = parse.prices(*c, "$.cost", "export_remuneration");
    if (const json* f = r.field(*c, "$.cost", "co2_factor", false)) {
      if (!f->is_object()) r.fail("$.cost.co2_factor", "expected an object keyed by carrier");
      else
        for (const auto& [name, v] : f->items()) {
          auto car = parse_carrier(name);
          if (!car) r.fail("$.cost.co2_factor." + name, "unknown carrier");
          else if (auto x = r.number_value(v, "$.cost.co2_factor." + name, 0.0)) cfg.cost.co2_factor[*car] = *x;
        }
    }
  }

  if (const json* a = r.field(doc, root, "aggregation", false)) {
    if (a->is_string() && a->get<std::string>() == "off") {
    } else if (r.object(*a, "$.aggregation", {"period_length", "k"})) {
      AggregationSettings s;
      s.period_length = r.count(*a, "$.aggregation", "period_length", true, 1).value_or(1);
      s.k = r.count(*a, "$.aggregation", "k", true, 1).value_or(1);
      cfg.aggregation = s;
    }
  }

  if (const json* s = r.field(doc, root, "solver", false); s && r.object(*s, "$.solver", {"rel_gap", "node_limit"})) {
    cfg.solver.rel_gap = r.number(*s, "$.solver", "rel_gap", false, 0.0, 1.0).value_or(cfg.solver.rel_gap);
    cfg.solver.node_limit = r.count(*s, "$.solver", "node_limit", false, 1).value_or(cfg.solver.node_limit);
  }
  cfg.reference = r.boolean(doc, root, "reference").value_or(false);

  for (Level l : {Level::Prosumer, Level::District, Level::City}) {
    std::string key(level_name(l));
    const json* section = r.field(doc, root, key, l == cfg.level && doc.contains("level"));
    if (!section) continue;
    if (l != cfg.level) {
      r.fail("$." + key, "not used at level " + std::string(level_name(cfg.level)));
      continue;
    }
    switch (l) {
      case Level::Prosumer: cfg.prosumer = parse.topology(*section, "$.prosumer"); break;
      case Level::District: cfg.district = parse.district(*section, "$.district"); break;
      case Level::City: cfg.city = parse.city(*section, "$.city"); break;
    }
  }

  if (refs.needs_interest && !has_interest)
    r.fail("$.cost.interest_rate", "required by " + refs.interest_user + " (annualized investment)");

  std::vector<std::pair<std::string, std::string>> origin;  // profile name -> file
  if (const json* files = r.array(doc, root, "profiles"))
    for (std::size_t i = 0; i < files->size(); ++i) {
      std::string p = "$.profiles[" + std::to_string(i) + "]";
      if (!(*files)[i].is_string()) {
        r.fail(p, "expected a file name");
        continue;
      }
      fs::path file = resolve((*files)[i].get<std::string>());
      if (!fs::exists(file)) {
        missing.push_back(file.string());
        continue;
      }
      cfg.profile_files.push_back(file);
      for (auto& [name, values] : read_profile_csv(file)) {
        if (values.size() != cfg.horizon.steps)
          r.fail(p, "'" + file.filename().string() + "' column '" + name + "' has " + std::to_string(values.size()) +
                        " rows, the horizon has " + std::to_string(cfg.horizon.steps));
        if (!cfg.profiles.emplace(name, std::move(values)).second)
          r.fail(p, "profile '" + name + "' is defined twice");
      }
    }
  if (!missing.empty())
    throw Error(ErrorCode::MissingFile, source.string() + ": missing file " + join(missing, ", missing file "));

  for (const auto& [where, name] : refs.profiles)
    if (!cfg.profiles.count(name)) r.fail(where, "unknown profile '" + name + "'");

  if (cfg.aggregation) {
    const auto& a = *cfg.aggregation;
    if (cfg.horizon.steps % a.period_length != 0)
      r.fail("$.aggregation.period_length", std::to_string(a.period_length) + " does not divide the horizon of " +
                                                std::to_string(cfg.horizon.steps) + " steps");
    else if (a.k > cfg.horizon.steps / a.period_length)
      r.fail("$.aggregation.k", "more typical periods than the horizon has periods");
    if (cfg.profiles.empty()) r.fail("$.aggregation", "aggregation needs at least one profile");
  }

  if (!r.errors.empty())
    throw Error(ErrorCode::SchemaError, source.string() + ": " + std::to_string(r.errors.size()) +
                                           " schema violation(s): " + join(r.errors, "; "));
  return cfg;
}

std::vector<std::string> check_topologies(const ScenarioConfig& config) {
  std::vector<std::string> out;
  auto check = [&](const ProsumerTopology& t, const std::string& where) {
    for (const auto& v : validate_topology(t))
      out.push_back(where + ": " + std::string(violation_kind_name(v.kind)) + ": " + v.message);
  };
  auto district = [&](const DistrictModel& d, const std::string& where) {
    std::set<std::string> names;
    for (const auto& m : d.members) {
      if (!names.insert(m.topology.name).second)
        out.push_back(where + ": duplicate-name: member '" + m.topology.name + "' appears twice");
      check(m.topology, where + ": prosumer '" + m.topology.name + "'");
    }
    for (const auto& c : d.central)
      if (c.archetype == Archetype::Converter || c.archetype == Archetype::Demand)
        out.push_back(where + ": invalid-component: central component '" + c.name + "' must be a " +
                      "Generator, Storage or GridConnection");
  };
  switch (config.level) {
    case Level::Prosumer: check(config.prosumer, "prosumer '" + config.prosumer.name + "'"); break;
    case Level::District: district(config.district, "district '" + config.district.name + "'"); break;
    case Level::City: {
      std::set<std::string> names;
      for (const auto& d : config.city.districts) {
        if (!names.insert(d.name).second) out.push_back("city: duplicate-name: district '" + d.name + "' appears twice");
        district(d, "city '" + config.city.name + "': district '" + d.name + "'");
      }
      for (const auto& l : config.city.links)
        for (const auto& n : {l.from, l.to})
          if (!names.count(n)) out.push_back("city '" + config.city.name + "': unknown-reference: link endpoint '" + n + "'");
      for (const auto& p : config.city.plants)
        if (!names.count(p.node))
          out.push_back("city '" + config.city.name + "': unknown-reference: plant '" + p.spec.name + "' at node '" +
                        p.node + "'");
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------- running

namespace {

struct Prepared {
  Horizon horizon;
  ProfileMap profiles;
  std::optional<TypicalPeriodSet> set;
};

Prepared prepare(const ScenarioConfig& config) {
  Prepared p{config.horizon, config.profiles, std::nullopt};
  if (config.aggregation) {
    auto a = aggregate_series(config.profiles, config.aggregation->period_length, config.aggregation->k);
    p.horizon = a.set.horizon(config.horizon.dt_hours);
    p.profiles = std::move(a.profiles);
    p.set = std::move(a.set);
  }
  return p;
}

void check_topologies_or_throw(const ScenarioConfig& config) {
  auto v = check_topologies(config);
  if (!v.empty()) throw Error(ErrorCode::InvalidTopology, join(v, "; "));
}

template <class F>
auto in_scenario(const ScenarioConfig& config, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw e.with_context("scenario '" + config.name + "'");
  }
}

}  // namespace

namespace {

ResultBundle run_pipeline(const ScenarioConfig& config) {
  {
    const auto t0 = std::chrono::steady_clock::now();
    check_topologies_or_throw(config);
    Prepared prep = prepare(config);
    ResultBundle b;
    b.scenario = config.name;
    b.level = config.level;
    b.timestamps = timestamps(config);
    b.aggregation = prep.set;

    std::vector<std::string> labels;
    std::vector<std::size_t> final_levels;
    auto add = [&](LevelResult r, std::string label, bool final) {
      if (final) final_levels.push_back(b.levels.size());
      labels.push_back(std::move(label));
      b.levels.push_back(std::move(r));
    };
    const auto& obj = config.objective;
    const auto& cost = config.cost;
    switch (config.level) {
      case Level::Prosumer: {
        add(optimize_prosumer(config.prosumer, prep.horizon, config.mode, obj, cost, prep.profiles, config.solver),
            "L1/" + config.prosumer.name, true);
        if (config.reference) {
          auto mono = monolithic_reference(config.prosumer, prep.horizon, config.mode, obj, cost, prep.profiles,
                                           config.solver);
          double bu = bottom_up_objective(mono, {&b.levels[0]});
          b.decomposition = DecompositionReport{mono.objective, bu, bu - mono.objective};
        }
        break;
      }
      case Level::District: {
        auto run = run_district(config.district, prep.horizon, config.mode, obj, cost, prep.profiles, config.solver);
        for (std::size_t i = 0; i < run.prosumers.size(); ++i)
          add(std::move(run.prosumers[i]), "L1/" + config.district.members[i].topology.name, false);
        add(std::move(run.district), "L2/" + config.district.name, true);
        if (config.reference) {
          auto mono = monolithic_reference(config.district, prep.horizon, config.mode, obj, cost, prep.profiles,
                                           config.solver);
          double bu = bottom_up_objective(mono, {&b.levels.back()});
          b.decomposition = DecompositionReport{mono.objective, bu, bu - mono.objective};
        }
        break;
      }
      case Level::City: {
        auto run = run_city(config.city, prep.horizon, config.mode, obj, cost, prep.profiles, config.solver);
        for (std::size_t d = 0; d < run.districts.size(); ++d) {
          const auto& dm = config.city.districts[d];
          for (std::size_t i = 0; i < run.districts[d].prosumers.size(); ++i)
            add(std::move(run.districts[d].prosumers[i]), "L1/" + dm.name + "/" + dm.members[i].topology.name, false);
        }
        for (std::size_t d = 0; d < run.districts.size(); ++d)
          add(std::move(run.districts[d].district), "L2/" + config.city.districts[d].name, true);
        add(std::move(run.city), "L3/" + config.city.name, true);
        if (config.reference) {
          auto mono = monolithic_reference(config.city, prep.horizon, config.mode, obj, cost, prep.profiles,
                                           config.solver);
          std::vector<const LevelResult*> used{&b.levels.back()};
          for (std::size_t k : final_levels)
            if (k + 1 != b.levels.size()) used.push_back(&b.levels[k]);
          double bu = bottom_up_objective(mono, used);
          b.decomposition = DecompositionReport{mono.objective, bu, bu - mono.objective};
        }
        break;
      }
    }

    auto expand = [&](const std::vector<double>& s) { return prep.set ? expand_series(s, *prep.set) : s; };
    for (std::size_t k : final_levels)
      for (const auto& [key, s] : b.levels[k].dispatch) b.dispatch.emplace_back(labels[k] + "/" + key, expand(s));
    for (std::size_t k = 0; k < b.levels.size(); ++k)
      for (const auto& [c, s] : b.levels[k].residual_load)
        b.residual_load.emplace_back(labels[k] + "/" + std::string(carrier_name(c)), expand(s));

    if (config.pareto) {
      const LevelResult& top = b.levels.back();
      auto front = generate_pareto_front(*top.model, obj, config.pareto->second, config.pareto->points, cost,
                                         prep.profiles, config.solver);
      for (const auto& pt : front) {
        ParetoRow row{pt.objective_a, pt.objective_b, {}};
        for (const auto& blk : top.model->blocks)
          if (blk.capacity_var) row.capacities.emplace_back(blk.owner, pt.solution.values[blk.capacity_var->index]);
        b.pareto.push_back(std::move(row));
      }
    }

    b.labels = std::move(labels);
    b.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return b;
  }
}

}  // namespace

ResultBundle run_scenario(const ScenarioConfig& config) {
  return in_scenario(config, [&] { return run_pipeline(config); });
}

std::pair<double, double> verify_balances(const ResultBundle& bundle) {
  double balance = 0.0, storage = 0.0;
  for (const auto& l : bundle.levels) {
    if (!l.model) continue;
    balance = std::max(balance, l.model->max_balance_residual(l.values));
    storage = std::max(storage, l.model->max_storage_residual(l.values));
  }
  return {balance, storage};
}

// ---------------------------------------------------------------- writing

namespace {

std::string cell(double v) {
  if (std::abs(v) < 1e-9) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double clean(double v) { return std::stod(cell(v)); }

void write_file(const fs::path& path, const std::string& text, std::vector<fs::path>& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "error while writing '" + path.string() + "'");
  manifest.push_back(path);
}

std::string series_csv(const std::vector<std::string>& stamps,
                       const std::vector<std::pair<std::string, std::vector<double>>>& cols) {
  std::string out = "timestamp";
  for (const auto& [name, _] : cols) out += "," + name;
  out += "\n";
  for (std::size_t t = 0; t < stamps.size(); ++t) {
    out += stamps[t];
    for (const auto& [_, s] : cols) out += "," + cell(s[t]);
    out += "\n";
  }
  return out;
}

}  // namespace

std::vector<fs::path> write_results(const ResultBundle& bundle, const fs::path& out_dir) {
  auto [balance, storage] = verify_balances(bundle);
  if (balance > 1e-6 || storage > 1e-6)
    throw Error(ErrorCode::NumericalBreakdown, "scenario '" + bundle.scenario + "': balance check failed (bus " +
                                                   format_real(balance) + " kW, storage " + format_real(storage) +
                                                   " kWh)");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir))
    throw Error(ErrorCode::IoError, "cannot create output directory '" + out_dir.string() + "'");

  std::vector<fs::path> manifest;
  nlohmann::ordered_json summary;
  summary["scenario"] = bundle.scenario;
  summary["level"] = std::string(level_name(bundle.level));
  summary["steps"] = bundle.timestamps.size();
  if (!bundle.timestamps.empty()) summary["start"] = bundle.timestamps.front();
  auto levels = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < bundle.levels.size(); ++k) {
    const auto& l = bundle.levels[k];
    nlohmann::ordered_json e;
    e["label"] = bundle.labels[k];
    e["level"] = l.level;
    e["name"] = l.name;
    e["status"] = std::string(status_name(l.status));
    e["objective"] = clean(l.objective);
    e["gap"] = clean(l.gap);
    e["nodes"] = l.nodes;
    e["lp_iterations"] = l.lp_iterations;
    auto caps = nlohmann::ordered_json::object();
    for (const auto& [name, v] : l.capacities) caps[name] = clean(v);
    e["capacities"] = caps;
    levels.push_back(e);
  }
  summary["levels"] = levels;
  if (bundle.decomposition) {
    summary["decomposition"] = {{"monolithic_objective", clean(bundle.decomposition->monolithic)},
                                {"bottom_up_objective", clean(bundle.decomposition->bottom_up)},
                                {"gap", clean(bundle.decomposition->gap)}};
  }
  if (bundle.aggregation) {
    const auto& a = *bundle.aggregation;
    summary["aggregation"] = {{"period_length", a.period_length},
                              {"typical_periods", a.typical_periods()},
                              {"medoids", a.medoids},
                              {"weights", a.weights}};
  }
  if (!bundle.pareto.empty()) summary["pareto_points"] = bundle.pareto.size();
  summary["balance_check"] = {{"tolerance_kw", 1e-6}, {"passed", true}};
  write_file(out_dir / "summary.json", summary.dump(2) + "\n", manifest);

  write_file(out_dir / "dispatch.csv", series_csv(bundle.timestamps, bundle.dispatch), manifest);
  write_file(out_dir / "residual_load.csv", series_csv(bundle.timestamps, bundle.residual_load), manifest);

  if (!bundle.pareto.empty()) {
    std::string out = "objective_a,objective_b";
    for (const auto& [name, _] : bundle.pareto.front().capacities) out += "," + name;
    out += "\n";
    for (const auto& row : bundle.pareto) {
      out += cell(row.objective_a) + "," + cell(row.objective_b);
      for (const auto& [_, v] : row.capacities) out += "," + cell(v);
      out += "\n";
    }
    write_file(out_dir / "pareto.csv", out, manifest);
  }

  if (bundle.aggregation) {
    const auto& a = *bundle.aggregation;
    std::string out = "period,start,typical_period,medoid_period,weight\n";
    for (std::size_t p = 0; p < a.original_periods(); ++p) {
      std::size_t tp = a.assignment[p];
      std::size_t first = p * a.period_length;
      out += std::to_string(p) + "," + (first < bundle.timestamps.size() ? bundle.timestamps[first] : "") + "," +
             std::to_string(tp) + "," + std::to_string(a.medoids[tp]) + "," + cell(a.weights[tp]) + "\n";
    }
    write_file(out_dir / "aggregation.csv", out, manifest);
  }
  return manifest;
}

std::string export_scenario_lp(const ScenarioConfig& config) {
  return in_scenario(config, [&]() -> std::string {
    if (config.level != Level::Prosumer) {
      ScenarioConfig plain = config;
      plain.pareto.reset();
      plain.reference = false;
      auto b = run_pipeline(plain);
      return export_lp_text(b.levels.back().model->problem);
    }
    check_topologies_or_throw(config);
    Prepared prep = prepare(config);
    auto model = assemble_model(config.prosumer, prep.horizon, config.mode, prep.profiles, "L1");
    auto obj = build_objective(config.objective, model, config.cost, prep.profiles);
    model.problem.set_objective(obj.expr, obj.sense);
    return export_lp_text(model.problem);
  });
}

}  // namespace mesopt
