#include "phocap/config.hpp"

#include "phocap/error.hpp"
#include "phocap/random.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace phocap {

using nlohmann::json;

// ---------------------------------------------------------------- TOML subset

namespace {

class TomlParser {
 public:
  TomlParser(std::string_view text, std::string_view source) : s_(text), source_(source) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    for (;;) {
      skip_ws_comments_newlines();
      if (eof()) break;
      if (peek() == '[') {
        table = header(root);
      } else {
        keyval(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  std::string_view s_;
  std::string source_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::set<const json*> defined_;  // tables opened by a [header]

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::Parse, source_ + ":" + std::to_string(line_) + ": " + msg);
  }

  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[i_]; }
  char get() {
    if (eof()) return '\0';
    const char c = s_[i_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++i_;
  }
  void skip_ws_comments_newlines() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        get();
        continue;
      }
      break;
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') ++i_;
    if (!eof() && peek() != '\n') fail(std::string("unexpected '") + peek() + "' after value");
  }

  std::string key_part() {
    skip_ws();
    if (peek() == '"' || peek() == '\'') return string_value();
    std::string k;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) k += get();
    if (k.empty()) fail("expected a key");
    return k;
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key_part()};
    for (;;) {
      skip_ws();
      if (peek() != '.') break;
      ++i_;
      parts.push_back(key_part());
    }
    return parts;
  }

  json* descend(json* at, const std::string& k) {
    if (at->contains(k)) {
      json& next = (*at)[k];
      if (next.is_array() && !next.empty() && next.back().is_object()) return &next.back();
      if (!next.is_object()) fail("key '" + k + "' is not a table");
      return &next;
    }
    (*at)[k] = json::object();
    return &(*at)[k];
  }

  json* header(json& root) {
    get();
    const bool array = peek() == '[';
    if (array) get();
    const auto parts = dotted_key();
    skip_ws();
    if (peek() != ']') fail("malformed table header");
    get();
    if (array) {
      if (peek() != ']') fail("malformed table header");
      get();
    }
    json* at = &root;
    for (std::size_t p = 0; p + 1 < parts.size(); ++p) at = descend(at, parts[p]);
    const auto& last = parts.back();
    if (array) {
      if (!at->contains(last)) (*at)[last] = json::array();
      json& arr = (*at)[last];
      if (!arr.is_array()) fail("key '" + last + "' is not an array of tables");
      arr.push_back(json::object());
      return &arr.back();
    }
    if (at->contains(last)) {
      json& t = (*at)[last];
      if (!t.is_object() || defined_.count(&t)) fail("table '" + last + "' defined twice");
      defined_.insert(&t);
      return &t;
    }
    (*at)[last] = json::object();
    defined_.insert(&(*at)[last]);
    return &(*at)[last];
  }

  void keyval(json& table) {
    const auto parts = dotted_key();
    skip_ws();
    if (peek() != '=') fail("expected '=' after key");
    get();
    skip_ws();
    json* at = &table;
    for (std::size_t p = 0; p + 1 < parts.size(); ++p) at = descend(at, parts[p]);
    if (at->contains(parts.back())) fail("duplicate key '" + parts.back() + "'");
    (*at)[parts.back()] = value();
  }

  std::string string_value() {
    const char q = get();
    std::string out;
    for (;;) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == q) break;
      if (c == '\\' && q == '"') {
        if (eof()) fail("unterminated string");
        const char e = get();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '\\': out += '\\'; break;
          case '"': out += '"'; break;
          default: fail(std::string("unsupported escape '\\") + e + "'");
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  json value() {
    skip_ws();
    const char c = peek();
    if (c == '"' || c == '\'') return string_value();
    if (c == '[') return array_value();
    if (c == '{') return inline_table();
    std::string tok;
    while (!eof() && peek() != ',' && peek() != ']' && peek() != '}' && peek() != '#' && peek() != '\n' &&
           peek() != '\r' && peek() != ' ' && peek() != '\t')
      tok += get();
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char ch : tok)
      if (ch != '_') digits += ch;
    if (digits.find_first_of(".eE") == std::string::npos || digits.find("0x") == 0) {
      long long v = 0;
      const char* b = digits.data() + (digits[0] == '+');
      const auto [end, ec] = std::from_chars(b, digits.data() + digits.size(), v);
      if (ec == std::errc() && end == digits.data() + digits.size()) return v;
    }
    double d = 0.0;
    const char* b = digits.data() + (digits[0] == '+');
    const auto [end, ec] = std::from_chars(b, digits.data() + digits.size(), d);
    if (ec != std::errc() || end != digits.data() + digits.size() || !std::isfinite(d))
      fail("malformed value '" + tok + "'");
    return d;
  }

  json array_value() {
    get();
    json arr = json::array();
    for (;;) {
      skip_ws_comments_newlines();
      if (peek() == ']') {
        get();
        return arr;
      }
      arr.push_back(value());
      skip_ws_comments_newlines();
      if (peek() == ',') {
        get();
        continue;
      }
      if (peek() == ']') continue;
      fail("expected ',' or ']' in array");
    }
  }

  json inline_table() {
    get();
    json t = json::object();
    skip_ws();
    if (peek() == '}') {
      get();
      return t;
    }
    for (;;) {
      keyval(t);
      skip_ws();
      const char c = eof() ? '\0' : get();
      if (c == '}') return t;
      if (c != ',') fail("expected ',' or '}' in inline table");
    }
  }
};

}  // namespace

json parse_toml(std::string_view text, std::string_view source) { return TomlParser(text, source).parse(); }

// ---------------------------------------------------------------- validation

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::Validation, path + ": " + msg);
}

/// Walks one object, remembering which keys were read so leftovers can be
/// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_.empty() ? "<root>" : path_, "expected a table");
  }

  std::string at(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  const json* find(std::string_view key) {
    used_.insert(std::string(key));
    const auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  double number(std::string_view key, double def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_number()) invalid(at(key), "expected a number");
    return v->get<double>();
  }

  long long integer(std::string_view key, long long def) {
    const json* v = find(key);
    if (!v) return def;
    if (v->is_number_integer() || v->is_number_unsigned()) return v->get<long long>();
    if (v->is_number_float()) {
      const double d = v->get<double>();
      if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long long>(d);
    }
    invalid(at(key), "expected an integer");
  }

  bool boolean(std::string_view key, bool def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_boolean()) invalid(at(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(std::string_view key, const std::string& def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_string()) invalid(at(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<std::string> strings(std::string_view key, const std::vector<std::string>& def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_array()) invalid(at(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_string()) invalid(at(key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back((*v)[i].get<std::string>());
    }
    return out;
  }

  std::vector<double> numbers(std::string_view key) {
    const json* v = find(key);
    if (!v) return {};
    if (!v->is_array()) invalid(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) invalid(at(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back((*v)[i].get<double>());
    }
    return out;
  }

  std::optional<Section> sub(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return Section(*v, at(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) invalid(at(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void check(bool ok, const Section& s, std::string_view key, const std::string& msg) {
  if (!ok) invalid(s.at(key), msg);
}

void read_cars(Section& s, PipelineConfig& c) {
  auto& k = c.cars;
  k.n_mc_runs = static_cast<int>(s.integer("n_mc_runs", k.n_mc_runs));
  check(k.n_mc_runs >= 10, s, "n_mc_runs", "must be >= 10");
  k.calib_ratio = s.number("calib_ratio", k.calib_ratio);
  check(k.calib_ratio > 0.0 && k.calib_ratio < 1.0, s, "calib_ratio", "must be in (0, 1)");
  k.k_max = static_cast<Index>(s.integer("k_max", k.k_max));
  check(k.k_max >= 1, s, "k_max", "must be >= 1");
  k.folds = static_cast<int>(s.integer("folds", k.folds));
  check(k.folds >= 2, s, "folds", "must be >= 2");
  k.start_keep_ratio = s.number("start_keep_ratio", k.start_keep_ratio);
  check(k.start_keep_ratio > 0.0 && k.start_keep_ratio <= 1.0, s, "start_keep_ratio", "must be in (0, 1]");
  k.end_keep_count = static_cast<Index>(s.integer("end_keep_count", k.end_keep_count));
  check(k.end_keep_count >= 2, s, "end_keep_count", "must be >= 2");
  const auto sampling = s.string("sampling", "reweighted");
  check(sampling == "reweighted" || sampling == "topk", s, "sampling", "must be \"reweighted\" or \"topk\"");
  k.sampling = sampling == "topk" ? CarsSampling::TopK : CarsSampling::Reweighted;
  c.cars_loops = static_cast<int>(s.integer("loops", c.cars_loops));
  check(c.cars_loops >= 2, s, "loops", "must be >= 2");
  c.cars_all_sources = s.boolean("all_sources", c.cars_all_sources);
  s.finish();
}

void read_aci(Section& s, PipelineConfig& c) {
  auto& k = c.kinetics;
  k.kc25 = s.number("kc25", k.kc25);
  k.ko25 = s.number("ko25", k.ko25);
  k.gamma_star25 = s.number("gamma_star25", k.gamma_star25);
  k.ha_kc = s.number("ha_kc", k.ha_kc);
  k.ha_ko = s.number("ha_ko", k.ha_ko);
  k.ha_gamma_star = s.number("ha_gamma_star", k.ha_gamma_star);
  k.ha_vcmax = s.number("ha_vcmax", k.ha_vcmax);
  k.ha_jmax = s.number("ha_jmax", k.ha_jmax);
  k.ha_rd = s.number("ha_rd", k.ha_rd);
  try {
    k.validate();
  } catch (const Error& e) {
    invalid(s.at("kinetics"), e.what());
  }
  auto& f = c.aci_fit;
  f.n_starts = static_cast<int>(s.integer("n_starts", f.n_starts));
  check(f.n_starts >= 1, s, "n_starts", "must be >= 1");
  f.max_iterations = static_cast<int>(s.integer("max_iterations", f.max_iterations));
  check(f.max_iterations >= 1, s, "max_iterations", "must be >= 1");
  const auto mode = s.string("min_mode", "hard");
  check(mode == "hard" || mode == "smooth", s, "min_mode", "must be \"hard\" or \"smooth\"");
  f.min_mode = mode == "smooth" ? MinMode::Smooth : MinMode::Hard;
  f.smooth_theta = s.number("smooth_theta", f.smooth_theta);
  check(f.smooth_theta > 0.0 && f.smooth_theta <= 1.0, s, "smooth_theta", "must be in (0, 1]");
  f.fit_tpu = s.boolean("fit_tpu", f.fit_tpu);
  if (s.boolean("light_correction", false)) {
    LightResponse lr;
    lr.alpha = s.number("light_alpha", lr.alpha);
    lr.theta = s.number("light_theta", lr.theta);
    check(lr.alpha > 0.0, s, "light_alpha", "must be > 0");
    check(lr.theta > 0.0 && lr.theta <= 1.0, s, "light_theta", "must be in (0, 1]");
    f.light_correction = lr;
  } else {
    check(!s.has("light_alpha") && !s.has("light_theta"), s, "light_correction",
          "light_alpha/light_theta need light_correction = true");
  }
  s.finish();
}

FusionSpec read_spec(Section& s) {
  FusionSpec f;
  const auto level = s.string("level", "");
  check(!level.empty(), s, "level", "required");
  try {
    f.level = parse_level(level);
  } catch (const Error& e) {
    invalid(s.at("level"), e.what());
  }
  const auto sources = s.strings("sources", {});
  check(!sources.empty(), s, "sources", "required and non-empty");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    try {
      f.sources.push_back(parse_source(sources[i]));
    } catch (const Error& e) {
      invalid(s.at("sources") + "[" + std::to_string(i) + "]", e.what());
    }
  }
  try {
    f.options.mode = parse_normalization(s.string("normalization", "minmax"));
  } catch (const Error& e) {
    invalid(s.at("normalization"), e.what());
  }
  f.options.normalize_reflectance = s.boolean("normalize_reflectance", false);
  if (s.has("theta")) f.theta = s.number("theta", 0.0);
  try {
    f.validate();
  } catch (const Error& e) {
    invalid(s.at(f.level == FusionLevel::Decision ? "sources" : "theta"), e.what());
  }
  s.finish();
  return f;
}

void read_synth(Section& s, PipelineConfig& c, const std::filesystem::path& base) {
  auto& y = c.synth;
  y.seed = static_cast<std::uint64_t>(s.integer("seed", static_cast<long long>(c.seed)));
  y.n_samples = static_cast<int>(s.integer("n_samples", y.n_samples));
  auto range = [&](std::string_view key, TraitRange& r) {
    const auto v = s.numbers(key);
    if (v.empty()) return;
    check(v.size() == 2 && v[0] <= v[1], s, key, "expected [lo, hi] with lo <= hi");
    r = {v[0], v[1]};
  };
  range("vcmax25", y.vcmax25);
  range("jmax25", y.jmax25);
  range("rd25", y.rd25);
  range("leaf_temp_c", y.leaf_temp_c);
  y.min_jv_ratio = s.number("min_jv_ratio", y.min_jv_ratio);
  y.max_jv_ratio = s.number("max_jv_ratio", y.max_jv_ratio);
  y.nuisance_var = s.number("nuisance_var", y.nuisance_var);
  y.balanced_nuisance = s.boolean("balanced_nuisance", y.balanced_nuisance);
  y.band_noise_scale = s.number("band_noise_scale", y.band_noise_scale);
  y.latent_scale = s.number("latent_scale", y.latent_scale);
  y.aci_noise_sd = s.number("aci_noise_sd", y.aci_noise_sd);
  y.noise_free = s.boolean("noise_free", y.noise_free);
  c.synth_out = resolve(base, s.string("out_dir", "data"));
  try {
    y.validate();
  } catch (const Error& e) {
    invalid("synth", e.what());
  }
  s.finish();
}

}  // namespace

PipelineConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  c.document = doc;
  Section root(doc, "");

  const json* seed = root.find("seed");
  if (!seed) invalid("seed", "required");
  if (!seed->is_number_integer() && !seed->is_number_unsigned()) invalid("seed", "expected a non-negative integer");
  if (seed->is_number_integer() && seed->get<long long>() < 0) invalid("seed", "expected a non-negative integer");
  c.seed = seed->get<std::uint64_t>();
  c.output_dir = resolve(base_dir, root.string("output_dir", "out"));

  if (auto s = root.sub("synth")) {
    read_synth(*s, c, base_dir);
  } else {
    c.synth_out = resolve(base_dir, "data");
    c.synth.seed = c.seed;
  }

  // Data paths default to the synthetic generator's output files.
  auto& d = c.data;
  d.reflectance = c.synth_out / "reflectance.csv";
  d.up_sif = c.synth_out / "up_sif_yield.csv";
  d.down_sif = c.synth_out / "down_sif_yield.csv";
  d.aci = c.synth_out / "aci.csv";
  d.labels = c.synth_out / "labels.csv";
  d.metadata = c.synth_out / "metadata.csv";
  if (auto s = root.sub("data")) {
    d.sif_input = s->string("sif_input", d.sif_input);
    check(d.sif_input == "yield" || d.sif_input == "raw", *s, "sif_input", "must be \"yield\" or \"raw\"");
    auto path = [&](std::string_view key, std::filesystem::path& p) {
      const auto v = s->string(key, "");
      if (!v.empty()) p = resolve(base_dir, v);
    };
    d.fapar_normalized = s->boolean("fapar_normalized", d.fapar_normalized);
    path("reflectance", d.reflectance);
    path("up_sif", d.up_sif);
    path("down_sif", d.down_sif);
    path("irradiance", d.irradiance);
    path("transmittance", d.transmittance);
    path("aci", d.aci);
    path("labels", d.labels);
    path("metadata", d.metadata);
    if (d.sif_input == "raw") {
      check(!d.irradiance.empty(), *s, "irradiance", "required when sif_input = \"raw\"");
      check(!d.transmittance.empty(), *s, "transmittance", "required when sif_input = \"raw\"");
    }
    s->finish();
  }

  if (auto s = root.sub("labels")) {
    const auto src = s->string("source", "file");
    check(src == "file" || src == "aci", *s, "source", "must be \"file\" or \"aci\"");
    c.label_source = src == "aci" ? LabelSource::Aci : LabelSource::File;
    c.targets = s->strings("targets", c.targets);
    check(!c.targets.empty(), *s, "targets", "must not be empty");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < c.targets.size(); ++i) {
      const auto& t = c.targets[i];
      check(t == "jmax25" || t == "vcmax25" || t == "rd25", *s, "targets[" + std::to_string(i) + "]",
            "must be jmax25, vcmax25 or rd25");
      check(seen.insert(t).second, *s, "targets[" + std::to_string(i) + "]", "duplicate target");
    }
    s->finish();
  }

  if (auto s = root.sub("split")) {
    c.train_fraction = s->number("train_fraction", c.train_fraction);
    check(c.train_fraction > 0.0 && c.train_fraction < 1.0, *s, "train_fraction", "must be in (0, 1)");
    c.split_repeats = static_cast<int>(s->integer("repeats", c.split_repeats));
    check(c.split_repeats >= 1, *s, "repeats", "must be >= 1");
    s->finish();
  }

  if (auto s = root.sub("pls")) {
    c.k_cap = static_cast<Index>(s->integer("k_max", c.k_cap));
    check(c.k_cap >= 1, *s, "k_max", "must be >= 1");
    c.cv_folds = static_cast<int>(s->integer("cv_folds", c.cv_folds));
    check(c.cv_folds >= 2, *s, "cv_folds", "must be >= 2");
    c.pca_components = static_cast<Index>(s->integer("pca_components", c.pca_components));
    check(c.pca_components >= 1, *s, "pca_components", "must be >= 1");
    s->finish();
  }

  if (auto s = root.sub("cars")) read_cars(*s, c);
  if (auto s = root.sub("aci")) read_aci(*s, c);
  c.aci_fit.seed = derive_seed(c.seed, "aci-start");

  if (auto s = root.sub("fusion")) {
    const json* specs = s->find("specs");
    if (specs) {
      if (!specs->is_array()) invalid(s->at("specs"), "expected an array of tables");
      std::set<std::string> names;
      for (std::size_t i = 0; i < specs->size(); ++i) {
        Section spec((*specs)[i], s->at("specs") + "[" + std::to_string(i) + "]");
        c.fusion.push_back(read_spec(spec));
        if (!names.insert(c.fusion.back().name()).second)
          invalid(s->at("specs") + "[" + std::to_string(i) + "]", "duplicate spec " + c.fusion.back().name());
      }
    }
    c.theta_sweep = s->numbers("theta_sweep");
    for (std::size_t i = 0; i < c.theta_sweep.size(); ++i)
      check(c.theta_sweep[i] > 0.0, *s, "theta_sweep[" + std::to_string(i) + "]", "must be > 0");
    s->finish();
  }
  root.finish();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Validation, "config file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json doc;
  const auto ext = path.extension().string();
  // A malformed config is a configuration error, not a data error.
  if (ext == ".json") {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Validation, path.string() + ": " + e.what());
    }
  } else if (ext == ".toml") {
    try {
      doc = parse_toml(text, path.string());
    } catch (const Error& e) {
      throw Error(ErrorKind::Validation, e.what());
    }
  } else {
    throw Error(ErrorKind::Validation, path.string() + ": config must be .toml or .json");
  }
  auto c = config_from_json(doc, path.parent_path());
  c.source = path;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) c.output_dir = env;
  return c;
}

ExperimentOptions PipelineConfig::experiment_options() const {
  ExperimentOptions o;
  o.seed = seed;
  o.train_fraction = train_fraction;
  o.k_cap = k_cap;
  o.cv_folds = cv_folds;
  o.cars = cars;
  o.cars_loops = cars_loops;
  o.cars_all_sources = cars_all_sources;
  return o;
}

void PipelineConfig::require_inputs() const {
  auto need = [](const char* key, const std::filesystem::path& p) {
    if (p.empty()) invalid(std::string("data.") + key, "required");
    if (!std::filesystem::exists(p)) invalid(std::string("data.") + key, "file not found: " + p.string());
  };
  need("reflectance", data.reflectance);
  need("up_sif", data.up_sif);
  need("down_sif", data.down_sif);
  if (data.sif_input == "raw") {
    need("irradiance", data.irradiance);
    need("transmittance", data.transmittance);
  }
  if (label_source == LabelSource::Aci) need("aci", data.aci);
  else need("labels", data.labels);
}

std::uint64_t PipelineConfig::hash() const { return fnv1a64(document.dump()); }

}  // namespace phocap
