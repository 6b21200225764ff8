#include "nfd/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "nfd/activation.hpp"
#include "nfd/data.hpp"
#include "nfd/errors.hpp"
#include "nfd/net.hpp"

namespace nfd {

namespace {

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<std::string, std::int64_t, double, bool, Array> v;
};

std::string type_name(const Value& value) {
  switch (value.v.index()) {
    case 0: return "string";
    case 1: return "integer";
    case 2: return "float";
    case 3: return "boolean";
    default: return "array";
  }
}

class Parser {
 public:
  Parser(std::string_view text, std::string where) : s_(text), where_(std::move(where)) {}

  Value parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return {parse_string()};
    if (c == '[') return {parse_array()};
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return {true};
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return {false};
    }
    return parse_number();
  }

  void finish() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] != '#') fail("unexpected trailing text '" + std::string(s_.substr(pos_)) + "'");
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where_ + ": " + msg); }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  std::string parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size()) {
      const char c = s_[pos_++];
      if (c == '"') return out;
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    fail("unterminated string");
  }

  Array parse_array() {
    ++pos_;
    Array out;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      out.push_back(parse_value());
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return out;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      fail("expected ',' or ']' in array");
    }
  }

  Value parse_number() {
    std::size_t end = pos_;
    while (end < s_.size() && std::string_view("+-0123456789.eE_").find(s_[end]) != std::string_view::npos) ++end;
    std::string token(s_.substr(pos_, end - pos_));
    if (token.empty()) fail("cannot parse value '" + std::string(s_.substr(pos_)) + "'");
    std::erase(token, '_');
    pos_ = end;
    const bool is_float = token.find_first_of(".eE") != std::string::npos;
    const char* first = token.data() + (token[0] == '+' ? 1 : 0);
    const char* last = token.data() + token.size();
    if (!is_float) {
      std::int64_t v = 0;
      auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc() || res.ptr != last) fail("bad integer '" + token + "'");
      return {v};
    }
    double v = 0.0;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) fail("bad float '" + token + "'");
    return {v};
  }

  std::string_view s_;
  std::string where_;
  std::size_t pos_ = 0;
};

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

// Field conversions; `key` is used in diagnostics.
struct Conv {
  std::string where;

  [[noreturn]] void type_error(const Value& v, const char* want) const {
    throw ConfigError(where + ": expected " + want + ", got " + type_name(v));
  }
  std::string str(const Value& v) const {
    if (auto p = std::get_if<std::string>(&v.v)) return *p;
    type_error(v, "string");
  }
  std::int64_t integer(const Value& v) const {
    if (auto p = std::get_if<std::int64_t>(&v.v)) return *p;
    type_error(v, "integer");
  }
  double real(const Value& v) const {
    if (auto p = std::get_if<double>(&v.v)) return *p;
    if (auto p = std::get_if<std::int64_t>(&v.v)) return static_cast<double>(*p);
    type_error(v, "number");
  }
  bool boolean(const Value& v) const {
    if (auto p = std::get_if<bool>(&v.v)) return *p;
    type_error(v, "boolean");
  }
  const Array& array(const Value& v) const {
    if (auto p = std::get_if<Array>(&v.v)) return *p;
    type_error(v, "array");
  }
};

struct Field {
  const char* key;
  std::function<void(ExperimentSpec&, const Value&, const Conv&)> set;
  std::function<std::string(const ExperimentSpec&)> get;
};

template <class T>
std::string join(const std::vector<T>& xs, std::function<std::string(const T&)> f) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += f(xs[i]);
  }
  return out + "]";
}

#define NFD_STRING(name)                                                                          \
  Field {                                                                                         \
    #name, [](ExperimentSpec& s, const Value& v, const Conv& c) { s.name = c.str(v); },           \
        [](const ExperimentSpec& s) { return quote(s.name); }                                     \
  }
#define NFD_INT(name)                                                                             \
  Field {                                                                                         \
    #name, [](ExperimentSpec& s, const Value& v, const Conv& c) { s.name = c.integer(v); },       \
        [](const ExperimentSpec& s) { return std::to_string(s.name); }                            \
  }
#define NFD_REAL(name)                                                                            \
  Field {                                                                                         \
    #name, [](ExperimentSpec& s, const Value& v, const Conv& c) { s.name = c.real(v); },          \
        [](const ExperimentSpec& s) { return fmt_double(s.name); }                                \
  }
#define NFD_BOOL(name)                                                                            \
  Field {                                                                                         \
    #name, [](ExperimentSpec& s, const Value& v, const Conv& c) { s.name = c.boolean(v); },       \
        [](const ExperimentSpec& s) { return std::string(s.name ? "true" : "false"); }            \
  }
#define NFD_INTS(name)                                                                            \
  Field {                                                                                         \
    #name,                                                                                        \
        [](ExperimentSpec& s, const Value& v, const Conv& c) {                                    \
          s.name.clear();                                                                         \
          for (const auto& e : c.array(v)) s.name.push_back(c.integer(e));                        \
        },                                                                                        \
        [](const ExperimentSpec& s) {                                                             \
          return join<std::int64_t>(s.name, [](const std::int64_t& x) { return std::to_string(x); }); \
        }                                                                                         \
  }
#define NFD_REALS(name)                                                                           \
  Field {                                                                                         \
    #name,                                                                                        \
        [](ExperimentSpec& s, const Value& v, const Conv& c) {                                    \
          s.name.clear();                                                                         \
          for (const auto& e : c.array(v)) s.name.push_back(c.real(e));                           \
        },                                                                                        \
        [](const ExperimentSpec& s) {                                                             \
          return join<double>(s.name, [](const double& x) { return fmt_double(x); });             \
        }                                                                                         \
  }
#define NFD_STRINGS(name)                                                                         \
  Field {                                                                                         \
    #name,                                                                                        \
        [](ExperimentSpec& s, const Value& v, const Conv& c) {                                    \
          s.name.clear();                                                                         \
          for (const auto& e : c.array(v)) s.name.push_back(c.str(e));                            \
        },                                                                                        \
        [](const ExperimentSpec& s) {                                                             \
          return join<std::string>(s.name, [](const std::string& x) { return quote(x); });        \
        }                                                                                         \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      Field{"experiment",
            [](ExperimentSpec& s, const Value& v, const Conv& c) {
              try {
                s.experiment = parse_experiment(c.str(v));
              } catch (const ConfigError& e) {
                throw ConfigError(c.where + ": " + e.what());
              }
            },
            [](const ExperimentSpec& s) { return quote(std::string(experiment_name(s.experiment))); }},
      NFD_INT(schema_version),
      NFD_STRING(output),
      NFD_INTS(seeds),
      NFD_INTS(widths),
      NFD_INTS(depths),
      NFD_REALS(T),
      NFD_REALS(eta_c),
      NFD_STRINGS(blocks),
      NFD_STRINGS(activations),
      NFD_STRING(alpha_mode),
      NFD_STRINGS(scalings),
      NFD_STRINGS(lr_modes),
      NFD_BOOL(decoupled_freeze_updates),
      NFD_STRING(dataset),
      NFD_STRING(teacher),
      NFD_INT(input_dim),
      NFD_INT(dataset_size),
      NFD_REAL(noise_std),
      NFD_STRING(cifar_file),
      NFD_INT(cifar_downsample),
      NFD_STRING(loss),
      NFD_INT(steps),
      NFD_INT(batch),
      NFD_INT(k_max),
      NFD_INT(particles),
      NFD_INTS(steps_L),
      NFD_BOOL(correction_term),
      NFD_INT(reference_steps),
      NFD_REAL(spd_floor),
      NFD_INT(kernel_steps),
      NFD_INT(test_size),
      NFD_REAL(ridge_lambda),
      NFD_BOOL(capacity_finite_net),
  };
  return table;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Experiment parse_experiment(std::string_view name) {
  for (Experiment e : all_experiments()) {
    if (experiment_name(e) == name) return e;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

std::string_view experiment_name(Experiment e) {
  switch (e) {
    case Experiment::preact_postact: return "preact_postact";
    case Experiment::init_sde_convergence: return "init_sde_convergence";
    case Experiment::nfd_train_convergence: return "nfd_train_convergence";
    case Experiment::gia: return "gia";
    case Experiment::eigen_monitor: return "eigen_monitor";
    case Experiment::collapse: return "collapse";
    case Experiment::hp_sweep: return "hp_sweep";
    case Experiment::kernel_capacity: return "kernel_capacity";
    case Experiment::correction_gap: return "correction_gap";
    case Experiment::gradcheck: return "gradcheck";
  }
  return "?";
}

const std::vector<Experiment>& all_experiments() {
  static const std::vector<Experiment> list{
      Experiment::preact_postact, Experiment::init_sde_convergence, Experiment::nfd_train_convergence,
      Experiment::gia,            Experiment::eigen_monitor,        Experiment::collapse,
      Experiment::hp_sweep,       Experiment::kernel_capacity,      Experiment::correction_gap,
      Experiment::gradcheck};
  return list;
}

ExperimentSpec parse_config_text(std::string_view text, const std::string& origin) {
  std::map<std::string, const Field*> index;
  for (const auto& f : fields()) index[f.key] = &f;
  ExperimentSpec spec;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    auto it = index.find(key);
    if (it == index.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    Parser parser(std::string_view(body).substr(eq + 1), where + ": key '" + key + "'");
    const Value value = parser.parse_value();
    parser.finish();
    it->second->set(spec, value, Conv{where + ": key '" + key + "'"});
  }
  return spec;
}

ExperimentSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

std::string serialize(const ExperimentSpec& spec) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(spec) + "\n";
  return out;
}

std::string config_hash(const ExperimentSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : serialize(spec)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void validate(const ExperimentSpec& spec) {
  auto positive_ints = [](const std::vector<std::int64_t>& xs, const char* key) {
    if (xs.empty()) throw ConfigError(std::string(key) + " must be non-empty");
    for (auto x : xs) {
      if (x < 1) throw ConfigError(std::string(key) + " entries must be >= 1");
    }
  };
  if (spec.schema_version != kSchemaVersion) {
    throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion) + ", got " +
                      std::to_string(spec.schema_version));
  }
  if (spec.seeds.empty()) throw ConfigError("seeds must be non-empty");
  for (auto s : spec.seeds) {
    if (s < 0) throw ConfigError("seeds entries must be >= 0");
  }
  positive_ints(spec.widths, "widths");
  positive_ints(spec.depths, "depths");
  positive_ints(spec.steps_L, "steps_L");
  if (spec.T.empty()) throw ConfigError("T must be non-empty");
  for (double t : spec.T) {
    if (!(t > 0.0)) throw ConfigError("T entries must be > 0");
  }
  if (spec.eta_c.empty()) throw ConfigError("eta_c must be non-empty");
  for (double e : spec.eta_c) {
    if (!(e >= 0.0)) throw ConfigError("eta_c entries must be >= 0");
  }
  if (spec.blocks.empty()) throw ConfigError("blocks must be non-empty");
  for (const auto& b : spec.blocks) parse_block(b);
  if (spec.activations.empty()) throw ConfigError("activations must be non-empty");
  for (const auto& a : spec.activations) Activation::parse(a);
  parse_alpha_mode(spec.alpha_mode);
  for (const auto& s : spec.scalings) {
    if (s != "depth_mup" && s != "plain_mup") throw ConfigError("scalings: unknown entry '" + s + "'");
  }
  for (const auto& m : spec.lr_modes) {
    if (m != "standard" && m != "depth_aware") throw ConfigError("lr_modes: unknown entry '" + m + "'");
  }
  if (spec.dataset != "sphere_teacher" && spec.dataset != "cifar10") {
    throw ConfigError("dataset: expected sphere_teacher or cifar10, got '" + spec.dataset + "'");
  }
  parse_teacher(spec.teacher);
  parse_loss(spec.loss);
  if (spec.input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (spec.dataset_size < 1) throw ConfigError("dataset_size must be >= 1");
  if (spec.noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
  if (spec.steps < 0) throw ConfigError("steps must be >= 0");
  if (spec.batch < 1) throw ConfigError("batch must be >= 1");
  if (spec.k_max < 0) throw ConfigError("k_max must be >= 0");
  if (spec.particles < 2) throw ConfigError("particles must be >= 2");
  if (spec.reference_steps < 1) throw ConfigError("reference_steps must be >= 1");
  if (spec.kernel_steps < 1) throw ConfigError("kernel_steps must be >= 1");
  if (spec.test_size < 1) throw ConfigError("test_size must be >= 1");
  if (!(spec.ridge_lambda > 0.0)) throw ConfigError("ridge_lambda must be > 0");
}

}  // namespace nfd
