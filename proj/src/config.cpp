#include "mitonet/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace mito {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  fail(ErrorCategory::config, "key '" + key + "': cannot parse '" + value + "' as " + expected);
}

template <class Int>
Int parse_int(const std::string& key, const std::string& value) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "an integer");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  is.imbue(std::locale::classic());
  double out = 0.0;
  if (!(is >> out) || !is.eof()) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::string_view rest = value;
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(parse_int<int>(key, std::string(trim(rest.substr(0, comma)))));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "filters",      "input_size",   "dropout", "batch_size",   "steps",           "checkpoint_every",
      "seed",         "learning_rate", "beta1",  "beta2",        "epsilon",         "min_coverage",
      "flip_probability", "rotate"};
  return keys;
}

ConfigMap parse_config(std::string_view text, const std::string& origin) {
  ConfigMap map;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorCategory::config, origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) fail(ErrorCategory::config, origin + ":" + std::to_string(line_no) + ": empty key");
    map[key] = std::string(trim(line.substr(eq + 1)));
  }
  return map;
}

ConfigMap read_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

void apply_overrides(ConfigMap& base, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto parsed = parse_config(o, "override '" + o + "'");
    for (const auto& [k, v] : parsed) base[k] = v;
  }
}

RunConfig make_run_config(const ConfigMap& map) {
  RunConfig c;
  for (const auto& [key, value] : map) {
    if (key == "filters") c.model.filters = parse_int_list(key, value);
    else if (key == "input_size") c.model.input_size = parse_int<int>(key, value);
    else if (key == "dropout") c.model.dropout = parse_double(key, value);
    else if (key == "batch_size") c.train.batch_size = parse_int<int>(key, value);
    else if (key == "steps") c.train.steps = parse_int<std::int64_t>(key, value);
    else if (key == "checkpoint_every") c.train.checkpoint_every = parse_int<std::int64_t>(key, value);
    else if (key == "seed") c.train.seed = parse_int<std::uint64_t>(key, value);
    else if (key == "learning_rate") c.train.adam.learning_rate = parse_double(key, value);
    else if (key == "beta1") c.train.adam.beta1 = parse_double(key, value);
    else if (key == "beta2") c.train.adam.beta2 = parse_double(key, value);
    else if (key == "epsilon") c.train.adam.epsilon = parse_double(key, value);
    else if (key == "min_coverage") c.augment.min_coverage = parse_double(key, value);
    else if (key == "flip_probability") c.augment.flip_probability = parse_double(key, value);
    else if (key == "rotate") c.augment.rotate = parse_bool(key, value);
    else fail(ErrorCategory::config, "unknown config key '" + key + "'");
  }
  c.augment.output_size = c.model.input_size;
  c.model.validate();
  c.train.validate();
  c.augment.validate();
  return c;
}

ConfigMap to_config_map(const RunConfig& c) {
  ConfigMap m;
  std::string filters;
  for (std::size_t i = 0; i < c.model.filters.size(); ++i) filters += (i ? "," : "") + std::to_string(c.model.filters[i]);
  m["filters"] = filters;
  m["input_size"] = std::to_string(c.model.input_size);
  m["dropout"] = format_double(c.model.dropout);
  m["batch_size"] = std::to_string(c.train.batch_size);
  m["steps"] = std::to_string(c.train.steps);
  m["checkpoint_every"] = std::to_string(c.train.checkpoint_every);
  m["seed"] = std::to_string(c.train.seed);
  m["learning_rate"] = format_double(c.train.adam.learning_rate);
  m["beta1"] = format_double(c.train.adam.beta1);
  m["beta2"] = format_double(c.train.adam.beta2);
  m["epsilon"] = format_double(c.train.adam.epsilon);
  m["min_coverage"] = format_double(c.augment.min_coverage);
  m["flip_probability"] = format_double(c.augment.flip_probability);
  m["rotate"] = c.augment.rotate ? "true" : "false";
  return m;
}

std::string format_config(const ConfigMap& map) {
  std::string out;
  for (const auto& [k, v] : map) out += k + " = " + v + "\n";
  return out;
}

}  // namespace mito
