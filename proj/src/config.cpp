#include "bfn/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace bfn {
namespace {

struct Entry {
  std::string value;
  std::string where;  // file:line:col of the value
};

using Section = std::map<std::string, Entry>;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"model", {"n_modes", "epsilon"}},
      {"observation", {"a", "b", "m", "field"}},
      {"time", {"t_final", "n_steps"}},
      {"truth", {"seed", "alphas", "betas"}},
      {"noise", {"sigma", "seed", "input_sigma"}},
      {"load", {"kind", "mode", "amplitude", "frequency"}},
      {"observer", {"schedule", "kappa", "gains", "correction", "max_iter", "tol"}},
      {"outputs", {"directory", "formats"}},
      {"run", {"threads"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string location(const std::string& source, int line, std::size_t col) {
  return source + ":" + std::to_string(line) + ":" + std::to_string(col + 1);
}

[[noreturn]] void parse_error(const std::string& where, const std::string& msg) {
  raise(ErrorKind::kParseError, where + ": " + msg);
}

bool plain_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno == 0;
}

// [coef*]pi[/den], or a plain number.
double parse_number(const Entry& e) {
  const std::string s = trim(e.value);
  double out = 0;
  if (plain_double(s, out)) return out;
  const auto pos = s.find("pi");
  if (pos == std::string::npos) parse_error(e.where, "expected a number, got '" + s + "'");
  double coef = 1.0;
  double den = 1.0;
  std::string head = trim(s.substr(0, pos));
  std::string tail = trim(s.substr(pos + 2));
  if (!head.empty()) {
    if (head.back() == '*') head = trim(head.substr(0, head.size() - 1));
    if (!plain_double(head, coef)) parse_error(e.where, "expected a number, got '" + s + "'");
  }
  if (!tail.empty()) {
    if (tail.front() != '/' || !plain_double(trim(tail.substr(1)), den) || den == 0.0) {
      parse_error(e.where, "expected a number, got '" + s + "'");
    }
  }
  return coef * std::numbers::pi / den;
}

long long parse_integer(const Entry& e) {
  const std::string s = trim(e.value);
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno != 0) {
    parse_error(e.where, "expected an integer, got '" + s + "'");
  }
  return v;
}

int parse_int(const Entry& e) {
  const long long v = parse_integer(e);
  if (v < -2147483647LL || v > 2147483647LL) parse_error(e.where, "integer out of range");
  return static_cast<int>(v);
}

std::uint64_t parse_seed(const Entry& e) {
  const long long v = parse_integer(e);
  if (v < 0) parse_error(e.where, "seed must be nonnegative");
  return static_cast<std::uint64_t>(v);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> items;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(trim(item));
  if (items.size() == 1 && items[0].empty()) items.clear();
  return items;
}

std::vector<double> parse_number_list(const Entry& e) {
  std::vector<double> out;
  for (const auto& item : split_list(e.value)) {
    if (item.empty()) parse_error(e.where, "empty list item");
    out.push_back(parse_number(Entry{item, e.where}));
  }
  return out;
}

std::map<std::string, Section> tokenize(const std::string& text, const std::string& source) {
  std::map<std::string, Section> sections;
  std::string current;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = raw.substr(0, raw.find_first_of("#;"));
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::size_t indent = line.find_first_not_of(" \t");
    if (body.front() == '[') {
      if (body.back() != ']') parse_error(location(source, line_no, indent), "unterminated section header");
      current = trim(body.substr(1, body.size() - 2));
      if (!known_keys().count(current)) {
        parse_error(location(source, line_no, indent + 1), "unknown section [" + current + "]");
      }
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) parse_error(location(source, line_no, indent), "expected 'key = value'");
    if (current.empty()) parse_error(location(source, line_no, indent), "key outside of any [section]");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) parse_error(location(source, line_no, indent), "missing key");
    if (!known_keys().at(current).count(key)) {
      parse_error(location(source, line_no, indent), "unknown key '" + key + "' in [" + current + "]");
    }
    const std::string value = trim(line.substr(eq + 1));
    const std::size_t value_col = line.find_first_not_of(" \t", eq + 1);
    Entry entry{value, location(source, line_no, value_col == std::string::npos ? eq + 1 : value_col)};
    if (value.empty()) parse_error(entry.where, "missing value for '" + key + "'");
    if (!sections[current].emplace(key, entry).second) {
      parse_error(location(source, line_no, indent), "duplicate key '" + key + "' in [" + current + "]");
    }
  }
  return sections;
}

const Entry* find(const std::map<std::string, Section>& s, const std::string& section, const std::string& key) {
  const auto it = s.find(section);
  if (it == s.end()) return nullptr;
  const auto kt = it->second.find(key);
  return kt == it->second.end() ? nullptr : &kt->second;
}

const Entry& require(const std::map<std::string, Section>& s, const std::string& section, const std::string& key) {
  const Entry* e = find(s, section, key);
  if (e == nullptr) raise(ErrorKind::kValidationError, "missing required key [" + section + "] " + key);
  return *e;
}

[[noreturn]] void invalid(const std::string& msg) { raise(ErrorKind::kValidationError, msg); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

}  // namespace

bool ExperimentConfig::Outputs::wants(const std::string& format) const {
  return std::find(formats.begin(), formats.end(), format) != formats.end();
}

ObservationSpec<double> ExperimentConfig::observation_spec() const {
  return {observation.a, observation.b, observation.m, observation.field};
}

void ExperimentConfig::override_seed(std::uint64_t seed) {
  truth.seed = seed;
  truth.modal.reset();
  noise.seed = seed + 1;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  const auto s = tokenize(text, source);
  ExperimentConfig cfg;

  cfg.model.n_modes = parse_int(require(s, "model", "n_modes"));
  if (const Entry* e = find(s, "model", "epsilon")) cfg.model.epsilon = parse_number(*e);

  if (const Entry* e = find(s, "observation", "a")) cfg.observation.a = parse_number(*e);
  if (const Entry* e = find(s, "observation", "b")) cfg.observation.b = parse_number(*e);
  if (const Entry* e = find(s, "observation", "m")) cfg.observation.m = parse_int(*e);
  if (const Entry* e = find(s, "observation", "field")) {
    const std::string v = trim(e->value);
    if (v == "velocity") cfg.observation.field = ObservedField::kVelocity;
    else if (v == "displacement") cfg.observation.field = ObservedField::kDisplacement;
    else parse_error(e->where, "field must be velocity or displacement");
  }

  cfg.time.t_final = parse_number(require(s, "time", "t_final"));
  cfg.time.n_steps = parse_int(require(s, "time", "n_steps"));

  if (const Entry* e = find(s, "truth", "seed")) cfg.truth.seed = parse_seed(*e);
  const Entry* alphas = find(s, "truth", "alphas");
  const Entry* betas = find(s, "truth", "betas");
  if ((alphas == nullptr) != (betas == nullptr)) invalid("[truth] alphas and betas must be given together");
  if (alphas != nullptr) {
    const std::vector<double> a = parse_number_list(*alphas);
    const std::vector<double> b = parse_number_list(*betas);
    ModalState<double> modal;
    modal.alphas = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
    modal.betas = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    cfg.truth.modal = modal;
  }

  if (const Entry* e = find(s, "noise", "sigma")) cfg.noise.sigma = parse_number(*e);
  if (const Entry* e = find(s, "noise", "seed")) cfg.noise.seed = parse_seed(*e);
  if (const Entry* e = find(s, "noise", "input_sigma")) cfg.noise.input_sigma = parse_number(*e);

  if (const Entry* e = find(s, "load", "kind")) {
    const std::string v = trim(e->value);
    if (v == "zero") cfg.load.kind = LoadSpec::Kind::kZero;
    else if (v == "modal_sinusoid") cfg.load.kind = LoadSpec::Kind::kModalSinusoid;
    else parse_error(e->where, "load kind must be zero or modal_sinusoid");
  }
  if (const Entry* e = find(s, "load", "mode")) cfg.load.mode = parse_int(*e);
  if (const Entry* e = find(s, "load", "amplitude")) cfg.load.amplitude = parse_number(*e);
  if (const Entry* e = find(s, "load", "frequency")) cfg.load.frequency = parse_number(*e);

  std::string schedule = "harmonic";
  double kappa = 0.5;
  if (const Entry* e = find(s, "observer", "schedule")) schedule = trim(e->value);
  if (const Entry* e = find(s, "observer", "kappa")) kappa = parse_number(*e);
  const Entry* gains = find(s, "observer", "gains");
  if (schedule == "custom") {
    if (gains == nullptr) invalid("custom schedule needs [observer] gains");
    cfg.observer.schedule.kind = GainSchedule::Kind::kCustom;
    cfg.observer.schedule.sequence = parse_number_list(*gains);
    cfg.observer.schedule.kappa = cfg.observer.schedule.sequence.empty() ? 0.0 : cfg.observer.schedule.sequence[0];
  } else if (schedule == "constant" || schedule == "harmonic") {
    if (gains != nullptr) invalid("[observer] gains is only used by the custom schedule");
    cfg.observer.schedule.kind = schedule == "constant" ? GainSchedule::Kind::kConstant : GainSchedule::Kind::kHarmonic;
    cfg.observer.schedule.kappa = kappa;
  } else {
    parse_error(find(s, "observer", "schedule")->where, "schedule must be constant, harmonic or custom");
  }
  if (const Entry* e = find(s, "observer", "correction")) {
    const std::string v = trim(e->value);
    if (v == "identity") cfg.observer.correction.mode = CorrectionMode::kIdentity;
    else if (v == "scalar_decay") cfg.observer.correction.mode = CorrectionMode::kScalarDecay;
    else if (v == "exact") cfg.observer.correction.mode = CorrectionMode::kExact;
    else parse_error(e->where, "correction must be identity, scalar_decay or exact");
  }
  if (const Entry* e = find(s, "observer", "max_iter")) cfg.observer.max_iter = parse_int(*e);
  if (const Entry* e = find(s, "observer", "tol")) cfg.observer.tol = parse_number(*e);

  if (const Entry* e = find(s, "outputs", "directory")) cfg.outputs.directory = trim(e->value);
  if (const Entry* e = find(s, "outputs", "formats")) cfg.outputs.formats = split_list(e->value);
  if (const Entry* e = find(s, "run", "threads")) cfg.threads = parse_int(*e);

  validate_config(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIoError, "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void validate_config(ExperimentConfig& cfg) {
  cfg.warnings.clear();
  const int n = cfg.model.n_modes;
  if (n < 1) invalid("n_modes must be at least 1");
  const double eps = cfg.model.epsilon;
  if (!(eps >= 0.0)) invalid("epsilon must be nonnegative");
  if (!(eps * eps < 4.0)) invalid("dissipation too large: epsilon^2 must be below 4*lambda_1 = 4");

  auto& obs = cfg.observation;
  if (obs.m == 0) obs.m = n;
  if (!(obs.a >= 0.0 && obs.b <= std::numbers::pi + 1e-12 && obs.a < obs.b)) {
    invalid("observation interval must satisfy 0 <= a < b <= pi");
  }
  if (obs.m < 1 || obs.m > n) invalid("observation channels m must lie in [1, n_modes]");

  if (!(cfg.time.t_final > 0.0)) invalid("t_final must be positive");
  if (cfg.time.n_steps < 2) invalid("n_steps must be at least 2");

  if (cfg.truth.modal) {
    if (cfg.truth.modal->alphas.size() != n || cfg.truth.modal->betas.size() != n) {
      invalid("[truth] alphas and betas need n_modes entries each");
    }
  }
  if (!(cfg.noise.sigma >= 0.0)) invalid("noise sigma must be nonnegative");
  if (!(cfg.noise.input_sigma >= 0.0)) invalid("input_sigma must be nonnegative");

  if (cfg.load.kind == LoadSpec::Kind::kModalSinusoid && (cfg.load.mode < 1 || cfg.load.mode > n)) {
    invalid("load mode must lie in [1, n_modes]");
  }
  if (!std::isfinite(cfg.load.amplitude) || !std::isfinite(cfg.load.frequency)) invalid("load parameters must be finite");

  auto& ob = cfg.observer;
  if (ob.schedule.kind == GainSchedule::Kind::kCustom) {
    ob.schedule = GainSchedule::custom(ob.schedule.sequence);
  } else if (!(ob.schedule.kappa > 0.0)) {
    invalid("observer kappa must be positive");
  }
  if (ob.max_iter < 1) invalid("max_iter must be at least 1");
  if (!(ob.tol >= 0.0)) invalid("tol must be nonnegative");

  if (cfg.outputs.directory.empty()) invalid("outputs directory must not be empty");
  for (const auto& f : cfg.outputs.formats) {
    if (f != "csv" && f != "json") invalid("output format must be csv or json, got '" + f + "'");
  }
  if (cfg.outputs.formats.empty()) invalid("at least one output format is required");
  if (cfg.threads < 1) invalid("threads must be at least 1");

  if (!ob.schedule.square_summable()) {
    cfg.warnings.push_back(ob.schedule.name() +
                           " gain schedule is not square-summable: the iteration targets the closed-loop "
                           "minimizer, not the output-error minimizer");
  }
}

std::string to_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[model]\nn_modes = " << cfg.model.n_modes << "\nepsilon = " << fmt(cfg.model.epsilon) << "\n\n";
  out << "[observation]\na = " << fmt(cfg.observation.a) << "\nb = " << fmt(cfg.observation.b)
      << "\nm = " << cfg.observation.m
      << "\nfield = " << (cfg.observation.field == ObservedField::kVelocity ? "velocity" : "displacement") << "\n\n";
  out << "[time]\nt_final = " << fmt(cfg.time.t_final) << "\nn_steps = " << cfg.time.n_steps << "\n\n";
  out << "[truth]\nseed = " << cfg.truth.seed << "\n";
  if (cfg.truth.modal) {
    const auto& m = *cfg.truth.modal;
    out << "alphas = " << join({m.alphas.data(), m.alphas.data() + m.alphas.size()}) << "\n";
    out << "betas = " << join({m.betas.data(), m.betas.data() + m.betas.size()}) << "\n";
  }
  out << "\n[noise]\nsigma = " << fmt(cfg.noise.sigma) << "\nseed = " << cfg.noise.seed
      << "\ninput_sigma = " << fmt(cfg.noise.input_sigma) << "\n\n";
  out << "[load]\nkind = " << (cfg.load.kind == LoadSpec::Kind::kZero ? "zero" : "modal_sinusoid")
      << "\nmode = " << cfg.load.mode << "\namplitude = " << fmt(cfg.load.amplitude)
      << "\nfrequency = " << fmt(cfg.load.frequency) << "\n\n";
  out << "[observer]\nschedule = " << cfg.observer.schedule.name() << "\n";
  if (cfg.observer.schedule.kind == GainSchedule::Kind::kCustom) {
    out << "gains = " << join(cfg.observer.schedule.sequence) << "\n";
  } else {
    out << "kappa = " << fmt(cfg.observer.schedule.kappa) << "\n";
  }
  out << "correction = " << to_string(cfg.observer.correction.mode) << "\nmax_iter = " << cfg.observer.max_iter
      << "\ntol = " << fmt(cfg.observer.tol) << "\n\n";
  out << "[outputs]\ndirectory = " << cfg.outputs.directory << "\nformats = ";
  for (std::size_t i = 0; i < cfg.outputs.formats.size(); ++i) out << (i ? ", " : "") << cfg.outputs.formats[i];
  out << "\n\n[run]\nthreads = " << cfg.threads << "\n";
  return out.str();
}

}  // namespace bfn
