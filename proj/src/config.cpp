#include "etsbm/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace etsbm {

namespace {

using Field = std::variant<std::uint64_t RunConfig::*, int RunConfig::*, double RunConfig::*,
                           bool RunConfig::*, std::string RunConfig::*>;

struct Entry {
  const char* key;
  Field field;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table{
      {"seed", &RunConfig::seed},
      {"jobs", &RunConfig::jobs},
      {"out", &RunConfig::out},
      {"data", &RunConfig::data},
      {"truth", &RunConfig::truth},
      {"scenario", &RunConfig::scenario},
      {"difficulty", &RunConfig::difficulty},
      {"nodes", &RunConfig::nodes},
      {"model", &RunConfig::model},
      {"q", &RunConfig::q},
      {"q-range", &RunConfig::q_range},
      {"k", &RunConfig::k},
      {"hidden", &RunConfig::hidden},
      {"embedding-dim", &RunConfig::embedding_dim},
      {"embeddings", &RunConfig::embeddings},
      {"init", &RunConfig::init},
      {"restarts", &RunConfig::restarts},
      {"warm-start", &RunConfig::warm_start},
      {"refine-iter", &RunConfig::refine_iter},
      {"max-iter", &RunConfig::max_iter},
      {"lr-topics", &RunConfig::lr_topics},
      {"lr-embeddings", &RunConfig::lr_embeddings},
      {"lr-xi", &RunConfig::lr_xi},
      {"samples", &RunConfig::samples},
      {"eval-samples", &RunConfig::eval_samples},
      {"tolerance", &RunConfig::tolerance},
      {"patience", &RunConfig::patience},
      {"etm-epochs", &RunConfig::etm_epochs},
      {"etm-min-steps", &RunConfig::etm_min_steps},
      {"etm-restarts", &RunConfig::etm_restarts},
      {"replicates", &RunConfig::replicates},
      {"models", &RunConfig::models},
      {"fit", &RunConfig::fit},
      {"top-words", &RunConfig::top_words},
      {"corrupt", &RunConfig::corrupt},
  };
  return table;
}

const Entry& entry(std::string_view key) {
  for (const auto& e : entries())
    if (key == e.key) return e;
  throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw std::invalid_argument("bad value '" + std::string(v) + "' for " + std::string(key));
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("bad value '" + std::string(v) + "' for " + std::string(key));
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& e : entries()) k.emplace_back(e.key);
    return k;
  }();
  return keys;
}

bool is_flag_key(std::string_view key) {
  return std::holds_alternative<bool RunConfig::*>(entry(key).field);
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  const auto& e = entry(key);
  const auto v = trim(value);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(config.*member)>;
        if constexpr (std::is_same_v<T, std::string>) config.*member = std::string(v);
        else if constexpr (std::is_same_v<T, bool>) config.*member = parse_bool(key, v);
        else config.*member = parse_number<T>(key, v);
      },
      e.field);
}

std::string get_config_value(const RunConfig& config, std::string_view key) {
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cvref_t<decltype(config.*member)>;
        if constexpr (std::is_same_v<T, std::string>) return config.*member;
        else if constexpr (std::is_same_v<T, bool>) return config.*member ? "true" : "false";
        else if constexpr (std::is_same_v<T, double>) return format_double(config.*member);
        else return std::to_string(config.*member);
      },
      entry(key).field);
}

RunConfig read_config(std::istream& in) {
  RunConfig config;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config line " + std::to_string(n) + ": expected key = value");
    try {
      set_config_value(config, trim(s.substr(0, eq)), s.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(n) + ": " + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  return read_config(in);
}

void write_config(const RunConfig& config, std::ostream& out) {
  for (const auto& key : config_keys()) out << key << " = " << get_config_value(config, key) << '\n';
}

int resolved_topics(const RunConfig& config) { return config.k > 0 ? config.k : 3; }

InitStrategy resolved_init(const RunConfig& config) {
  if (!config.init.empty()) return parse_init(config.init);
  return config.model == "sbm" ? InitStrategy::KMeans : InitStrategy::Dissimilarity;
}

std::vector<int> parse_q_range(std::string_view s) {
  std::vector<int> qs;
  const auto colon = s.find(':');
  if (colon != std::string_view::npos) {
    const int lo = parse_number<int>("q-range", trim(s.substr(0, colon)));
    const int hi = parse_number<int>("q-range", trim(s.substr(colon + 1)));
    if (lo < 1 || hi < lo) throw std::invalid_argument("q-range needs 1 <= lo <= hi");
    for (int q = lo; q <= hi; ++q) qs.push_back(q);
    return qs;
  }
  for (const auto& item : split_list(s)) {
    const int q = parse_number<int>("q-range", item);
    if (q < 1) throw std::invalid_argument("q-range values must be at least 1");
    qs.push_back(q);
  }
  if (qs.empty()) throw std::invalid_argument("empty q-range");
  return qs;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = std::min(s.find(',', start), s.size());
    const auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.emplace_back(item);
    start = end + 1;
  }
  return out;
}

FitOptions fit_options(const RunConfig& config, const std::optional<Matrix>& embeddings) {
  FitOptions fo;
  fo.topic = {resolved_topics(config), config.embedding_dim, config.hidden};
  if (embeddings) fo.topic.embedding_dim = static_cast<int>(embeddings->rows());
  fo.embeddings = embeddings;
  if (config.model != "etsbm" && config.model != "sbm")
    throw std::invalid_argument("unknown model '" + config.model + "' (expected etsbm or sbm)");
  fo.use_text = config.model == "etsbm";
  auto& s = fo.schedule;
  s.max_iter = config.max_iter;
  s.lr_topics = config.lr_topics;
  s.lr_embeddings = config.lr_embeddings;
  s.lr_xi = config.lr_xi;
  s.train_samples = config.samples;
  s.eval_samples = config.eval_samples;
  s.tolerance = config.tolerance;
  s.patience = config.patience;
  fo.seed = config.seed;
  return fo;
}

EtmOptions etm_options(const RunConfig& config) {
  EtmOptions eo;
  eo.topic = {resolved_topics(config), config.embedding_dim, config.hidden};
  eo.epochs = config.etm_epochs;
  eo.min_steps = config.etm_min_steps;
  eo.restarts = config.etm_restarts;
  eo.seed = config.seed;
  return eo;
}

SelectionOptions selection_options(const RunConfig& config, std::vector<int> q_range,
                                   const std::optional<Matrix>& embeddings) {
  SelectionOptions so;
  so.q_range = std::move(q_range);
  so.restarts = config.restarts > 0 ? config.restarts : 10;
  so.init = resolved_init(config);
  so.fit = fit_options(config, embeddings);
  so.etm = etm_options(config);
  so.warm_start_topics = config.warm_start;
  so.refine_iterations = config.refine_iter;
  so.seed = config.seed;
  so.jobs = config.jobs;
  return so;
}

BenchmarkOptions benchmark_options(const RunConfig& config) {
  BenchmarkOptions bo;
  if (config.nodes < 2) throw std::invalid_argument("nodes must be at least 2");
  if (config.replicates < 1) throw std::invalid_argument("replicates must be at least 1");
  bo.nodes = static_cast<std::size_t>(config.nodes);
  bo.replicates = config.replicates;
  bo.restarts = config.restarts > 0 ? config.restarts : 1;
  bo.num_topics = config.k;
  bo.init = config.init.empty() ? InitStrategy::Dissimilarity : parse_init(config.init);
  bo.models = split_list(config.models);
  if (bo.models.empty()) throw std::invalid_argument("no models requested");
  bo.fit = fit_options(config, std::nullopt);
  bo.fit.use_text = true;
  bo.etm = etm_options(config);
  bo.warm_start_topics = config.warm_start;
  bo.seed = config.seed;
  bo.jobs = config.jobs;
  return bo;
}

}  // namespace etsbm
