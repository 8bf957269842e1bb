#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "safetl/experiment.hpp"

namespace safetl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class LineError {
 public:
  LineError(std::string source, int line) : prefix_(std::move(source) + ":" + std::to_string(line) + ": ") {}
  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(prefix_ + msg); }

  std::uint64_t to_u64(const std::string& key, const std::string& v) const {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) fail(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
  }
  std::size_t to_count(const std::string& key, const std::string& v) const {
    const std::uint64_t n = to_u64(key, v);
    if (n == 0) fail(key + " must be positive");
    return static_cast<std::size_t>(n);
  }
  double to_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      fail(key + ": expected a number, got '" + v + "'");
    }
  }
  bool to_bool(const std::string& key, std::string v) const {
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(key + ": expected true or false, got '" + v + "'");
  }

 private:
  std::string prefix_;
};

}  // namespace

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("at least one method is required");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (sizes.n_source == 0 || sizes.n_init == 0 || sizes.n_pool == 0 || n_test == 0) {
    throw ConfigError("counts must be positive");
  }
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (refit_every == 0) throw ConfigError("refit_every must be positive");
  if (num_sources == 0) throw ConfigError("num_sources must be positive");
  if (workers == 0) throw ConfigError("workers must be positive");
  if (initial_restarts < 0 || refit_restarts < 0) throw ConfigError("restart counts must be >= 0");
  if (benchmark == BenchmarkKind::CustomCsv && data_dir.empty()) {
    throw ConfigError("custom-csv benchmark needs data_dir");
  }
  if ((benchmark == BenchmarkKind::GP1D || benchmark == BenchmarkKind::GP2D ||
       benchmark == BenchmarkKind::Toy1D) && num_sources != 1) {
    throw ConfigError("unsupported combination: " + to_string(benchmark) + " has exactly one source task");
  }
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name) {
  ExperimentConfig cfg;
  std::map<std::string, std::pair<std::string, int>> entries;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const LineError err(source_name, line_no);
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) err.fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) err.fail("missing key before '='");
    if (value.empty()) err.fail(key + ": missing value");
    if (entries.count(key) != 0) err.fail("duplicate key '" + key + "'");
    entries[key] = {value, line_no};
  }

  auto take = [&](const std::string& key) -> std::optional<std::pair<std::string, LineError>> {
    auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    auto out = std::make_pair(it->second.first, LineError(source_name, it->second.second));
    entries.erase(it);
    return out;
  };
  auto required = [&](const std::string& key) {
    auto v = take(key);
    if (!v) throw ConfigError(source_name + ": missing required key '" + key + "'");
    return *v;
  };

  {
    const auto [v, err] = required("benchmark");
    try {
      cfg.benchmark = parse_benchmark(v);
    } catch (const ConfigError& e) {
      err.fail(e.what());
    }
  }
  cfg.sizes = BenchmarkSizes::defaults(cfg.benchmark);
  {
    const auto [v, err] = required("method");
    for (const auto& name : split_list(v)) {
      try {
        cfg.methods.push_back(parse_method(name));
      } catch (const ConfigError& e) {
        err.fail(e.what());
      }
    }
    if (cfg.methods.empty()) err.fail("method: empty list");
  }
  {
    auto seed = take("seed");
    auto seeds = take("seeds");
    if (seed && seeds) seeds->second.fail("give either 'seed' or 'seeds', not both");
    if (!seed && !seeds) throw ConfigError(source_name + ": missing required key 'seed'");
    const auto& [v, err] = seed ? *seed : *seeds;
    for (const auto& s : split_list(v)) cfg.seeds.push_back(err.to_u64("seed", s));
    if (cfg.seeds.empty()) err.fail("seed: empty list");
  }
  auto count = [&](const std::string& key, std::size_t& dst) {
    if (auto v = take(key)) dst = v->second.to_count(key, v->first);
  };
  count("n_source", cfg.sizes.n_source);
  count("n_init", cfg.sizes.n_init);
  count("n_pool", cfg.sizes.n_pool);
  count("n_test", cfg.n_test);
  count("num_sources", cfg.num_sources);
  count("refit_every", cfg.refit_every);
  count("workers", cfg.workers);
  if (auto v = take("n_query")) cfg.sizes.n_query = static_cast<std::size_t>(v->second.to_u64("n_query", v->first));
  if (auto v = take("lmc_latents")) cfg.lmc_latents = static_cast<std::size_t>(v->second.to_u64("lmc_latents", v->first));
  if (auto v = take("initial_restarts")) {
    cfg.initial_restarts = static_cast<int>(v->second.to_u64("initial_restarts", v->first));
  }
  if (auto v = take("refit_restarts")) {
    cfg.refit_restarts = static_cast<int>(v->second.to_u64("refit_restarts", v->first));
  }
  if (auto v = take("beta")) {
    cfg.beta = v->second.to_double("beta", v->first);
    if (cfg.beta < 0.0) v->second.fail("beta must be >= 0");
  }
  if (auto v = take("noisy_safe_set")) cfg.noisy_safe_set = v->second.to_bool("noisy_safe_set", v->first);
  if (auto v = take("timing")) cfg.timing = v->second.to_bool("timing", v->first);
  if (auto v = take("thresholds")) {
    const auto items = split_list(v->first);
    cfg.thresholds.resize(static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) {
      cfg.thresholds[static_cast<Eigen::Index>(i)] = v->second.to_double("thresholds", items[i]);
    }
  }
  if (auto v = take("kernel")) {
    try {
      cfg.kernel = parse_kernel_family(v->first);
    } catch (const std::exception& e) {
      v->second.fail(e.what());
    }
  }
  if (auto v = take("output_dir")) cfg.output_dir = v->first;
  if (auto v = take("data_dir")) cfg.data_dir = v->first;

  if (!entries.empty()) {
    const auto first = std::min_element(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return a.second.second < b.second.second;
    });
    LineError(source_name, first->second.second).fail("unknown key '" + first->first + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), path.string());
}

}  // namespace safetl
