#include "mtae/config_file.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "mtae/error.hpp"

namespace mtae {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& v, std::size_t line, const std::string& key) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw Error(ErrorCategory::config, "line " + std::to_string(line) + ": bad value for " + key + ": '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& v, std::size_t line, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCategory::config, "line " + std::to_string(line) + ": bad boolean for " + key + ": '" + v + "'");
}

std::string fmt(double d) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, r.ptr);
}

using Setter = std::function<void(RunConfig&, const std::string&, std::size_t)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = [] {
    std::vector<std::pair<std::string, Setter>> t;
    auto size = [&t](const char* key, auto member) {
      t.emplace_back(key, [member, key](RunConfig& c, const std::string& v, std::size_t line) {
        member(c) = parse_number<std::size_t>(v, line, key);
      });
    };
    auto real = [&t](const char* key, auto member) {
      t.emplace_back(key, [member, key](RunConfig& c, const std::string& v, std::size_t line) {
        member(c) = parse_number<double>(v, line, key);
      });
    };
    size("n_layers", [](RunConfig& c) -> auto& { return c.model.n_layers; });
    size("hidden", [](RunConfig& c) -> auto& { return c.model.hidden; });
    size("filter", [](RunConfig& c) -> auto& { return c.model.filter; });
    size("heads", [](RunConfig& c) -> auto& { return c.model.heads; });
    size("max_len", [](RunConfig& c) -> auto& { return c.model.max_len; });
    size("max_rel", [](RunConfig& c) -> auto& { return c.model.max_rel; });
    real("dropout", [](RunConfig& c) -> auto& { return c.model.dropout; });
    size("perf_vocab", [](RunConfig& c) -> auto& { return c.model.perf_vocab; });
    size("melody_vocab", [](RunConfig& c) -> auto& { return c.model.melody_vocab; });
    t.emplace_back("combiner", [](RunConfig& c, const std::string& v, std::size_t) { c.model.combiner = parse_combiner(v); });
    t.emplace_back("conditioning",
                   [](RunConfig& c, const std::string& v, std::size_t) { c.model.conditioning = parse_conditioning(v); });
    t.emplace_back("aggregation",
                   [](RunConfig& c, const std::string& v, std::size_t) { c.model.aggregation = parse_aggregation(v); });
    size("steps", [](RunConfig& c) -> auto& { return c.train.steps; });
    size("batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; });
    real("lr_base", [](RunConfig& c) -> auto& { return c.train.lr_base; });
    real("warmup", [](RunConfig& c) -> auto& { return c.train.warmup; });
    real("clip_norm", [](RunConfig& c) -> auto& { return c.train.clip_norm; });
    t.emplace_back("seed", [](RunConfig& c, const std::string& v, std::size_t line) {
      c.train.seed = parse_number<std::uint64_t>(v, line, "seed");
    });
    size("log_every", [](RunConfig& c) -> auto& { return c.train.log_every; });
    t.emplace_back("perturb", [](RunConfig& c, const std::string& v, std::size_t line) {
      c.train.perturb = parse_bool(v, line, "perturb");
    });
    return t;
  }();
  return table;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCategory::config, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto& table = setters();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& kv) { return kv.first == key; });
    if (it == table.end()) throw Error(ErrorCategory::config, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) {
      throw Error(ErrorCategory::config, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    try {
      it->second(cfg, value, line_no);
    } catch (const Error& e) {
      if (e.category() == ErrorCategory::config) throw;
      throw Error(ErrorCategory::config, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.model.validate();
  if (cfg.train.batch_size == 0) throw Error(ErrorCategory::config, "batch_size must be positive");
  if (!(cfg.train.warmup > 0.0)) throw Error(ErrorCategory::config, "warmup must be positive");
  if (!(cfg.train.lr_base > 0.0)) throw Error(ErrorCategory::config, "lr_base must be positive");
  return cfg;
}

std::string write_config(const RunConfig& c) {
  std::ostringstream o;
  o << "n_layers = " << c.model.n_layers << "\n"
    << "hidden = " << c.model.hidden << "\n"
    << "filter = " << c.model.filter << "\n"
    << "heads = " << c.model.heads << "\n"
    << "max_len = " << c.model.max_len << "\n"
    << "max_rel = " << c.model.max_rel << "\n"
    << "dropout = " << fmt(c.model.dropout) << "\n"
    << "perf_vocab = " << c.model.perf_vocab << "\n"
    << "melody_vocab = " << c.model.melody_vocab << "\n"
    << "combiner = " << to_string(c.model.combiner) << "\n"
    << "conditioning = " << to_string(c.model.conditioning) << "\n"
    << "aggregation = " << to_string(c.model.aggregation) << "\n"
    << "steps = " << c.train.steps << "\n"
    << "batch_size = " << c.train.batch_size << "\n"
    << "lr_base = " << fmt(c.train.lr_base) << "\n"
    << "warmup = " << fmt(c.train.warmup) << "\n"
    << "clip_norm = " << fmt(c.train.clip_norm) << "\n"
    << "seed = " << c.train.seed << "\n"
    << "log_every = " << c.train.log_every << "\n"
    << "perturb = " << (c.train.perturb ? "true" : "false") << "\n";
  return o.str();
}

RunConfig read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace mtae
